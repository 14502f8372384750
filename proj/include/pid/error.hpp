#pragma once

#include <stdexcept>
#include <string>

namespace pid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model, dataset or ledger file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Dimensions of two objects do not line up (layer chains, sample widths, grids).
class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class NonFiniteValue : public Error {
public:
    using Error::Error;
};

/// A caller-supplied parameter is outside its documented range.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A data-generating function was evaluated outside its domain.
class DomainError : public Error {
public:
    using Error::Error;
};

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

}  // namespace pid
