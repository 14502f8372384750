#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pid/error.hpp"
#include "pid/format.hpp"
#include "pid/model_io.hpp"

namespace pid {

enum class FeatureKind { dense, sparse };

/// Sample matrix (n x d), targets, and per-feature kinds.
struct DatasetSpec {
    Matrix X;
    std::vector<double> y;
    std::vector<FeatureKind> kinds;
    std::vector<std::string> names;
    /// Free-form origin tag, e.g. "F3 seed=7 range=[-1,1]".
    std::string provenance;

    std::size_t samples() const noexcept { return X.rows; }
    std::size_t features() const noexcept { return X.cols; }

    void validate() const {
        if (X.data.size() != X.rows * X.cols) throw ShapeMismatch("dataset matrix has inconsistent storage");
        if (y.size() != X.rows)
            throw ShapeMismatch("dataset has " + std::to_string(X.rows) + " samples but " + std::to_string(y.size()) +
                                " targets");
        if (!kinds.empty() && kinds.size() != X.cols) throw ShapeMismatch("feature kinds do not match column count");
        if (!names.empty() && names.size() != X.cols) throw ShapeMismatch("feature names do not match column count");
        for (double v : X.data)
            if (!std::isfinite(v)) throw NonFiniteValue("dataset contains a non-finite feature value");
        for (double v : y)
            if (!std::isfinite(v)) throw NonFiniteValue("dataset contains a non-finite target");
    }

    std::string name(std::size_t j) const { return names.empty() ? "x" + std::to_string(j) : names[j]; }
    FeatureKind kind(std::size_t j) const { return kinds.empty() ? FeatureKind::dense : kinds[j]; }

    /// Rows [begin, end) as a new dataset.
    DatasetSpec slice(std::size_t begin, std::size_t end) const {
        DatasetSpec out;
        out.X = Matrix(end - begin, X.cols);
        std::copy(X.data.begin() + static_cast<std::ptrdiff_t>(begin * X.cols),
                  X.data.begin() + static_cast<std::ptrdiff_t>(end * X.cols), out.X.data.begin());
        out.y.assign(y.begin() + static_cast<std::ptrdiff_t>(begin), y.begin() + static_cast<std::ptrdiff_t>(end));
        out.kinds = kinds;
        out.names = names;
        out.provenance = provenance;
        return out;
    }
};

/// CSV with header `x0,...,x{d-1},y` (or the dataset's own column names).
inline std::string dataset_to_csv(const DatasetSpec& data) {
    std::string out;
    for (std::size_t j = 0; j < data.features(); ++j) out += data.name(j) + ",";
    out += "y\n";
    for (std::size_t i = 0; i < data.samples(); ++i) {
        for (std::size_t j = 0; j < data.features(); ++j) out += fmt::real(data.X.at(i, j)) + ",";
        out += fmt::real(data.y[i]) + "\n";
    }
    return out;
}

inline void save_dataset(const DatasetSpec& data, const std::string& path) {
    fmt::write_file(path, dataset_to_csv(data));
}

/// Parses the CSV layout written by dataset_to_csv. The last column is the target.
inline DatasetSpec parse_dataset_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw ParseError("dataset CSV is empty");
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            cells.push_back(cell);
        }
        return cells;
    };
    auto header = split(line);
    if (header.size() < 2 || header.back() != "y") throw ParseError("dataset CSV header must end with column 'y'");
    DatasetSpec data;
    data.names.assign(header.begin(), header.end() - 1);
    const std::size_t d = data.names.size();
    std::vector<double> values;
    std::size_t n = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split(line);
        if (cells.size() != d + 1)
            throw ParseError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                             " cells, expected " + std::to_string(d + 1));
        for (std::size_t j = 0; j <= d; ++j) {
            const std::string& c = cells[j];
            double v = 0.0;
            const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (c.empty() || res.ec != std::errc() || res.ptr != c.data() + c.size())
                throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + c + "'");
            if (j < d)
                values.push_back(v);
            else
                data.y.push_back(v);
        }
        ++n;
    }
    data.X = Matrix(n, d, std::move(values));
    data.kinds.assign(d, FeatureKind::dense);
    data.validate();
    return data;
}

inline DatasetSpec load_dataset(const std::string& path) { return parse_dataset_csv(fmt::read_file(path)); }

}  // namespace pid
