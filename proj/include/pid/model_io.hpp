#pragma once

// Network weights, the canonical model file, convolution flattening and
// per-sample activation capture.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pid/error.hpp"
#include "pid/format.hpp"

namespace pid {

/// Dense row-major real matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != r * c)
            throw ShapeMismatch("matrix data has " + std::to_string(data.size()) + " entries, expected " +
                                std::to_string(r * c));
    }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// W^(l): rows index units of layer l-1, columns index units of layer l.
using WeightMatrix = Matrix;

/// Feed-forward ReLU network viewed as a layered weighted DAG. Layer 0 is the
/// input; `layers[l-1]` connects layer l-1 to layer l; the last layer is the
/// (linear) output layer.
struct NetworkSpec {
    std::vector<WeightMatrix> layers;
    /// Either empty or one vector per layer. Only used by forward passes; the
    /// graph is built from weights alone.
    std::vector<std::vector<double>> biases;
    nlohmann::json meta = nlohmann::json::object();

    std::size_t depth() const noexcept { return layers.size(); }
    std::size_t input_dim() const noexcept { return layers.empty() ? 0 : layers.front().rows; }
    std::size_t output_dim() const noexcept { return layers.empty() ? 0 : layers.back().cols; }

    /// Number of units at layer l, 0 <= l <= depth().
    std::size_t width(std::size_t l) const { return l == 0 ? layers.at(0).rows : layers.at(l - 1).cols; }

    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w;
        w.reserve(depth() + 1);
        for (std::size_t l = 0; l <= depth(); ++l) w.push_back(width(l));
        return w;
    }

    std::size_t edge_count() const noexcept {
        std::size_t n = 0;
        for (const auto& m : layers) n += m.rows * m.cols;
        return n;
    }

    bool has_biases() const noexcept { return !biases.empty(); }

    void validate() const {
        if (layers.empty()) throw ShapeMismatch("network has no layers");
        bool any_nonzero = false;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& m = layers[l];
            const std::string name = "layer " + std::to_string(l + 1);
            if (m.rows == 0 || m.cols == 0) throw ShapeMismatch(name + " has an empty dimension");
            if (m.data.size() != m.rows * m.cols)
                throw ShapeMismatch(name + " has " + std::to_string(m.data.size()) + " entries, expected " +
                                    std::to_string(m.rows * m.cols));
            if (l > 0 && layers[l - 1].cols != m.rows)
                throw ShapeMismatch(name + " has " + std::to_string(m.rows) + " rows but layer " + std::to_string(l) +
                                    " has " + std::to_string(layers[l - 1].cols) + " columns");
            for (double v : m.data) {
                if (!std::isfinite(v)) throw NonFiniteValue(name + " contains a non-finite weight");
                any_nonzero = any_nonzero || v != 0.0;
            }
        }
        if (!any_nonzero) throw InvalidArgument("network has no nonzero weight");
        if (!biases.empty()) {
            if (biases.size() != layers.size())
                throw ShapeMismatch("expected " + std::to_string(layers.size()) + " bias vectors, got " +
                                    std::to_string(biases.size()));
            for (std::size_t l = 0; l < biases.size(); ++l) {
                if (biases[l].size() != layers[l].cols)
                    throw ShapeMismatch("bias of layer " + std::to_string(l + 1) + " has length " +
                                        std::to_string(biases[l].size()) + ", expected " +
                                        std::to_string(layers[l].cols));
                for (double v : biases[l])
                    if (!std::isfinite(v))
                        throw NonFiniteValue("bias of layer " + std::to_string(l + 1) + " is non-finite");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Model file

inline constexpr std::string_view kModelFormat = "json-v1";

namespace detail {

inline std::vector<double> parse_reals(const nlohmann::json& arr, const std::string& what) {
    if (!arr.is_array()) throw ParseError(what + " must be an array");
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number()) throw ParseError(what + " contains a non-numeric entry");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw NonFiniteValue(what + " contains a non-finite value");
        out.push_back(x);
    }
    return out;
}

inline void append_reals(std::string& out, std::span<const double> values) {
    out.push_back('[');
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(',');
        out += fmt::real(values[i]);
    }
    out.push_back(']');
}

}  // namespace detail

inline NetworkSpec parse_network(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("model JSON must be an object");
    if (doc.contains("format")) {
        if (!doc["format"].is_string() || doc["format"].get<std::string>() != kModelFormat)
            throw ParseError("unsupported model format '" + doc["format"].dump() + "'");
    }
    if (!doc.contains("layers") || !doc["layers"].is_array()) throw ParseError("model JSON lacks a 'layers' array");

    NetworkSpec net;
    std::size_t index = 0;
    for (const auto& layer : doc["layers"]) {
        ++index;
        const std::string name = "layer " + std::to_string(index);
        if (!layer.is_object() || !layer.contains("rows") || !layer.contains("cols") || !layer.contains("data"))
            throw ParseError(name + " must have rows, cols and data");
        if (!layer["rows"].is_number_unsigned() || !layer["cols"].is_number_unsigned())
            throw ParseError(name + " rows/cols must be non-negative integers");
        const auto rows = layer["rows"].get<std::size_t>();
        const auto cols = layer["cols"].get<std::size_t>();
        auto data = detail::parse_reals(layer["data"], name + " data");
        if (data.size() != rows * cols)
            throw ShapeMismatch(name + " has " + std::to_string(data.size()) + " entries, expected " +
                                std::to_string(rows * cols));
        net.layers.emplace_back(rows, cols, std::move(data));
    }
    if (doc.contains("biases") && !doc["biases"].is_null()) {
        if (!doc["biases"].is_array()) throw ParseError("'biases' must be an array of arrays");
        std::size_t b = 0;
        for (const auto& bias : doc["biases"])
            net.biases.push_back(detail::parse_reals(bias, "bias " + std::to_string(++b)));
    }
    if (doc.contains("meta")) {
        if (!doc["meta"].is_object()) throw ParseError("'meta' must be an object");
        net.meta = doc["meta"];
    }
    net.validate();
    return net;
}

inline NetworkSpec load_network(const std::string& path) { return parse_network(fmt::read_file(path)); }

inline std::string serialize_network(const NetworkSpec& net) {
    std::string out = "{\"format\":\"";
    out += kModelFormat;
    out += "\",\"layers\":[";
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& m = net.layers[l];
        if (l) out += ",\n";
        out += "{\"rows\":" + std::to_string(m.rows) + ",\"cols\":" + std::to_string(m.cols) + ",\"data\":";
        detail::append_reals(out, m.data);
        out.push_back('}');
    }
    out += "]";
    if (!net.biases.empty()) {
        out += ",\n\"biases\":[";
        for (std::size_t l = 0; l < net.biases.size(); ++l) {
            if (l) out.push_back(',');
            detail::append_reals(out, net.biases[l]);
        }
        out += "]";
    }
    out += ",\n\"meta\":" + net.meta.dump() + "}\n";
    return out;
}

inline void save_network(const NetworkSpec& net, const std::string& path) {
    net.validate();
    fmt::write_file(path, serialize_network(net));
}

// ---------------------------------------------------------------------------
// Convolution flattening

/// Kernel tensor laid out as [out_channel][in_channel][row][col].
struct ConvKernel {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    double at(std::size_t o, std::size_t c, std::size_t y, std::size_t x) const {
        return data[((o * in_channels + c) * height + y) * width + x];
    }
};

struct ImageShape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const noexcept { return channels * height * width; }
};

struct ConvGeometry {
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t dilation = 1;
};

/// Output spatial shape of a valid (unpadded) convolution.
inline ImageShape conv_output_shape(const ConvKernel& k, const ImageShape& in, std::size_t stride) {
    return {k.out_channels, (in.height - k.height) / stride + 1, (in.width - k.width) / stride + 1};
}

/// Dense matrix M with flatten(x) * M == flatten(conv(x)), rows indexed by
/// (channel, row, col) of the input and columns by (channel, row, col) of the
/// output. Convolution is cross-correlation, as in common DL frameworks.
inline WeightMatrix flatten_conv(const ConvKernel& kernel, const ImageShape& input, ConvGeometry geom = {}) {
    if (geom.padding != 0) throw InvalidArgument("flatten_conv supports padding = 0 only");
    if (geom.dilation != 1) throw InvalidArgument("flatten_conv supports dilation = 1 only");
    if (geom.stride == 0) throw InvalidArgument("stride must be positive");
    if (kernel.data.size() != kernel.out_channels * kernel.in_channels * kernel.height * kernel.width)
        throw ShapeMismatch("kernel data length does not match its shape");
    if (kernel.in_channels != input.channels)
        throw ShapeMismatch("kernel expects " + std::to_string(kernel.in_channels) + " input channels, input has " +
                            std::to_string(input.channels));
    if (kernel.height == 0 || kernel.width == 0 || kernel.out_channels == 0)
        throw InvalidArgument("kernel has an empty dimension");
    if (kernel.height > input.height || kernel.width > input.width)
        throw InvalidArgument("kernel larger than input");

    const ImageShape out = conv_output_shape(kernel, input, geom.stride);
    WeightMatrix m(input.size(), out.size());
    for (std::size_t o = 0; o < out.channels; ++o)
        for (std::size_t i = 0; i < out.height; ++i)
            for (std::size_t j = 0; j < out.width; ++j) {
                const std::size_t col = (o * out.height + i) * out.width + j;
                for (std::size_t c = 0; c < input.channels; ++c)
                    for (std::size_t ky = 0; ky < kernel.height; ++ky)
                        for (std::size_t kx = 0; kx < kernel.width; ++kx) {
                            const std::size_t y = i * geom.stride + ky;
                            const std::size_t x = j * geom.stride + kx;
                            const std::size_t row = (c * input.height + y) * input.width + x;
                            m.at(row, col) = kernel.at(o, c, ky, kx);
                        }
            }
    return m;
}

// ---------------------------------------------------------------------------
// Activations

/// Pre- and post-ReLU values of every layer for a single input. `pre[l-1]`
/// holds z^l. The network output is the last pre-activation vector (the
/// output head is linear); `post` is ReLU(pre) at every layer, which is the
/// activation pattern used for local detection.
struct ActivationTrace {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;

    const std::vector<double>& output() const { return pre.back(); }
    friend bool operator==(const ActivationTrace&, const ActivationTrace&) = default;
};

inline ActivationTrace forward_activations(const NetworkSpec& net, std::span<const double> x) {
    if (net.layers.empty()) throw ShapeMismatch("network has no layers");
    if (x.size() != net.input_dim())
        throw ShapeMismatch("sample has " + std::to_string(x.size()) + " features, network expects " +
                            std::to_string(net.input_dim()));
    ActivationTrace trace;
    trace.input.assign(x.begin(), x.end());
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& w = net.layers[l];
        std::vector<double> z = net.has_biases() ? net.biases[l] : std::vector<double>(w.cols, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double a = cur[i];
            if (a == 0.0) continue;
            const double* row = &w.data[i * w.cols];
            for (std::size_t j = 0; j < w.cols; ++j) z[j] += a * row[j];
        }
        std::vector<double> h(z.size());
        std::transform(z.begin(), z.end(), h.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
        trace.pre.push_back(std::move(z));
        trace.post.push_back(h);
        cur = std::move(h);
    }
    return trace;
}

/// Network output (linear head) for one sample.
inline std::vector<double> predict(const NetworkSpec& net, std::span<const double> x) {
    return forward_activations(net, x).output();
}

/// Nonnegative per-sample edge strengths |W^(l)_ij| * ReLU(z^{l-1}_i), with
/// z^0 the raw input. Not normalized; the filtration divides by the maximum.
struct LocalNetworkSpec {
    std::vector<WeightMatrix> layers;

    NetworkSpec as_network() const {
        NetworkSpec net;
        net.layers = layers;
        return net;
    }
};

inline LocalNetworkSpec local_weights(const NetworkSpec& net, const ActivationTrace& trace) {
    if (trace.pre.size() != net.layers.size() || trace.input.size() != net.input_dim())
        throw ShapeMismatch("activation trace does not match the network");
    LocalNetworkSpec local;
    local.layers.reserve(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& w = net.layers[l];
        const std::vector<double>& source = l == 0 ? trace.input : trace.pre[l - 1];
        if (source.size() != w.rows) throw ShapeMismatch("activation trace does not match the network");
        WeightMatrix m(w.rows, w.cols);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double gate = source[i] > 0.0 ? source[i] : 0.0;
            if (gate == 0.0) continue;
            for (std::size_t j = 0; j < w.cols; ++j) m.at(i, j) = std::abs(w.at(i, j)) * gate;
        }
        local.layers.push_back(std::move(m));
    }
    return local;
}

}  // namespace pid
