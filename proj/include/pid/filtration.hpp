#pragma once

// Size pair (G, phi) of a network, its descending threshold sequence, and
// boolean reachability between a target layer and the inputs/outputs at any
// threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pid/bitset.hpp"
#include "pid/error.hpp"
#include "pid/model_io.hpp"

namespace pid {

struct Edge {
    std::uint32_t layer = 0;   // 1-based: connects layer-1 to layer
    std::uint32_t source = 0;  // unit index in layer-1
    std::uint32_t target = 0;  // unit index in layer
    double phi = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Normalized edge strengths |W| / max|W| in layer-major (layer, row, col)
/// order. Values are rounded to single precision: rescaling a network by any
/// c > 0 perturbs the double quotient by a couple of ulps at most, and the
/// rounding absorbs that so rescaled networks share one filtration.
inline std::vector<double> measuring_function(const NetworkSpec& net) {
    double w_max = 0.0;
    for (const auto& m : net.layers)
        for (double v : m.data) w_max = std::max(w_max, std::abs(v));
    if (!(w_max > 0.0)) throw InvalidArgument("all-zero network: no edge has a nonzero weight");
    std::vector<double> phi;
    phi.reserve(net.edge_count());
    for (const auto& m : net.layers)
        for (double v : m.data) phi.push_back(static_cast<double>(static_cast<float>(std::abs(v) / w_max)));
    return phi;
}

class Filtration {
public:
    /// Units per layer, p_0 = d through p_L.
    std::vector<std::size_t> widths;
    /// Retained edges, by descending phi; ties ordered by (layer, source, target).
    std::vector<Edge> edges;
    /// Distinct phi values of retained edges, strictly descending.
    std::vector<double> thresholds;
    /// Edges entering at thresholds[t] are edges[group_begin[t] .. group_begin[t+1]).
    std::vector<std::size_t> group_begin;
    double w_max = 0.0;
    double eta = 0.0;

    std::size_t depth() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
    std::size_t input_dim() const noexcept { return widths.empty() ? 0 : widths.front(); }
    std::size_t output_dim() const noexcept { return widths.empty() ? 0 : widths.back(); }
    bool empty() const noexcept { return thresholds.empty(); }

    std::span<const Edge> group(std::size_t t) const {
        return std::span<const Edge>(edges).subspan(group_begin[t], group_begin[t + 1] - group_begin[t]);
    }

    /// Number of thresholds >= lambda, i.e. how many groups make up G^lambda.
    std::size_t groups_at_or_above(double lambda) const {
        return static_cast<std::size_t>(
            std::partition_point(thresholds.begin(), thresholds.end(), [&](double t) { return t >= lambda; }) -
            thresholds.begin());
    }

    friend bool operator==(const Filtration&, const Filtration&) = default;
};

/// Builds the filtration; edges with phi < eta are pruned.
inline Filtration build_filtration(const NetworkSpec& net, double eta = 0.0) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("eta must lie in [0, 1]");
    net.validate();
    const std::vector<double> phi = measuring_function(net);

    Filtration f;
    f.widths = net.widths();
    f.eta = eta;
    for (const auto& m : net.layers)
        for (double v : m.data) f.w_max = std::max(f.w_max, std::abs(v));

    std::size_t k = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& m = net.layers[l];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j, ++k)
                if (phi[k] >= eta)
                    f.edges.push_back({static_cast<std::uint32_t>(l + 1), static_cast<std::uint32_t>(i),
                                       static_cast<std::uint32_t>(j), phi[k]});
    }
    // Edges were appended in (layer, source, target) order, so a stable sort
    // keeps that order within ties.
    std::stable_sort(f.edges.begin(), f.edges.end(), [](const Edge& a, const Edge& b) { return a.phi > b.phi; });
    for (std::size_t e = 0; e < f.edges.size(); ++e) {
        if (e == 0 || f.edges[e].phi != f.edges[e - 1].phi) {
            f.thresholds.push_back(f.edges[e].phi);
            f.group_begin.push_back(e);
        }
    }
    f.group_begin.push_back(f.edges.size());
    return f;
}

// ---------------------------------------------------------------------------

/// Row-major boolean matrix.
struct BoolMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> data;

    BoolMatrix() = default;
    BoolMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

    bool at(std::size_t i, std::size_t j) const { return data[i * cols + j] != 0; }
    void set(std::size_t i, std::size_t j, bool v = true) { data[i * cols + j] = v ? 1 : 0; }

    friend bool operator==(const BoolMatrix&, const BoolMatrix&) = default;
};

/// Reachability through a target layer l at one threshold.
/// up(o, r): output unit o is reachable from unit r of layer l.
/// down(r, i): unit r of layer l is reachable from input feature i.
struct ReachabilityView {
    std::size_t layer = 0;
    double lambda = 0.0;
    BoolMatrix up;
    BoolMatrix down;

    friend bool operator==(const ReachabilityView&, const ReachabilityView&) = default;
};

inline void check_target_layer(const Filtration& f, std::size_t layer) {
    if (layer < 1 || layer > f.depth())
        throw InvalidArgument("target layer " + std::to_string(layer) + " outside [1, " + std::to_string(f.depth()) +
                              "]");
}

/// Walks the thresholds of a filtration in descending order, keeping, for
/// every unit, the set of input features that reach it (layers <= l) and the
/// set of output units it reaches (layers >= l). Each step adds one threshold
/// group and propagates only from the endpoints of the new edges; sets only
/// grow, so the state always equals a from-scratch recomputation.
class ReachabilityEngine {
public:
    ReachabilityEngine(const Filtration& f, std::size_t target_layer) : f_(&f), layer_(target_layer) {
        check_target_layer(f, target_layer);
        const std::size_t depth = f.depth();
        offset_.resize(depth + 2, 0);
        for (std::size_t l = 0; l <= depth; ++l) offset_[l + 1] = offset_[l] + f.widths[l];
        const std::size_t nodes = offset_.back();
        adj_.resize(nodes);
        sets_.resize(nodes);
        const std::size_t d = f.input_dim();
        const std::size_t outputs = f.output_dim();
        for (std::size_t l = 0; l <= depth; ++l) {
            for (std::size_t u = 0; u < f.widths[l]; ++u) {
                const std::size_t id = offset_[l] + u;
                if (l < layer_) {
                    sets_[id] = Bitset(d);
                } else if (l > layer_) {
                    sets_[id] = Bitset(outputs);
                } else {
                    sets_[id] = Bitset(d);
                }
            }
        }
        for (std::size_t i = 0; i < d; ++i) sets_[offset_[0] + i].set(i);
        up_.assign(f.widths[layer_], Bitset(outputs));
        if (layer_ == depth) {
            for (std::size_t r = 0; r < outputs; ++r) up_[r].set(r);
        } else {
            for (std::size_t o = 0; o < outputs; ++o) sets_[offset_[depth] + o].set(o);
        }
        touched_flag_.assign(f.widths[layer_], 0);
    }

    std::size_t target_layer() const noexcept { return layer_; }
    /// Number of threshold groups already merged in.
    std::size_t position() const noexcept { return next_; }
    bool done() const noexcept { return next_ >= f_->thresholds.size(); }
    /// Threshold of the most recent step (+inf before the first one).
    double lambda() const {
        return next_ == 0 ? std::numeric_limits<double>::infinity() : f_->thresholds[next_ - 1];
    }

    /// Merges the next threshold group. Returns false once exhausted.
    bool step() {
        for (auto r : touched_) touched_flag_[r] = 0;
        touched_.clear();
        if (done()) return false;
        for (const Edge& e : f_->group(next_)) add_edge(e);
        ++next_;
        return true;
    }

    /// Advance until every threshold >= lambda has been merged.
    void advance_to(double lambda) {
        const std::size_t target = f_->groups_at_or_above(lambda);
        while (next_ < target) step();
    }

    /// Target-layer units whose input set or output set changed in the last step.
    const std::vector<std::uint32_t>& touched() const noexcept { return touched_; }

    const Bitset& inputs_of(std::size_t r) const { return sets_[offset_[layer_] + r]; }
    const Bitset& outputs_of(std::size_t r) const { return up_[r]; }

    ReachabilityView view() const {
        ReachabilityView v;
        v.layer = layer_;
        v.lambda = lambda();
        const std::size_t width = f_->widths[layer_];
        v.up = BoolMatrix(f_->output_dim(), width);
        v.down = BoolMatrix(width, f_->input_dim());
        for (std::size_t r = 0; r < width; ++r) {
            up_[r].for_each([&](std::size_t o) { v.up.set(o, r); });
            inputs_of(r).for_each([&](std::size_t i) { v.down.set(r, i); });
        }
        return v;
    }

private:
    std::size_t layer_of(std::size_t id) const {
        return static_cast<std::size_t>(std::upper_bound(offset_.begin(), offset_.end(), id) - offset_.begin()) - 1;
    }

    void touch(std::size_t r) {
        if (!touched_flag_[r]) {
            touched_flag_[r] = 1;
            touched_.push_back(static_cast<std::uint32_t>(r));
        }
    }

    void add_edge(const Edge& e) {
        const std::size_t u = offset_[e.layer - 1] + e.source;
        const std::size_t v = offset_[e.layer] + e.target;
        if (e.layer <= layer_) {
            // Feature sets flow forward from u towards the target layer.
            adj_[u].push_back(static_cast<std::uint32_t>(v));
            if (sets_[v].merge(sets_[u])) spread_down(v);
        } else {
            // Output sets flow backward from v towards the target layer.
            adj_[v].push_back(static_cast<std::uint32_t>(u));
            if (e.layer - 1 == layer_) {
                if (up_[e.source].merge(sets_[v])) touch(e.source);
            } else if (sets_[u].merge(sets_[v])) {
                spread_up(u);
            }
        }
    }

    void spread_down(std::size_t start) {
        queue_.clear();
        queue_.push_back(start);
        while (!queue_.empty()) {
            const std::size_t x = queue_.front();
            queue_.pop_front();
            const std::size_t lx = layer_of(x);
            if (lx == layer_) {
                touch(x - offset_[layer_]);
                continue;
            }
            for (auto y : adj_[x])
                if (sets_[y].merge(sets_[x])) queue_.push_back(y);
        }
    }

    void spread_up(std::size_t start) {
        queue_.clear();
        queue_.push_back(start);
        while (!queue_.empty()) {
            const std::size_t x = queue_.front();
            queue_.pop_front();
            const std::size_t lx = layer_of(x);
            for (auto w : adj_[x]) {
                if (lx - 1 == layer_) {
                    const std::size_t r = w - offset_[layer_];
                    if (up_[r].merge(sets_[x])) touch(r);
                } else if (sets_[w].merge(sets_[x])) {
                    queue_.push_back(w);
                }
            }
        }
    }

    const Filtration* f_;
    std::size_t layer_;
    std::size_t next_ = 0;
    std::vector<std::size_t> offset_;
    // Active adjacency: forward (out-edges) for layers < target, backward
    // (in-edges) for layers > target.
    std::vector<std::vector<std::uint32_t>> adj_;
    // Input-feature sets for layers <= target, output sets for layers > target.
    std::vector<Bitset> sets_;
    // Output sets of the target-layer units.
    std::vector<Bitset> up_;
    std::vector<std::uint32_t> touched_;
    std::vector<std::uint8_t> touched_flag_;
    std::deque<std::size_t> queue_;
};

enum class ReachabilityMode { incremental, recompute };

namespace detail {

// Layer mask M_(k) of edges with phi >= lambda: p_{k-1} x p_k.
inline BoolMatrix layer_mask(const Filtration& f, std::size_t k, double lambda) {
    BoolMatrix m(f.widths[k - 1], f.widths[k]);
    for (const Edge& e : f.edges) {
        if (e.phi < lambda) break;
        if (e.layer == k) m.set(e.source, e.target);
    }
    return m;
}

// Boolean product a * b over {0,1}.
inline BoolMatrix bool_product(const BoolMatrix& a, const BoolMatrix& b) {
    BoolMatrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            if (!a.at(i, k)) continue;
            for (std::size_t j = 0; j < b.cols; ++j)
                if (b.at(k, j)) out.set(i, j);
        }
    return out;
}

inline BoolMatrix transpose(const BoolMatrix& m) {
    BoolMatrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j)
            if (m.at(i, j)) t.set(j, i);
    return t;
}

inline BoolMatrix identity(std::size_t n) {
    BoolMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i);
    return m;
}

}  // namespace detail

/// up = M_(L)^T ... M_(l+1)^T and down = M_(l)^T ... M_(1)^T at threshold lambda.
inline ReachabilityView masks_at(const Filtration& f, double lambda, std::size_t layer,
                                 ReachabilityMode mode = ReachabilityMode::incremental) {
    check_target_layer(f, layer);
    if (mode == ReachabilityMode::incremental) {
        ReachabilityEngine engine(f, layer);
        engine.advance_to(lambda);
        ReachabilityView v = engine.view();
        v.lambda = lambda;
        return v;
    }
    ReachabilityView v;
    v.layer = layer;
    v.lambda = lambda;
    BoolMatrix down = detail::identity(f.input_dim());
    for (std::size_t k = 1; k <= layer; ++k)
        down = detail::bool_product(detail::transpose(detail::layer_mask(f, k, lambda)), down);
    BoolMatrix up = detail::identity(f.output_dim());
    for (std::size_t k = f.depth(); k > layer; --k)
        up = detail::bool_product(up, detail::transpose(detail::layer_mask(f, k, lambda)));
    v.up = std::move(up);
    v.down = std::move(down);
    return v;
}

/// True when output unit r reaches exactly the features in `features` through
/// edges with phi >= lambda (row r of the aggregated mask is nonzero on the
/// set and zero elsewhere).
inline bool connected(const Filtration& f, double lambda, std::span<const std::uint32_t> features, std::size_t r) {
    if (r >= f.output_dim()) throw InvalidArgument("output unit " + std::to_string(r) + " out of range");
    const std::size_t d = f.input_dim();
    std::vector<std::uint8_t> wanted(d, 0);
    for (auto i : features) {
        if (i >= d) return false;
        wanted[i] = 1;
    }
    const ReachabilityView v = masks_at(f, lambda, f.depth());
    for (std::size_t i = 0; i < d; ++i)
        if (v.down.at(r, i) != (wanted[i] != 0)) return false;
    return true;
}

}  // namespace pid
