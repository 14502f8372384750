#pragma once

// Persistence of feature-subset connectivity through a target layer, summed
// into a ledger of interaction candidates, plus the views derived from a
// ledger (ranking, pairwise matrix, saliency) and the perturbation check.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pid/error.hpp"
#include "pid/filtration.hpp"
#include "pid/model_io.hpp"

namespace pid {

using FeatureSet = std::vector<std::uint32_t>;

/// Sorted set of input feature indices.
struct InteractionCandidate {
    FeatureSet features;

    std::size_t order() const noexcept { return features.size(); }
    bool contains(std::uint32_t i) const { return std::binary_search(features.begin(), features.end(), i); }

    auto operator<=>(const InteractionCandidate&) const = default;
};

enum class TerminalDeath {
    last_threshold,  // the last alive candidate dies at the smallest retained threshold
    zero,            // ... or at 0
};

struct DetectOptions {
    std::size_t layer = 1;
    double p = 2.0;
    TerminalDeath terminal_death = TerminalDeath::last_threshold;
    /// Keep |I| = 1 entries in the ledger (main-effect diagnostics).
    bool include_singletons = false;
};

/// One born candidate of a neuron's chain; lifetime is birth - death.
struct ChainLink {
    FeatureSet features;
    double birth = 0.0;
    double death = 0.0;
};

/// Sweep state of one unit r at the target layer.
struct NeuronState {
    std::size_t neuron = 0;
    /// (feature, threshold at which it first reached r), in join order.
    std::vector<std::pair<std::uint32_t, double>> joined;
    std::optional<double> output_connected_at;
    /// Birth of the currently alive candidate. After the sweep it still names
    /// the final candidate, whose terminal death is recorded in `chain`.
    std::optional<double> alive_birth;
    FeatureSet alive;
    /// Every candidate born at this unit, in birth order. Each is a strict
    /// superset of the previous one.
    std::vector<ChainLink> chain;
};

struct PersistenceLedger {
    std::map<InteractionCandidate, double> entries;
    double p = 2.0;
    std::size_t layer = 1;
    double eta = 0.0;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }
    double strength(const FeatureSet& features) const {
        auto it = entries.find(InteractionCandidate{features});
        return it == entries.end() ? 0.0 : it->second;
    }
};

namespace detail {

inline double persistence_power(double lifetime, double p) {
    const double a = std::abs(lifetime);
    if (p == 1.0) return a;
    if (p == 2.0) return a * a;
    return std::pow(a, p);
}

inline void check_detect_options(const Filtration& f, const DetectOptions& opt) {
    if (f.empty()) throw InvalidArgument("empty filtration: no edge survives pruning");
    check_target_layer(f, opt.layer);
    if (!(opt.p >= 1.0) || !std::isfinite(opt.p)) throw InvalidArgument("norm exponent p must be >= 1");
}

}  // namespace detail

/// Runs the descending sweep and returns the per-unit chains of the target layer.
///
/// For each unit r: features reaching r accumulate as thresholds drop. The
/// current feature set is born when r first reaches an output. While r is
/// output-connected, any threshold at which new features arrive kills the
/// alive candidate and gives birth to the enlarged set; features arriving
/// together are absorbed as one event, so intermediate prefixes are never
/// born. The last alive candidate dies at the end of the sweep.
inline std::vector<NeuronState> trace_neurons(const Filtration& f, const DetectOptions& opt = {}) {
    detail::check_detect_options(f, opt);
    ReachabilityEngine engine(f, opt.layer);
    const std::size_t width = f.widths[opt.layer];
    std::vector<NeuronState> states(width);
    std::vector<Bitset> known(width, Bitset(f.input_dim()));
    for (std::size_t r = 0; r < width; ++r) states[r].neuron = r;

    std::vector<std::uint32_t> order;
    while (engine.step()) {
        const double lambda = engine.lambda();
        order.assign(engine.touched().begin(), engine.touched().end());
        std::sort(order.begin(), order.end());
        for (auto r : order) {
            NeuronState& st = states[r];
            const Bitset& inputs = engine.inputs_of(r);
            const Bitset fresh = inputs.minus(known[r]);
            const bool grew = fresh.any();
            if (grew) {
                fresh.for_each([&](std::size_t i) { st.joined.emplace_back(static_cast<std::uint32_t>(i), lambda); });
                known[r] = inputs;
            }
            const bool output_now = engine.outputs_of(r).any();
            if (!st.output_connected_at) {
                if (!output_now) continue;
                st.output_connected_at = lambda;
                if (!st.joined.empty()) {
                    st.alive = known[r].indices();
                    st.alive_birth = lambda;
                }
            } else if (grew) {
                if (st.alive_birth) st.chain.push_back({st.alive, *st.alive_birth, lambda});
                st.alive = known[r].indices();
                st.alive_birth = lambda;
            }
        }
    }
    const double end = opt.terminal_death == TerminalDeath::zero ? 0.0 : f.thresholds.back();
    for (auto& st : states) {
        if (st.alive_birth) st.chain.push_back({st.alive, *st.alive_birth, end});
    }
    return states;
}

/// Sums |birth - death|^p over all units per candidate. Per-candidate
/// contributions are added in ascending order so the result does not depend
/// on unit order.
inline PersistenceLedger ledger_from_chains(const std::vector<NeuronState>& states, const Filtration& f,
                                            const DetectOptions& opt) {
    std::map<InteractionCandidate, std::vector<double>> parts;
    for (const auto& st : states)
        for (const auto& link : st.chain) {
            if (link.features.size() < 2 && !opt.include_singletons) continue;
            const double c = detail::persistence_power(link.birth - link.death, opt.p);
            if (c > 0.0) parts[InteractionCandidate{link.features}].push_back(c);
        }
    PersistenceLedger ledger;
    ledger.p = opt.p;
    ledger.layer = opt.layer;
    ledger.eta = f.eta;
    for (auto& [cand, values] : parts) {
        std::sort(values.begin(), values.end());
        double sum = 0.0;
        for (double v : values) sum += v;
        ledger.entries.emplace_hint(ledger.entries.end(), cand, sum);
    }
    return ledger;
}

inline PersistenceLedger detect(const Filtration& f, const DetectOptions& opt = {}) {
    return ledger_from_chains(trace_neurons(f, opt), f, opt);
}

inline PersistenceLedger detect(const NetworkSpec& net, std::size_t layer = 1, double p = 2.0, double eta = 0.0) {
    DetectOptions opt;
    opt.layer = layer;
    opt.p = p;
    return detect(build_filtration(net, eta), opt);
}

// ---------------------------------------------------------------------------

struct RankedCandidate {
    InteractionCandidate candidate;
    double strength = 0.0;

    friend bool operator==(const RankedCandidate&, const RankedCandidate&) = default;
};

/// Orders by strength descending, then smaller sets first, then lexicographically.
inline bool ranks_before(const RankedCandidate& a, const RankedCandidate& b) {
    if (a.strength != b.strength) return a.strength > b.strength;
    if (a.candidate.order() != b.candidate.order()) return a.candidate.order() < b.candidate.order();
    return a.candidate.features < b.candidate.features;
}

inline std::vector<RankedCandidate> rank(const PersistenceLedger& ledger) {
    std::vector<RankedCandidate> out;
    out.reserve(ledger.size());
    for (const auto& [cand, strength] : ledger.entries) out.push_back({cand, strength});
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
}

/// Entry (i, j) sums the strengths of every candidate containing both i and j.
inline Matrix pairwise_strengths(const PersistenceLedger& ledger, std::size_t d) {
    Matrix m(d, d);
    for (const auto& [cand, strength] : ledger.entries) {
        const auto& fs = cand.features;
        if (!fs.empty() && fs.back() >= d)
            throw ShapeMismatch("candidate feature " + std::to_string(fs.back()) + " outside d = " + std::to_string(d));
        for (std::size_t a = 0; a < fs.size(); ++a)
            for (std::size_t b = a + 1; b < fs.size(); ++b) {
                m.at(fs[a], fs[b]) += strength;
                m.at(fs[b], fs[a]) += strength;
            }
    }
    return m;
}

/// Per-pixel sum of the strengths of candidates containing the pixel, laid
/// out as a height x width grid (row-major pixel order).
inline Matrix saliency(const PersistenceLedger& ledger, std::size_t height, std::size_t width) {
    Matrix grid(height, width);
    const std::size_t d = height * width;
    for (const auto& [cand, strength] : ledger.entries)
        for (auto i : cand.features) {
            if (i >= d)
                throw ShapeMismatch("candidate feature " + std::to_string(i) + " does not fit a " +
                                    std::to_string(height) + "x" + std::to_string(width) + " grid");
            grid.data[i] += strength;
        }
    return grid;
}

/// Scales a nonnegative grid so its maximum is 1 (all-zero grids stay zero).
inline Matrix normalize_max(Matrix m) {
    double top = 0.0;
    for (double v : m.data) top = std::max(top, v);
    if (top > 0.0)
        for (double& v : m.data) v /= top;
    return m;
}

// ---------------------------------------------------------------------------

struct StabilityRow {
    InteractionCandidate candidate;
    double rho_f = 0.0;
    double rho_g = 0.0;
    double diff = 0.0;
};

struct StabilityReport {
    double delta = 0.0;
    double p = 2.0;
    std::size_t layer = 1;
    std::size_t units = 0;  // N_l
    double bound = 0.0;     // 6 p N_l delta
    std::vector<StabilityRow> common;
    std::vector<InteractionCandidate> only_in_f;
    std::vector<InteractionCandidate> only_in_g;

    std::size_t violations() const {
        return static_cast<std::size_t>(
            std::count_if(common.begin(), common.end(), [&](const StabilityRow& r) { return r.diff > bound; }));
    }
    double max_diff() const {
        double m = 0.0;
        for (const auto& r : common) m = std::max(m, r.diff);
        return m;
    }
    double mean_diff() const {
        if (common.empty()) return 0.0;
        double s = 0.0;
        for (const auto& r : common) s += r.diff;
        return s / static_cast<double>(common.size());
    }
};

inline void check_same_architecture(const NetworkSpec& f, const NetworkSpec& g) {
    if (f.widths() != g.widths()) throw ShapeMismatch("networks have different architectures");
}

/// Largest edge-wise change of the measuring function between two networks.
inline double perturbation_magnitude(const NetworkSpec& f, const NetworkSpec& g) {
    check_same_architecture(f, g);
    const auto pf = measuring_function(f);
    const auto pg = measuring_function(g);
    double delta = 0.0;
    for (std::size_t k = 0; k < pf.size(); ++k) delta = std::max(delta, std::abs(pf[k] - pg[k]));
    return delta;
}

inline StabilityReport stability_check(const NetworkSpec& net_f, const NetworkSpec& net_g, std::size_t layer = 1,
                                       double p = 2.0) {
    check_same_architecture(net_f, net_g);
    StabilityReport rep;
    rep.p = p;
    rep.layer = layer;
    rep.delta = perturbation_magnitude(net_f, net_g);
    const auto lf = detect(net_f, layer, p);
    const auto lg = detect(net_g, layer, p);
    rep.units = net_f.width(layer);
    rep.bound = 6.0 * p * static_cast<double>(rep.units) * rep.delta;
    for (const auto& [cand, rho] : lf.entries) {
        auto it = lg.entries.find(cand);
        if (it == lg.entries.end()) {
            rep.only_in_f.push_back(cand);
        } else {
            rep.common.push_back({cand, rho, it->second, std::abs(rho - it->second)});
        }
    }
    for (const auto& [cand, rho] : lg.entries)
        if (!lf.entries.contains(cand)) rep.only_in_g.push_back(cand);
    return rep;
}

}  // namespace pid
