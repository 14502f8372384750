#pragma once

// Reference implementations used only by tests. They favour obviousness
// over speed and share no code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "pid/pid.hpp"

namespace oracle {

using Set = std::set<std::uint32_t>;

struct PlainEdge {
    std::size_t layer, source, target;  // layer is 1-based
    double phi;
};

inline std::vector<PlainEdge> plain_edges(const pid::NetworkSpec& net, double eta = 0.0) {
    double w_max = 0.0;
    for (const auto& m : net.layers)
        for (double v : m.data) w_max = std::max(w_max, std::abs(v));
    std::vector<PlainEdge> out;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& m = net.layers[l];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j) {
                const double phi = double(float(std::abs(m.at(i, j)) / w_max));
                if (phi >= eta) out.push_back({l + 1, i, j, phi});
            }
    }
    return out;
}

inline std::vector<double> thresholds(const std::vector<PlainEdge>& edges) {
    std::set<double> s;
    for (const auto& e : edges) s.insert(e.phi);
    return {s.rbegin(), s.rend()};
}

// Features (layer 0 units) that reach unit r of layer `layer` using edges with phi >= lambda.
inline Set inputs_reaching(const std::vector<PlainEdge>& edges, std::size_t layer, std::size_t r, double lambda) {
    Set frontier{static_cast<std::uint32_t>(r)};
    for (std::size_t l = layer; l >= 1; --l) {
        Set prev;
        for (const auto& e : edges)
            if (e.layer == l && e.phi >= lambda && frontier.contains(static_cast<std::uint32_t>(e.target)))
                prev.insert(static_cast<std::uint32_t>(e.source));
        frontier = std::move(prev);
    }
    return frontier;
}

// Output units reachable from unit r of layer `layer`.
inline Set outputs_reached(const std::vector<PlainEdge>& edges, std::size_t depth, std::size_t layer, std::size_t r,
                           double lambda) {
    Set frontier{static_cast<std::uint32_t>(r)};
    for (std::size_t l = layer + 1; l <= depth; ++l) {
        Set next;
        for (const auto& e : edges)
            if (e.layer == l && e.phi >= lambda && frontier.contains(static_cast<std::uint32_t>(e.source)))
                next.insert(static_cast<std::uint32_t>(e.target));
        frontier = std::move(next);
    }
    return frontier;
}

// Graph BFS over the whole layered DAG: reach[node] for every node from one start node.
struct Dag {
    std::vector<std::size_t> offset;
    std::vector<std::vector<std::size_t>> fwd;

    Dag(const std::vector<std::size_t>& widths, const std::vector<PlainEdge>& edges, double lambda) {
        offset.assign(widths.size() + 1, 0);
        for (std::size_t l = 0; l < widths.size(); ++l) offset[l + 1] = offset[l] + widths[l];
        fwd.resize(offset.back());
        for (const auto& e : edges)
            if (e.phi >= lambda) fwd[offset[e.layer - 1] + e.source].push_back(offset[e.layer] + e.target);
    }

    std::vector<bool> bfs(std::size_t start) const {
        std::vector<bool> seen(fwd.size(), false);
        std::queue<std::size_t> q;
        q.push(start);
        seen[start] = true;
        while (!q.empty()) {
            auto u = q.front();
            q.pop();
            for (auto v : fwd[u])
                if (!seen[v]) {
                    seen[v] = true;
                    q.push(v);
                }
        }
        return seen;
    }
};

struct Link {
    Set features;
    double birth, death;
};

// Recomputes reachability from scratch at every threshold and applies the
// birth/death rules per target-layer unit.
inline std::vector<std::vector<Link>> naive_chains(const pid::NetworkSpec& net, std::size_t layer,
                                                   bool death_at_zero = false, double eta = 0.0) {
    const auto edges = plain_edges(net, eta);
    const auto ts = thresholds(edges);
    const std::size_t depth = net.layers.size();
    const std::size_t width = net.width(layer);
    std::vector<std::vector<Link>> chains(width);
    for (std::size_t r = 0; r < width; ++r) {
        Set prev;
        bool connected = false;
        bool alive = false;
        Set alive_set;
        double birth = 0.0;
        for (double lambda : ts) {
            const Set in = inputs_reaching(edges, layer, r, lambda);
            const bool out = !outputs_reached(edges, depth, layer, r, lambda).empty();
            if (!connected) {
                if (out) {
                    connected = true;
                    if (!in.empty()) {
                        alive = true;
                        alive_set = in;
                        birth = lambda;
                    }
                }
            } else if (in != prev) {
                if (alive) chains[r].push_back({alive_set, birth, lambda});
                alive = true;
                alive_set = in;
                birth = lambda;
            }
            prev = in;
        }
        if (alive) chains[r].push_back({alive_set, birth, death_at_zero || ts.empty() ? 0.0 : ts.back()});
    }
    return chains;
}

inline std::map<std::vector<std::uint32_t>, double> naive_ledger(const pid::NetworkSpec& net, std::size_t layer,
                                                                 double p = 2.0, bool singletons = false,
                                                                 bool death_at_zero = false, double eta = 0.0) {
    std::map<std::vector<std::uint32_t>, std::vector<double>> parts;
    for (const auto& chain : naive_chains(net, layer, death_at_zero, eta))
        for (const auto& link : chain) {
            if (link.features.size() < 2 && !singletons) continue;
            const double c = std::pow(std::abs(link.birth - link.death), p);
            if (c > 0.0) parts[{link.features.begin(), link.features.end()}].push_back(c);
        }
    std::map<std::vector<std::uint32_t>, double> out;
    for (auto& [k, v] : parts) {
        std::sort(v.begin(), v.end());
        double s = 0.0;
        for (double x : v) s += x;
        out[k] = s;
    }
    return out;
}

inline std::map<std::vector<std::uint32_t>, double> as_map(const pid::PersistenceLedger& ledger) {
    std::map<std::vector<std::uint32_t>, double> out;
    for (const auto& [c, s] : ledger.entries) out[c.features] = s;
    return out;
}

// Direct valid cross-correlation, stride s: out[o][i][j] = sum_c,ky,kx k[o][c][ky][kx] * x[c][i*s+ky][j*s+kx].
inline std::vector<double> direct_conv(const pid::ConvKernel& k, const pid::ImageShape& in, const std::vector<double>& x,
                                       std::size_t stride) {
    const std::size_t ho = (in.height - k.height) / stride + 1;
    const std::size_t wo = (in.width - k.width) / stride + 1;
    std::vector<double> out(k.out_channels * ho * wo, 0.0);
    for (std::size_t o = 0; o < k.out_channels; ++o)
        for (std::size_t i = 0; i < ho; ++i)
            for (std::size_t j = 0; j < wo; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < k.in_channels; ++c)
                    for (std::size_t ky = 0; ky < k.height; ++ky)
                        for (std::size_t kx = 0; kx < k.width; ++kx)
                            s += k.at(o, c, ky, kx) * x[(c * in.height + i * stride + ky) * in.width + j * stride + kx];
                out[(o * ho + i) * wo + j] = s;
            }
    return out;
}

// Random dense network; `zero_prob` of the weights are exactly zero, and
// weights are drawn from a small integer grid when `grid` > 0 to force ties.
inline pid::NetworkSpec random_network(std::mt19937_64& rng, const std::vector<std::size_t>& widths,
                                       double zero_prob = 0.0, int grid = 0) {
    pid::NetworkSpec net;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> g(-grid, grid);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        pid::Matrix m(widths[l], widths[l + 1]);
        for (double& v : m.data) {
            if (coin(rng) < zero_prob) continue;
            v = grid > 0 ? double(g(rng)) : u(rng);
        }
        net.layers.push_back(std::move(m));
    }
    bool any = false;
    for (const auto& m : net.layers)
        for (double v : m.data) any = any || v != 0.0;
    if (!any) net.layers[0].data[0] = 1.0;
    return net;
}

inline std::vector<std::size_t> random_widths(std::mt19937_64& rng, std::size_t max_layers, std::size_t max_units) {
    std::uniform_int_distribution<std::size_t> nl(2, max_layers);
    std::uniform_int_distribution<std::size_t> nu(1, max_units);
    std::vector<std::size_t> w(nl(rng));
    for (auto& x : w) x = nu(rng);
    return w;
}

// 4-2-1 network of the worked birth/death example. Edge k of the sequence
// x1-h1, h1-y, x4-h2, x2-h1, x3-h2, h2-y, x3-h1, x2-h2, x4-h1, x1-h2 has
// weight w'_k = (16 - k) / 16, which is exact in single precision.
inline double worked_example_weight(int k) { return (16.0 - k) / 16.0; }

inline pid::NetworkSpec worked_example_network() {
    pid::NetworkSpec net;
    net.layers.emplace_back(4, 2);
    net.layers.emplace_back(2, 1);
    auto& W1 = net.layers[0];
    auto& W2 = net.layers[1];
    W1.at(0, 0) = worked_example_weight(0);
    W2.at(0, 0) = worked_example_weight(1);
    W1.at(3, 1) = worked_example_weight(2);
    W1.at(1, 0) = worked_example_weight(3);
    W1.at(2, 1) = worked_example_weight(4);
    W2.at(1, 0) = worked_example_weight(5);
    W1.at(2, 0) = worked_example_weight(6);
    W1.at(1, 1) = worked_example_weight(7);
    W1.at(3, 0) = worked_example_weight(8);
    W1.at(0, 1) = worked_example_weight(9);
    return net;
}

}  // namespace oracle
