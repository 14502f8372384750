#pragma once

// Synthetic data-generating functions with known interactions, ROC-AUC of
// pairwise strengths against the ground truth, the multi-trial experiment
// driver, and Cartesian-product feature crossing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pid/dataset.hpp"
#include "pid/detect.hpp"
#include "pid/error.hpp"
#include "pid/format.hpp"
#include "pid/trainer.hpp"

namespace pid {

inline constexpr int kSyntheticFunctions = 10;
inline constexpr std::size_t kSyntheticDim = 10;

inline void check_function_id(int fid) {
    if (fid < 1 || fid > kSyntheticFunctions)
        throw InvalidArgument("function id F" + std::to_string(fid) + " outside F1..F10");
}

/// Sampling range shared by all features of a function. F1 uses strictly
/// positive inputs so every square root, logarithm and quotient is defined.
inline std::pair<double, double> feature_range(int fid) {
    check_function_id(fid);
    return fid == 1 ? std::pair{0.05, 1.0} : std::pair{-1.0, 1.0};
}

/// Evaluates synthetic function F<fid> at a 10-dimensional point (features
/// are 0-indexed). Two terms differ from the literal table where a real
/// evaluation would be undefined on [-1, 1]: F2 takes sqrt(|x6| / (1+|x7|))
/// and F3/F4 raise |x2| rather than x2 to the fractional power 2|x3|. Neither
/// change alters which variables share a term.
inline double synthetic_value(int fid, std::span<const double> x) {
    check_function_id(fid);
    if (x.size() != kSyntheticDim) throw ShapeMismatch("synthetic functions take 10 features");
    using std::abs, std::sqrt, std::exp, std::log, std::sin, std::cos, std::pow;
    constexpr double pi = std::numbers::pi;
    switch (fid) {
        case 1:
            return pow(pi, x[0] * x[1]) * sqrt(2.0 * x[2]) - std::asin(x[3]) + log(x[2] + x[4]) -
                   (x[8] / x[9]) * sqrt(x[6] / x[7]) - x[1] * x[6];
        case 2:
            return pow(pi, x[0] * x[1]) * sqrt(2.0 * abs(x[2])) - std::asin(0.5 * x[3]) + log(abs(x[2] + x[4]) + 1.0) +
                   (x[8] / (1.0 + abs(x[9]))) * sqrt(abs(x[6]) / (1.0 + abs(x[7]))) - x[1] * x[6];
        case 3:
        case 4: {
            double y = exp(abs(x[0] - x[1])) + abs(x[1] * x[2]) - pow(abs(x[2]), 2.0 * abs(x[3])) +
                       log(x[3] * x[3] + x[4] * x[4] + x[6] * x[6] + x[7] * x[7]) + x[8] + 1.0 / (1.0 + x[9] * x[9]);
            if (fid == 4) y += x[0] * x[0] * x[3] * x[3];
            return y;
        }
        case 5:
            return 1.0 / (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) + sqrt(exp(x[3] + x[4])) + abs(x[5] + x[6]) +
                   x[7] * x[8] * x[9];
        case 6:
            return exp(abs(x[0] * x[1] + 1.0)) - exp(abs(x[2] + x[3]) + 1.0) + cos(x[4] + x[5] - x[7]) +
                   sqrt(x[7] * x[7] + x[8] * x[8] + x[9] * x[9]);
        case 7: {
            const double a = std::atan(x[0]) + std::atan(x[1]);
            const double prod = x[3] * x[4] * x[5] * x[6] * x[7];
            double sum = 0.0;
            for (double v : x) sum += v;
            return a * a + std::max(x[2] * x[3] + x[5], 0.0) - 1.0 / (1.0 + prod * prod) +
                   pow(abs(x[6]) / (1.0 + abs(x[8])), 5.0) + sum;
        }
        case 8:
            return x[0] * x[1] + pow(2.0, x[2] + x[4] + x[5]) + pow(2.0, x[2] + x[3] + x[4] + x[6]) +
                   sin(x[6] * sin(x[7] + x[8])) + std::acos(0.9 * x[9]);
        case 9:
            return std::tanh(x[0] * x[1] + x[2] * x[3]) * sqrt(abs(x[4])) + exp(x[4] + x[5]) +
                   log(x[5] * x[5] * x[6] * x[6] * x[7] * x[7] + 1.0) + x[8] * x[9] + 1.0 / (1.0 + abs(x[9]));
        default:
            return std::sinh(x[1] + x[2]) + std::acos(std::tanh(x[2] + x[4] + x[6])) + cos(x[3] + x[4]) +
                   1.0 / cos(x[6] * x[8]);
    }
}

/// Variable sets of the non-additive terms of F<fid>. Univariate terms and
/// plain sums of features are main effects and are left out.
inline std::vector<FeatureSet> interaction_terms(int fid) {
    check_function_id(fid);
    switch (fid) {
        case 1:
        case 2: return {{0, 1, 2}, {2, 4}, {6, 7, 8, 9}, {1, 6}};
        case 3: return {{0, 1}, {1, 2}, {2, 3}, {3, 4, 6, 7}};
        case 4: return {{0, 1}, {1, 2}, {2, 3}, {3, 4, 6, 7}, {0, 3}};
        case 5: return {{0, 1, 2}, {3, 4}, {5, 6}, {7, 8, 9}};
        case 6: return {{0, 1}, {2, 3}, {4, 5, 7}, {7, 8, 9}};
        case 7: return {{0, 1}, {2, 3, 5}, {3, 4, 5, 6, 7}, {6, 8}};
        case 8: return {{0, 1}, {2, 4, 5}, {2, 3, 4, 6}, {6, 7, 8}};
        case 9: return {{0, 1, 2, 3, 4}, {4, 5}, {5, 6, 7}, {8, 9}};
        default: return {{1, 2}, {2, 4, 6}, {3, 4}, {6, 8}};
    }
}

/// Draws n samples of F<fid>; identical (fid, n, seed) give identical data.
inline DatasetSpec gen_synthetic(int fid, std::size_t n, std::uint64_t seed) {
    const auto [lo, hi] = feature_range(fid);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    DatasetSpec data;
    data.X = Matrix(n, kSyntheticDim);
    data.y.resize(n);
    data.kinds.assign(kSyntheticDim, FeatureKind::dense);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = &data.X.data[i * kSyntheticDim];
        for (std::size_t j = 0; j < kSyntheticDim; ++j) row[j] = u(rng);
        const double y = synthetic_value(fid, std::span<const double>(row, kSyntheticDim));
        if (!std::isfinite(y)) {
            std::string pt;
            for (std::size_t j = 0; j < kSyntheticDim; ++j) pt += (j ? "," : "") + fmt::real(row[j]);
            throw DomainError("F" + std::to_string(fid) + " undefined at sample " + std::to_string(i) + ": (" + pt + ")");
        }
        data.y[i] = y;
    }
    data.provenance = "F" + std::to_string(fid) + " seed=" + std::to_string(seed) + " range=[" + fmt::real(lo) + "," +
                      fmt::real(hi) + "]";
    return data;
}

struct GroundTruth {
    int function_id = 0;
    std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;  // first < second

    bool contains(std::uint32_t i, std::uint32_t j) const {
        return pairs.contains(i < j ? std::pair{i, j} : std::pair{j, i});
    }
};

/// Every unordered pair of variables sharing one of the given terms.
inline GroundTruth pairs_of_terms(const std::vector<FeatureSet>& terms, int fid = 0) {
    GroundTruth gt;
    gt.function_id = fid;
    for (const auto& t : terms)
        for (std::size_t a = 0; a < t.size(); ++a)
            for (std::size_t b = a + 1; b < t.size(); ++b)
                if (t[a] != t[b]) gt.pairs.insert(std::minmax(t[a], t[b]));
    return gt;
}

inline GroundTruth ground_truth_pairs(int fid) { return pairs_of_terms(interaction_terms(fid), fid); }

/// Probability that a random true pair scores above a random false pair
/// (ties count one half), over the pairs i < j of a symmetric score matrix.
inline double roc_auc(const Matrix& scores, const GroundTruth& truth) {
    if (scores.rows != scores.cols) throw ShapeMismatch("score matrix must be square");
    const std::size_t d = scores.rows;
    struct Item {
        double score;
        bool positive;
    };
    std::vector<Item> items;
    for (std::uint32_t i = 0; i < d; ++i)
        for (std::uint32_t j = i + 1; j < d; ++j) items.push_back({scores.at(i, j), truth.contains(i, j)});
    for (const auto& [a, b] : truth.pairs)
        if (b >= d) throw ShapeMismatch("ground-truth pair outside the score matrix");
    const auto pos = static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const Item& it) { return it.positive; }));
    const std::size_t neg = items.size() - pos;
    if (pos == 0 || neg == 0) throw InvalidArgument("degenerate ground truth: need both true and false pairs");
    for (const auto& it : items)
        if (!std::isfinite(it.score)) throw NonFiniteValue("non-finite interaction score");

    // Mann-Whitney U with midranks for ties.
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
    double rank_sum = 0.0;
    for (std::size_t k = 0; k < items.size();) {
        std::size_t end = k;
        while (end < items.size() && items[end].score == items[k].score) ++end;
        const double midrank = (static_cast<double>(k + 1) + static_cast<double>(end)) / 2.0;
        for (std::size_t m = k; m < end; ++m)
            if (items[m].positive) rank_sum += midrank;
        k = end;
    }
    const double u = rank_sum - static_cast<double>(pos) * static_cast<double>(pos + 1) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
    std::vector<int> functions{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::size_t trials = 5;
    std::size_t samples = 10000;
    std::uint64_t seed = 0;
    TrainConfig train;
    DetectOptions detect;
    double eta = 0.0;
    std::size_t threads = 1;

    void validate() const {
        if (functions.empty()) throw InvalidArgument("no functions selected");
        for (int f : functions) check_function_id(f);
        if (trials == 0) throw InvalidArgument("trials must be >= 1");
        if (samples < 30) throw InvalidArgument("need at least 30 samples");
        if (threads == 0) throw InvalidArgument("threads must be >= 1");
        if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("eta must lie in [0, 1]");
        train.validate();
    }
};

struct TrialResult {
    int function_id = 0;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double auc = std::numeric_limits<double>::quiet_NaN();
    double test_mse = std::numeric_limits<double>::quiet_NaN();
    std::size_t best_epoch = 0;
    std::string error;  // nonempty when the trial failed (e.g. divergence)

    bool ok() const noexcept { return error.empty(); }
};

struct FunctionSummary {
    int function_id = 0;
    std::size_t used_trials = 0;
    double mean_auc = std::numeric_limits<double>::quiet_NaN();
    double std_auc = std::numeric_limits<double>::quiet_NaN();
    double mean_test_mse = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentReport {
    std::vector<TrialResult> trials;
    std::vector<FunctionSummary> functions;
    double average_auc = std::numeric_limits<double>::quiet_NaN();
    double average_std = std::numeric_limits<double>::quiet_NaN();
    nlohmann::json config;

    const FunctionSummary* summary(int fid) const {
        for (const auto& s : functions)
            if (s.function_id == fid) return &s;
        return nullptr;
    }
};

/// Mean and population standard deviation after dropping the single highest
/// and lowest value (only when at least four values are present).
inline std::pair<double, double> trimmed_mean_std(std::vector<double> v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    std::sort(v.begin(), v.end());
    std::span<const double> kept(v);
    if (v.size() >= 4) kept = kept.subspan(1, v.size() - 2);
    double mean = 0.0;
    for (double x : kept) mean += x;
    mean /= static_cast<double>(kept.size());
    double var = 0.0;
    for (double x : kept) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(kept.size()))};
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Seed of one (function, trial) cell, derived from the experiment seed.
inline std::uint64_t trial_seed(std::uint64_t base, int fid, std::size_t trial) {
    return detail::splitmix64(detail::splitmix64(base ^ (static_cast<std::uint64_t>(fid) << 32)) + trial);
}

/// Generates, trains, detects and scores a single trial.
inline TrialResult run_trial(const ExperimentConfig& cfg, int fid, std::size_t trial) {
    TrialResult r;
    r.function_id = fid;
    r.trial = trial;
    r.seed = trial_seed(cfg.seed, fid, trial);
    try {
        const DatasetSpec data = gen_synthetic(fid, cfg.samples, r.seed);
        TrainConfig tc = cfg.train;
        tc.seed = detail::splitmix64(r.seed);
        const TrainResult trained = train_mlp(data, tc);
        r.test_mse = trained.log.test_mse;
        r.best_epoch = trained.log.best_epoch;
        const auto ledger = detect(build_filtration(trained.net, cfg.eta), cfg.detect);
        r.auc = roc_auc(pairwise_strengths(ledger, data.features()), ground_truth_pairs(fid));
    } catch (const Error& e) {
        r.error = e.what();
    }
    return r;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    return {{"functions", cfg.functions},
            {"trials", cfg.trials},
            {"samples", cfg.samples},
            {"seed", cfg.seed},
            {"arch", cfg.train.hidden},
            {"lr", cfg.train.lr},
            {"l1", cfg.train.l1},
            {"batch", cfg.train.batch},
            {"max_epochs", cfg.train.max_epochs},
            {"early_stop_rounds", cfg.train.early_stop_rounds},
            {"layer", cfg.detect.layer},
            {"p", cfg.detect.p},
            {"eta", cfg.eta}};
}

inline ExperimentReport summarize(std::vector<TrialResult> trials, const ExperimentConfig& cfg) {
    std::sort(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
        return std::pair{a.function_id, a.trial} < std::pair{b.function_id, b.trial};
    });
    ExperimentReport rep;
    rep.config = config_to_json(cfg);
    std::vector<double> means;
    for (int fid : cfg.functions) {
        FunctionSummary s;
        s.function_id = fid;
        std::vector<double> aucs, mses;
        for (const auto& t : trials)
            if (t.function_id == fid && t.ok()) {
                aucs.push_back(t.auc);
                mses.push_back(t.test_mse);
            }
        s.used_trials = aucs.size() >= 4 ? aucs.size() - 2 : aucs.size();
        std::tie(s.mean_auc, s.std_auc) = trimmed_mean_std(aucs);
        if (!mses.empty()) {
            double m = 0.0;
            for (double v : mses) m += v;
            s.mean_test_mse = m / static_cast<double>(mses.size());
        }
        if (!aucs.empty()) means.push_back(s.mean_auc);
        rep.functions.push_back(s);
    }
    if (!means.empty()) {
        double m = 0.0;
        for (double v : means) m += v;
        m /= static_cast<double>(means.size());
        double var = 0.0;
        for (double v : means) var += (v - m) * (v - m);
        rep.average_auc = m;
        rep.average_std = std::sqrt(var / static_cast<double>(means.size()));
    }
    rep.trials = std::move(trials);
    return rep;
}

/// Runs every (function, trial) cell, up to cfg.threads at a time. A failed
/// trial is recorded in the report and excluded from the aggregates.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<int, std::size_t>> cells;
    for (int fid : cfg.functions)
        for (std::size_t t = 0; t < cfg.trials; ++t) cells.emplace_back(fid, t);
    std::vector<TrialResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < cells.size(); k = next++)
            results[k] = run_trial(cfg, cells[k].first, cells[k].second);
    };
    const std::size_t nthreads = std::min(cfg.threads, cells.size());
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    }
    return summarize(std::move(results), cfg);
}

namespace detail {

inline std::string real_or_null(double v) { return std::isfinite(v) ? fmt::real(v) : std::string("null"); }

}  // namespace detail

inline std::string report_to_json(const ExperimentReport& rep) {
    std::string out = "{\"average_auc\":" + detail::real_or_null(rep.average_auc);
    out += ",\n\"average_std\":" + detail::real_or_null(rep.average_std);
    out += ",\n\"config\":" + rep.config.dump();
    out += ",\n\"functions\":[";
    for (std::size_t k = 0; k < rep.functions.size(); ++k) {
        const auto& s = rep.functions[k];
        out += k ? ",\n" : "\n";
        out += "{\"fid\":" + std::to_string(s.function_id) + ",\"mean_auc\":" + detail::real_or_null(s.mean_auc) +
               ",\"mean_test_mse\":" + detail::real_or_null(s.mean_test_mse) +
               ",\"std_auc\":" + detail::real_or_null(s.std_auc) + ",\"used_trials\":" + std::to_string(s.used_trials) +
               "}";
    }
    out += "],\n\"trials\":[";
    for (std::size_t k = 0; k < rep.trials.size(); ++k) {
        const auto& t = rep.trials[k];
        out += k ? ",\n" : "\n";
        out += "{\"auc\":" + detail::real_or_null(t.auc) + ",\"best_epoch\":" + std::to_string(t.best_epoch) +
               ",\"error\":" + fmt::quoted(t.error) + ",\"fid\":" + std::to_string(t.function_id) +
               ",\"seed\":" + std::to_string(t.seed) + ",\"test_mse\":" + detail::real_or_null(t.test_mse) +
               ",\"trial\":" + std::to_string(t.trial) + "}";
    }
    out += "]}\n";
    return out;
}

/// One row per trial: fid,trial,auc,test_mse,seed.
inline std::string report_to_csv(const ExperimentReport& rep) {
    std::string out = "fid,trial,auc,test_mse,seed\n";
    for (const auto& t : rep.trials)
        out += std::to_string(t.function_id) + "," + std::to_string(t.trial) + "," +
               (std::isfinite(t.auc) ? fmt::real(t.auc) : "nan") + "," +
               (std::isfinite(t.test_mse) ? fmt::real(t.test_mse) : "nan") + "," + std::to_string(t.seed) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Feature crossing

inline constexpr std::size_t kMaxCrossOrder = 4;

/// Quantile cut points splitting `values` into `buckets` equal-mass bins
/// (linear interpolation between order statistics).
inline std::vector<double> quantile_cuts(std::vector<double> values, std::size_t buckets) {
    if (buckets == 0) throw InvalidArgument("bucket count must be >= 1");
    std::vector<double> cuts;
    if (values.empty()) return cuts;
    std::sort(values.begin(), values.end());
    const double last = static_cast<double>(values.size() - 1);
    for (std::size_t k = 1; k < buckets; ++k) {
        const double pos = last * static_cast<double>(k) / static_cast<double>(buckets);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        cuts.push_back(values[lo] + frac * (values[hi] - values[lo]));
    }
    return cuts;
}

/// Bucket index of v: number of cut points <= v.
inline std::size_t bucket_of(const std::vector<double>& cuts, double v) {
    return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
}

/// Appends one sparse column per candidate holding the integer code of the
/// tuple of its members' values. Dense members are quantile-bucketized first;
/// sparse members are used as they are. Codes are assigned 0, 1, 2, ... in
/// order of first appearance.
inline DatasetSpec cross_features(const DatasetSpec& data, const std::vector<InteractionCandidate>& candidates,
                                  std::size_t buckets = 100) {
    data.validate();
    if (buckets == 0) throw InvalidArgument("bucket count must be >= 1");
    const std::size_t n = data.samples();
    const std::size_t d = data.features();
    for (const auto& c : candidates) {
        if (c.features.empty()) throw InvalidArgument("empty crossing candidate");
        if (c.features.size() > kMaxCrossOrder)
            throw InvalidArgument("crossing order " + std::to_string(c.features.size()) + " exceeds " +
                                  std::to_string(kMaxCrossOrder));
        for (auto f : c.features)
            if (f >= d) throw ShapeMismatch("candidate feature " + std::to_string(f) + " outside the dataset");
    }

    std::map<std::uint32_t, std::vector<double>> coded;  // feature -> per-sample value used for crossing
    for (const auto& c : candidates)
        for (auto f : c.features) {
            if (coded.contains(f)) continue;
            std::vector<double> col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = data.X.at(i, f);
            if (data.kind(f) == FeatureKind::dense) {
                const auto cuts = quantile_cuts(col, buckets);
                for (auto& v : col) v = static_cast<double>(bucket_of(cuts, v));
            }
            coded.emplace(f, std::move(col));
        }

    const std::size_t extra = candidates.size();
    DatasetSpec out;
    out.X = Matrix(n, d + extra);
    out.y = data.y;
    out.provenance = data.provenance;
    for (std::size_t j = 0; j < d; ++j) {
        out.names.push_back(data.name(j));
        out.kinds.push_back(data.kind(j));
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.X.at(i, j) = data.X.at(i, j);

    for (std::size_t k = 0; k < extra; ++k) {
        const auto& fs = candidates[k].features;
        std::string name = "cross";
        for (auto f : fs) name += "_" + std::to_string(f);
        out.names.push_back(name);
        out.kinds.push_back(FeatureKind::sparse);
        std::map<std::vector<double>, std::size_t> codes;
        std::vector<double> key(fs.size());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < fs.size(); ++m) key[m] = coded.at(fs[m])[i];
            auto [it, inserted] = codes.try_emplace(key, codes.size());
            out.X.at(i, d + k) = static_cast<double>(it->second);
        }
    }
    return out;
}

}  // namespace pid
