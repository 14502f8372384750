#pragma once

// Command-line front end: train | detect | eval | perturb | saliency | cross | bench.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pid/bench.hpp"
#include "pid/dataset.hpp"
#include "pid/detect.hpp"
#include "pid/error.hpp"
#include "pid/export.hpp"
#include "pid/filtration.hpp"
#include "pid/format.hpp"
#include "pid/model_io.hpp"
#include "pid/trainer.hpp"

namespace pid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Flag validation failure detected after parsing (maps to exit status 2).
struct UsageError : Error {
    using Error::Error;
};

namespace detail {

inline int parse_function_id(std::string s) {
    if (!s.empty() && (s[0] == 'F' || s[0] == 'f')) s.erase(0, 1);
    int fid = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), fid);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || fid < 1 || fid > kSyntheticFunctions)
        throw UsageError("unknown function '" + s + "' (expected F1..F10)");
    return fid;
}

inline std::vector<int> parse_function_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_function_id(item));
    if (out.empty()) throw UsageError("empty function list");
    return out;
}

inline std::vector<std::size_t> parse_arch(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t w = 0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), w);
        if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || w == 0)
            throw UsageError("bad hidden-layer width '" + item + "' in --arch");
        out.push_back(w);
    }
    if (out.empty()) throw UsageError("--arch needs at least one hidden width");
    return out;
}

// "0:1,2:3:4" -> {{0,1},{2,3,4}}
inline std::vector<InteractionCandidate> parse_candidates(const std::string& s) {
    std::vector<InteractionCandidate> out;
    std::stringstream groups(s);
    std::string group;
    while (std::getline(groups, group, ',')) {
        InteractionCandidate c;
        std::stringstream members(group);
        std::string m;
        while (std::getline(members, m, ':')) {
            std::uint32_t v = 0;
            const auto res = std::from_chars(m.data(), m.data() + m.size(), v);
            if (m.empty() || res.ec != std::errc() || res.ptr != m.data() + m.size())
                throw UsageError("bad feature index '" + m + "' in --candidates");
            c.features.push_back(v);
        }
        std::sort(c.features.begin(), c.features.end());
        c.features.erase(std::unique(c.features.begin(), c.features.end()), c.features.end());
        if (!c.features.empty()) out.push_back(std::move(c));
    }
    return out;
}

inline std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("PID_SEED");
    if (!v || !*v) return std::nullopt;
    std::uint64_t s = 0;
    const std::string_view sv(v);
    const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), s);
    if (res.ec != std::errc() || res.ptr != sv.data() + sv.size()) throw UsageError("PID_SEED must be an unsigned integer");
    return s;
}

inline std::filesystem::path out_path(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    return std::filesystem::path(dir) / name;
}

inline void write(const std::string& dir, const std::string& name, const std::string& contents, std::ostream& log) {
    const auto p = out_path(dir, name);
    fmt::write_file(p.string(), contents);
    log << "wrote " << p.string() << "\n";
}

}  // namespace detail

/// Parsed flags shared across subcommands.
struct CliConfig {
    std::string out = ".";
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    // model / data
    std::string model;
    std::string data;
    std::string function;
    std::size_t samples = 10000;

    // training
    std::string arch = "140,100,60,20";
    double lr = 5e-3;
    double l1 = 5e-5;
    std::size_t batch = 100;
    std::size_t max_epochs = 500;
    std::size_t early_stop = 100;

    // detection
    std::size_t layer = 1;
    double p = 2.0;
    double eta = 0.0;
    bool terminal_zero = false;
    bool singletons = false;

    // subcommand specific
    double delta = 0.01;
    std::size_t height = 0;
    std::size_t width = 0;
    std::string candidates;
    std::string ledger;
    std::size_t top = 0;
    std::size_t bucket = 100;
    std::string functions = "F1,F2,F3,F4,F5,F6,F7,F8,F9,F10";
    std::size_t trials = 5;

    TrainConfig train_config() const {
        TrainConfig tc;
        tc.hidden = detail::parse_arch(arch);
        tc.lr = lr;
        tc.l1 = l1;
        tc.batch = batch;
        tc.max_epochs = max_epochs;
        tc.early_stop_rounds = early_stop;
        tc.seed = seed;
        try {
            tc.validate();
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
        return tc;
    }

    DetectOptions detect_options() const {
        if (layer == 0) throw UsageError("--layer must be >= 1");
        if (!(p >= 1.0)) throw UsageError("--p must be >= 1");
        if (!(eta >= 0.0 && eta <= 1.0)) throw UsageError("--eta must lie in [0, 1]");
        DetectOptions opt;
        opt.layer = layer;
        opt.p = p;
        opt.terminal_death = terminal_zero ? TerminalDeath::zero : TerminalDeath::last_threshold;
        opt.include_singletons = singletons;
        return opt;
    }
};

namespace detail {

inline void add_common(CLI::App* sub, CliConfig& c) {
    sub->add_option("--out", c.out, "Output directory");
}

inline void add_seed(CLI::App* sub, CliConfig& c) {
    sub->add_option("--seed", c.seed, "Random seed (PID_SEED overrides)");
}

inline void add_model(CLI::App* sub, CliConfig& c) {
    sub->add_option("--model", c.model, "Model JSON path")->required();
}

inline void add_detect(CLI::App* sub, CliConfig& c) {
    sub->add_option("--layer", c.layer, "Target layer l (1 = first hidden layer)");
    sub->add_option("--p", c.p, "Norm exponent p");
    sub->add_option("--eta", c.eta, "Prune edges with phi below eta");
    sub->add_flag("--terminal-zero", c.terminal_zero, "Last alive candidate dies at 0 instead of the last threshold");
    sub->add_flag("--singletons", c.singletons, "Keep single-feature candidates");
}

inline void add_train(CLI::App* sub, CliConfig& c) {
    sub->add_option("--arch", c.arch, "Hidden layer widths");
    sub->add_option("--lr", c.lr, "Adam learning rate");
    sub->add_option("--l1", c.l1, "L1 penalty on weights");
    sub->add_option("--batch", c.batch, "Mini-batch size");
    sub->add_option("--max-epochs", c.max_epochs, "Epoch cap");
    sub->add_option("--early-stop", c.early_stop, "Stop after this many epochs without validation improvement");
}

inline DatasetSpec load_or_generate(const CliConfig& c) {
    if (!c.data.empty() && !c.function.empty()) throw UsageError("give either --data or --function, not both");
    if (!c.data.empty()) return load_dataset(c.data);
    if (c.function.empty()) throw UsageError("need --data or --function");
    if (c.samples < 30) throw UsageError("--samples must be >= 30");
    return gen_synthetic(parse_function_id(c.function), c.samples, c.seed);
}

inline int cmd_train(const CliConfig& c, std::ostream& log) {
    const TrainConfig tc = c.train_config();
    const DatasetSpec data = load_or_generate(c);
    const TrainResult res = train_mlp(data, tc);
    write(c.out, "model.json", serialize_network(res.net), log);
    write(c.out, "train_log.csv", res.log.to_csv(), log);
    log << "best_epoch=" << res.log.best_epoch << " val_mse=" << fmt::real(res.log.best_val_mse)
        << " test_mse=" << (std::isfinite(res.log.test_mse) ? fmt::real(res.log.test_mse) : "nan") << "\n";
    return kExitOk;
}

inline int cmd_detect(const CliConfig& c, std::ostream& log) {
    const DetectOptions opt = c.detect_options();
    const NetworkSpec net = load_network(c.model);
    const auto ledger = detect(build_filtration(net, c.eta), opt);
    write(c.out, "ledger.json", ledger_to_json(ledger), log);
    write(c.out, "pairwise.csv", matrix_to_csv(pairwise_strengths(ledger, net.input_dim())), log);
    log << ledger.size() << " candidates\n";
    return kExitOk;
}

inline int cmd_eval(const CliConfig& c, std::ostream& log) {
    const DetectOptions opt = c.detect_options();
    if (c.function.empty()) throw UsageError("eval needs --function for the ground truth");
    const int fid = parse_function_id(c.function);
    const NetworkSpec net = load_network(c.model);
    const auto ledger = detect(build_filtration(net, c.eta), opt);
    const GroundTruth truth = ground_truth_pairs(fid);
    const double auc = roc_auc(pairwise_strengths(ledger, net.input_dim()), truth);
    std::string pairs = "[";
    bool first = true;
    for (const auto& [i, j] : truth.pairs) {
        pairs += (first ? "[" : ",[") + std::to_string(i) + "," + std::to_string(j) + "]";
        first = false;
    }
    pairs += "]";
    const std::string json = "{\"auc\":" + fmt::real(auc) + ",\"candidates\":" + std::to_string(ledger.size()) +
                             ",\"eta\":" + fmt::real(c.eta) + ",\"fid\":" + std::to_string(fid) +
                             ",\"layer\":" + std::to_string(c.layer) + ",\"p\":" + fmt::real(c.p) +
                             ",\"truth\":" + pairs + "}\n";
    write(c.out, "eval.json", json, log);
    log << "auc=" << fmt::real(auc) << "\n";
    return kExitOk;
}

/// Adds u * delta * w_max, u ~ U(-1, 1), to every weight.
inline NetworkSpec perturb_weights(const NetworkSpec& net, double delta, std::uint64_t seed) {
    double w_max = 0.0;
    for (const auto& L : net.layers)
        for (double w : L.data) w_max = std::max(w_max, std::abs(w));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    NetworkSpec g = net;
    for (auto& L : g.layers)
        for (double& w : L.data) w += u(rng) * delta * w_max;
    return g;
}

inline int cmd_perturb(const CliConfig& c, std::ostream& log) {
    const DetectOptions opt = c.detect_options();
    if (!(c.delta >= 0.0 && c.delta <= 1.0)) throw UsageError("--delta must lie in [0, 1]");
    const NetworkSpec net = load_network(c.model);
    const NetworkSpec g = perturb_weights(net, c.delta, c.seed);
    const StabilityReport rep = stability_check(net, g, opt.layer, opt.p);
    write(c.out, "stability.json", stability_to_json(rep), log);
    log << "delta=" << fmt::real(rep.delta) << " bound=" << fmt::real(rep.bound)
        << " max_diff=" << fmt::real(rep.max_diff()) << " violations=" << rep.violations() << "\n";
    return kExitOk;
}

inline int cmd_saliency(const CliConfig& c, std::ostream& log) {
    const DetectOptions opt = c.detect_options();
    if (c.height == 0 || c.width == 0) throw UsageError("saliency needs --height and --width");
    const NetworkSpec net = load_network(c.model);
    if (c.height * c.width != net.input_dim())
        throw ShapeMismatch("grid " + std::to_string(c.height) + "x" + std::to_string(c.width) + " does not match " +
                            std::to_string(net.input_dim()) + " inputs");
    const auto ledger = detect(build_filtration(net, c.eta), opt);
    const Matrix grid = saliency(ledger, c.height, c.width);
    write(c.out, "saliency.csv", matrix_to_csv(normalize_max(grid)), log);
    write(c.out, "saliency.pgm", grid_to_pgm(grid), log);
    return kExitOk;
}

inline int cmd_cross(const CliConfig& c, std::ostream& log) {
    if (c.data.empty()) throw UsageError("cross needs --data");
    if (c.bucket == 0) throw UsageError("--bucket must be >= 1");
    if (c.candidates.empty() == c.ledger.empty()) throw UsageError("give exactly one of --candidates or --ledger");
    std::vector<InteractionCandidate> cands;
    if (!c.candidates.empty()) {
        cands = parse_candidates(c.candidates);
    } else {
        for (const auto& rc : parse_ledger_json(fmt::read_file(c.ledger))) {
            if (c.top && cands.size() >= c.top) break;
            if (rc.candidate.order() <= kMaxCrossOrder && rc.candidate.order() >= 2) cands.push_back(rc.candidate);
        }
    }
    for (const auto& cand : cands)
        if (cand.order() > kMaxCrossOrder)
            throw UsageError("crossing order " + std::to_string(cand.order()) + " exceeds " +
                             std::to_string(kMaxCrossOrder));
    const DatasetSpec data = load_dataset(c.data);
    write(c.out, "crossed.csv", dataset_to_csv(cross_features(data, cands, c.bucket)), log);
    log << cands.size() << " crossed features\n";
    return kExitOk;
}

inline int cmd_bench(const CliConfig& c, std::ostream& log) {
    ExperimentConfig cfg;
    cfg.functions = parse_function_list(c.functions);
    cfg.trials = c.trials;
    cfg.samples = c.samples;
    cfg.seed = c.seed;
    cfg.train = c.train_config();
    cfg.detect = c.detect_options();
    cfg.eta = c.eta;
    cfg.threads = c.threads;
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const ExperimentReport rep = run_experiment(cfg);
    write(c.out, "report.json", report_to_json(rep), log);
    write(c.out, "report.csv", report_to_csv(rep), log);
    for (const auto& s : rep.functions)
        log << "F" << s.function_id << " auc=" << fmt::real(s.mean_auc) << " +- " << fmt::real(s.std_auc) << "\n";
    log << "average auc=" << fmt::real(rep.average_auc) << " +- " << fmt::real(rep.average_std) << "\n";
    for (const auto& t : rep.trials)
        if (!t.ok()) log << "F" << t.function_id << " trial " << t.trial << " failed: " << t.error << "\n";
    return kExitOk;
}

}  // namespace detail

/// Entry point of the `pid` executable. Returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Persistence-based interaction detection for feed-forward networks"};
    app.name("pid");
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");
    app.fallthrough();  // global --threads may follow the subcommand

    CliConfig c;
    app.add_option("--threads", c.threads, "Worker thread cap")->check(CLI::PositiveNumber);

    auto* train = app.add_subcommand("train", "Train an MLP regressor and write model.json + train_log.csv");
    detail::add_common(train, c);
    detail::add_seed(train, c);
    train->add_option("--data", c.data, "Dataset CSV (x0..,y)");
    train->add_option("--function", c.function, "Synthetic function F1..F10 instead of --data");
    train->add_option("--samples", c.samples, "Synthetic sample count");
    detail::add_train(train, c);

    auto* det = app.add_subcommand("detect", "Write the ranked ledger (ledger.json) and pairwise.csv");
    detail::add_common(det, c);
    detail::add_model(det, c);
    detail::add_detect(det, c);

    auto* eval = app.add_subcommand("eval", "AUC of pairwise strengths against a synthetic ground truth");
    detail::add_common(eval, c);
    detail::add_model(eval, c);
    eval->add_option("--function", c.function, "Ground-truth function F1..F10")->required();
    detail::add_detect(eval, c);

    auto* perturb = app.add_subcommand("perturb", "Perturb weights and compare ledgers (stability.json)");
    detail::add_common(perturb, c);
    detail::add_seed(perturb, c);
    detail::add_model(perturb, c);
    perturb->add_option("--delta", c.delta, "Noise magnitude on the phi scale");
    detail::add_detect(perturb, c);

    auto* sal = app.add_subcommand("saliency", "Per-pixel interaction saliency (saliency.csv + saliency.pgm)");
    detail::add_common(sal, c);
    detail::add_model(sal, c);
    sal->add_option("--height", c.height, "Image height")->required();
    sal->add_option("--width", c.width, "Image width")->required();
    detail::add_detect(sal, c);

    auto* cross = app.add_subcommand("cross", "Append crossed sparse features (crossed.csv)");
    detail::add_common(cross, c);
    cross->add_option("--data", c.data, "Dataset CSV")->required();
    cross->add_option("--candidates", c.candidates, "Feature groups, e.g. 0:1,2:3:4");
    cross->add_option("--ledger", c.ledger, "Take candidates from a ledger JSON in rank order");
    cross->add_option("--top", c.top, "Use at most this many ledger candidates (0 = all)");
    cross->add_option("--bucket", c.bucket, "Quantile buckets per dense feature");

    auto* bench = app.add_subcommand("bench", "Synthetic-suite AUC benchmark (report.json + report.csv)");
    detail::add_common(bench, c);
    detail::add_seed(bench, c);
    bench->add_option("--functions", c.functions, "Comma-separated function ids");
    bench->add_option("--trials", c.trials, "Trials per function (best and worst dropped when >= 4)");
    bench->add_option("--samples", c.samples, "Samples per trial");
    detail::add_train(bench, c);
    detail::add_detect(bench, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (auto s = detail::env_seed()) c.seed = *s;
        if (*train) return detail::cmd_train(c, out);
        if (*det) return detail::cmd_detect(c, out);
        if (*eval) return detail::cmd_eval(c, out);
        if (*perturb) return detail::cmd_perturb(c, out);
        if (*sal) return detail::cmd_saliency(c, out);
        if (*cross) return detail::cmd_cross(c, out);
        if (*bench) return detail::cmd_bench(c, out);
    } catch (const UsageError& e) {
        err << "pid: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "pid: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "pid: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace pid::cli
