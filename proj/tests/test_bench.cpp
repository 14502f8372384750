#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "pid/pid.hpp"

using namespace pid;

namespace {

// Second, independently written evaluator of the synthetic suite (1-based
// variable names as in the table, shifted by one).
double reference_value(int fid, const std::vector<double>& v) {
    auto x = [&](int i) { return v[static_cast<std::size_t>(i)]; };
    const double pi = std::numbers::pi;
    switch (fid) {
        case 1:
            return std::exp(std::log(pi) * x(0) * x(1)) * std::sqrt(2 * x(2)) - std::asin(x(3)) +
                   std::log(x(2) + x(4)) - x(8) / x(9) * std::sqrt(x(6) / x(7)) - x(1) * x(6);
        case 2:
            return std::exp(std::log(pi) * x(0) * x(1)) * std::sqrt(2 * std::fabs(x(2))) - std::asin(x(3) / 2) +
                   std::log(std::fabs(x(2) + x(4)) + 1) +
                   x(8) / (1 + std::fabs(x(9))) * std::sqrt(std::fabs(x(6)) / (1 + std::fabs(x(7)))) - x(1) * x(6);
        case 3:
        case 4: {
            double r = std::exp(std::fabs(x(0) - x(1))) + std::fabs(x(1) * x(2)) -
                       std::exp(2 * std::fabs(x(3)) * std::log(std::fabs(x(2)))) +
                       std::log(x(3) * x(3) + x(4) * x(4) + x(6) * x(6) + x(7) * x(7)) + x(8) +
                       1 / (1 + x(9) * x(9));
            if (fid == 4) r += x(0) * x(0) * x(3) * x(3);
            return r;
        }
        case 5:
            return 1 / (1 + x(0) * x(0) + x(1) * x(1) + x(2) * x(2)) + std::exp((x(3) + x(4)) / 2) +
                   std::fabs(x(5) + x(6)) + x(7) * x(8) * x(9);
        case 6:
            return std::exp(std::fabs(x(0) * x(1) + 1)) - std::exp(std::fabs(x(2) + x(3)) + 1) +
                   std::cos(x(4) + x(5) - x(7)) + std::sqrt(x(7) * x(7) + x(8) * x(8) + x(9) * x(9));
        case 7: {
            double total = 0;
            for (int i = 0; i < 10; ++i) total += x(i);
            const double a = std::atan(x(0)) + std::atan(x(1));
            const double q = x(3) * x(4) * x(5) * x(6) * x(7);
            const double r = std::fabs(x(6)) / (1 + std::fabs(x(8)));
            return a * a + (x(2) * x(3) + x(5) > 0 ? x(2) * x(3) + x(5) : 0) - 1 / (1 + q * q) + r * r * r * r * r +
                   total;
        }
        case 8:
            return x(0) * x(1) + std::exp2(x(2) + x(4) + x(5)) + std::exp2(x(2) + x(3) + x(4) + x(6)) +
                   std::sin(x(6) * std::sin(x(7) + x(8))) + std::acos(0.9 * x(9));
        case 9:
            return std::tanh(x(0) * x(1) + x(2) * x(3)) * std::sqrt(std::fabs(x(4))) + std::exp(x(4) + x(5)) +
                   std::log(x(5) * x(5) * x(6) * x(6) * x(7) * x(7) + 1) + x(8) * x(9) + 1 / (1 + std::fabs(x(9)));
        default:
            return std::sinh(x(1) + x(2)) + std::acos(std::tanh(x(2) + x(4) + x(6))) + std::cos(x(3) + x(4)) +
                   1 / std::cos(x(6) * x(8));
    }
}

std::set<std::pair<std::uint32_t, std::uint32_t>> pairs(std::initializer_list<std::pair<std::uint32_t, std::uint32_t>> l) {
    return {l.begin(), l.end()};
}

// Counts (true, false) pairs where the true score wins, ties as one half.
double brute_auc(const Matrix& s, const GroundTruth& t) {
    std::vector<double> pos, neg;
    for (std::uint32_t i = 0; i < s.rows; ++i)
        for (std::uint32_t j = i + 1; j < s.rows; ++j) (t.contains(i, j) ? pos : neg).push_back(s.at(i, j));
    double wins = 0;
    for (double a : pos)
        for (double b : neg) wins += a > b ? 1.0 : a == b ? 0.5 : 0.0;
    return wins / double(pos.size() * neg.size());
}

Matrix symmetric(std::size_t d, const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& entries) {
    Matrix m(d, d);
    for (auto [i, j, v] : entries) m.at(i, j) = m.at(j, i) = v;
    return m;
}

}  // namespace

TEST(Synthetic, HandEvaluatedPoints) {
    const std::vector<double> zero(10, 0.0);
    EXPECT_DOUBLE_EQ(synthetic_value(5, zero), 2.0);
    EXPECT_DOUBLE_EQ(synthetic_value(10, zero), std::numbers::pi / 2 + 2.0);
    EXPECT_THROW(synthetic_value(11, zero), InvalidArgument);
    EXPECT_THROW(synthetic_value(1, std::vector<double>(9, 0.5)), ShapeMismatch);
}

TEST(Synthetic, AgreesWithSecondEvaluator) {
    for (int fid = 1; fid <= 10; ++fid) {
        const auto data = gen_synthetic(fid, 1000, 100 + fid);
        for (std::size_t i = 0; i < data.samples(); ++i) {
            std::vector<double> row(&data.X.data[i * 10], &data.X.data[i * 10] + 10);
            const double want = reference_value(fid, row);
            ASSERT_NEAR(data.y[i], want, 1e-12 * std::max(1.0, std::abs(want))) << "F" << fid << " sample " << i;
        }
    }
}

TEST(Synthetic, RangesAndDeterminism) {
    const auto a = gen_synthetic(1, 500, 7);
    for (double v : a.X.data) {
        EXPECT_GE(v, 0.05);
        EXPECT_LT(v, 1.0);
    }
    const auto b = gen_synthetic(3, 500, 7);
    for (double v : b.X.data) {
        EXPECT_GE(v, -1.0);
        EXPECT_LT(v, 1.0);
    }
    const auto c = gen_synthetic(3, 500, 7);
    EXPECT_EQ(b.X.data, c.X.data);
    EXPECT_EQ(b.y, c.y);
    EXPECT_NE(gen_synthetic(3, 500, 8).y, b.y);
    EXPECT_EQ(b.features(), 10u);
}

TEST(GroundTruth, EnumeratedPairs) {
    EXPECT_EQ(ground_truth_pairs(10).pairs, pairs({{1, 2}, {2, 4}, {2, 6}, {4, 6}, {3, 4}, {6, 8}}));
    const auto f5 = ground_truth_pairs(5);
    EXPECT_TRUE(f5.contains(7, 8));
    EXPECT_TRUE(f5.contains(9, 7));
    EXPECT_TRUE(f5.contains(8, 9));
    EXPECT_FALSE(f5.contains(2, 3));
    EXPECT_TRUE(pairs_of_terms({}).pairs.empty());
    for (int fid = 1; fid <= 10; ++fid)
        for (const auto& [i, j] : ground_truth_pairs(fid).pairs) {
            EXPECT_LT(i, j);
            EXPECT_LT(j, 10u);
        }
}

TEST(Auc, PerfectReversedAndTies) {
    GroundTruth t;
    t.pairs = pairs({{0, 1}, {1, 2}});
    const auto good = symmetric(3, {{0, 1, 0.9}, {1, 2, 0.8}, {0, 2, 0.1}});
    EXPECT_EQ(roc_auc(good, t), 1.0);
    const auto bad = symmetric(3, {{0, 1, 0.1}, {1, 2, 0.2}, {0, 2, 0.9}});
    EXPECT_EQ(roc_auc(bad, t), 0.0);
    const auto flat = symmetric(3, {{0, 1, 0.5}, {1, 2, 0.5}, {0, 2, 0.5}});
    EXPECT_EQ(roc_auc(flat, t), 0.5);
}

TEST(Auc, HandPickedMatchesBruteForce) {
    GroundTruth t;
    t.pairs = pairs({{0, 1}, {2, 3}});
    const auto s = symmetric(4, {{0, 1, 0.7}, {0, 2, 0.2}, {0, 3, 0.7}, {1, 2, 0.9}, {1, 3, 0.1}, {2, 3, 0.4}});
    EXPECT_DOUBLE_EQ(roc_auc(s, t), brute_auc(s, t));
}

TEST(Auc, DegenerateTruthRejected) {
    GroundTruth none;
    EXPECT_THROW(roc_auc(Matrix(3, 3), none), InvalidArgument);
    GroundTruth all;
    all.pairs = pairs({{0, 1}, {0, 2}, {1, 2}});
    EXPECT_THROW(roc_auc(Matrix(3, 3), all), InvalidArgument);
    GroundTruth outside;
    outside.pairs = pairs({{0, 5}});
    EXPECT_THROW(roc_auc(Matrix(3, 3), outside), ShapeMismatch);
}

TEST(Auc, RandomScoresAverageOneHalf) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    const auto truth = ground_truth_pairs(3);
    double total = 0;
    for (int k = 0; k < 1000; ++k) {
        Matrix s(10, 10);
        for (std::size_t i = 0; i < 10; ++i)
            for (std::size_t j = i + 1; j < 10; ++j) s.at(i, j) = s.at(j, i) = u(rng);
        const double auc = roc_auc(s, truth);
        ASSERT_GE(auc, 0.0);
        ASSERT_LE(auc, 1.0);
        ASSERT_DOUBLE_EQ(auc, brute_auc(s, truth));
        total += auc;
    }
    EXPECT_NEAR(total / 1000, 0.5, 0.05);
}

TEST(Trim, DropsExactlyMaxAndMin) {
    auto [m, s] = trimmed_mean_std({0.1, 0.9, 0.5, 0.6, 0.4});
    EXPECT_DOUBLE_EQ(m, 0.5);
    EXPECT_NEAR(s, std::sqrt((0.01 + 0.01 + 0.0) / 3), 1e-15);
    auto [m3, s3] = trimmed_mean_std({0.0, 1.0, 0.5});
    EXPECT_DOUBLE_EQ(m3, 0.5);
    (void)s3;
}

TEST(Experiment, SmallRunRecordsEveryTrialAndTrims) {
    ExperimentConfig cfg;
    cfg.functions = {5, 10};
    cfg.trials = 4;
    cfg.samples = 300;
    cfg.seed = 3;
    cfg.train.hidden = {8, 4};
    cfg.train.max_epochs = 3;
    cfg.threads = 2;
    const auto rep = run_experiment(cfg);
    ASSERT_EQ(rep.trials.size(), 8u);
    for (const auto& t : rep.trials) {
        EXPECT_TRUE(t.ok()) << t.error;
        EXPECT_GE(t.auc, 0.0);
        EXPECT_LE(t.auc, 1.0);
    }
    for (const auto& s : rep.functions) {
        std::vector<double> aucs;
        for (const auto& t : rep.trials)
            if (t.function_id == s.function_id) aucs.push_back(t.auc);
        EXPECT_EQ(s.used_trials, 2u);
        EXPECT_DOUBLE_EQ(s.mean_auc, trimmed_mean_std(aucs).first);
    }
    // Thread count does not change the results.
    cfg.threads = 1;
    const auto again = run_experiment(cfg);
    EXPECT_EQ(report_to_json(again), report_to_json(rep));
    const auto csv = report_to_csv(rep);
    EXPECT_EQ(csv.rfind("fid,trial,auc,test_mse,seed\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
}

TEST(Experiment, FailedTrialsAreRecordedNotFatal) {
    ExperimentConfig cfg;
    cfg.functions = {5};
    cfg.trials = 2;
    cfg.samples = 300;
    cfg.train.hidden = {4};
    cfg.train.max_epochs = 2;
    cfg.train.lr = 1e200;
    const auto rep = run_experiment(cfg);
    ASSERT_EQ(rep.trials.size(), 2u);
    for (const auto& t : rep.trials) EXPECT_FALSE(t.ok());
    EXPECT_TRUE(std::isnan(rep.functions[0].mean_auc));
    EXPECT_NE(report_to_json(rep).find("\"auc\":null"), std::string::npos);
}

TEST(Cross, BinaryFeaturesGiveAtMostFourCodes) {
    std::mt19937_64 rng(1);
    std::bernoulli_distribution coin(0.5);
    DatasetSpec data;
    data.X = Matrix(200, 2);
    for (auto& v : data.X.data) v = coin(rng) ? 1.0 : 0.0;
    data.y.assign(200, 0.0);
    data.kinds = {FeatureKind::sparse, FeatureKind::sparse};
    const auto out = cross_features(data, {{{0, 1}}});
    ASSERT_EQ(out.features(), 3u);
    std::set<double> codes;
    for (std::size_t i = 0; i < 200; ++i) codes.insert(out.X.at(i, 2));
    EXPECT_LE(codes.size(), 4u);
    EXPECT_EQ(out.name(2), "cross_0_1");
    EXPECT_EQ(out.kind(2), FeatureKind::sparse);
    EXPECT_EQ(out.X.at(0, 2), 0.0);
}

TEST(Cross, TwoBucketsSplitAtMedian) {
    DatasetSpec data;
    data.X = Matrix(6, 1, {5, 1, 3, 2, 6, 4});
    data.y.assign(6, 0.0);
    const auto cuts = quantile_cuts({5, 1, 3, 2, 6, 4}, 2);
    ASSERT_EQ(cuts.size(), 1u);
    EXPECT_DOUBLE_EQ(cuts[0], 3.5);
    const auto out = cross_features(data, {{{0}}}, 2);
    // Codes in order of first appearance: 5 -> upper half (0), 1 -> lower half (1).
    EXPECT_EQ(out.X.at(0, 1), 0.0);
    EXPECT_EQ(out.X.at(1, 1), 1.0);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out.X.at(i, 1), data.X.at(i, 0) > 3.5 ? 0.0 : 1.0);
}

TEST(Cross, CodeCountEqualsDistinctTuples) {
    const auto data = gen_synthetic(3, 2000, 4);
    const std::size_t buckets = 7;
    const auto out = cross_features(data, {{{0, 1}}, {{2, 3, 4}}}, buckets);
    ASSERT_EQ(out.features(), 12u);
    std::vector<double> c0, c1;
    for (std::size_t i = 0; i < 2000; ++i) {
        c0.push_back(data.X.at(i, 0));
        c1.push_back(data.X.at(i, 1));
    }
    const auto cut0 = quantile_cuts(c0, buckets), cut1 = quantile_cuts(c1, buckets);
    std::set<std::pair<std::size_t, std::size_t>> tuples;
    std::set<double> codes;
    for (std::size_t i = 0; i < 2000; ++i) {
        tuples.emplace(bucket_of(cut0, c0[i]), bucket_of(cut1, c1[i]));
        codes.insert(out.X.at(i, 10));
    }
    EXPECT_EQ(codes.size(), tuples.size());
    EXPECT_EQ(*codes.rbegin(), double(codes.size() - 1));
    EXPECT_EQ(out.name(11), "cross_2_3_4");
    EXPECT_EQ(dataset_to_csv(cross_features(data, {{{0, 1}}, {{2, 3, 4}}}, buckets)), dataset_to_csv(out));
}

TEST(Cross, RejectsHighOrderAndOutOfRange) {
    const auto data = gen_synthetic(3, 50, 4);
    EXPECT_THROW(cross_features(data, {{{0, 1, 2, 3, 4}}}), InvalidArgument);
    EXPECT_THROW(cross_features(data, {{{0, 10}}}), ShapeMismatch);
    EXPECT_THROW(cross_features(data, {{{0, 1}}}, 0), InvalidArgument);
}
