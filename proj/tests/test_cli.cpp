#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "oracles.hpp"
#include "pid/pid.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int status;
    std::string output;
};

Result run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + PID_CLI_PATH + " " + args + " 2>&1";
    Result r{-1, {}};
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("pid_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }
    std::string read(const std::string& name) const { return pid::fmt::read_file(path(name)); }

    fs::path dir;
};

const char* kTinyTrain = "--function F5 --samples 300 --arch 8,4 --max-epochs 3";

}  // namespace

TEST_F(CliTest, HelpListsFlagsWithDefaults) {
    const auto top = run("--help");
    EXPECT_EQ(top.status, 0);
    for (const char* sub : {"train", "detect", "eval", "perturb", "saliency", "cross", "bench"})
        EXPECT_NE(top.output.find(sub), std::string::npos) << sub;
    const auto bench = run("bench --help");
    EXPECT_EQ(bench.status, 0);
    for (const char* flag : {"--trials", "--lr", "--l1", "--arch", "--early-stop", "--layer", "--p", "--eta", "--seed"})
        EXPECT_NE(bench.output.find(flag), std::string::npos) << flag;
    EXPECT_NE(bench.output.find("140,100,60,20"), std::string::npos);
    EXPECT_NE(bench.output.find("0.005"), std::string::npos);
}

TEST_F(CliTest, BadFlagsExitTwo) {
    EXPECT_EQ(run("").status, 2);
    EXPECT_EQ(run("frobnicate").status, 2);
    EXPECT_EQ(run("detect").status, 2);
    EXPECT_EQ(run("detect --model x.json --p notanumber").status, 2);
    EXPECT_EQ(run("bench --functions F11").status, 2);
    EXPECT_EQ(run("train --function F3 --arch 10,0").status, 2);
    EXPECT_EQ(run("cross --data x.csv --candidates 0:1:2:3:4 --out " + dir.string()).status, 2);
    EXPECT_EQ(run("train --function F3 --out " + dir.string(), "PID_SEED=abc").status, 2);
}

TEST_F(CliTest, RuntimeFailuresExitOne) {
    EXPECT_EQ(run("detect --model " + path("missing.json") + " --out " + dir.string()).status, 1);
    pid::fmt::write_file(path("bad.json"), "{\"layers\":[{\"rows\":2,\"cols\":3,\"data\":[1,2,3,4,5,6]},"
                                           "{\"rows\":4,\"cols\":1,\"data\":[1,2,3,4]}]}");
    const auto r = run("detect --model " + path("bad.json") + " --out " + dir.string());
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.output.find("layer 2"), std::string::npos);
}

TEST_F(CliTest, PipelineWritesArtifacts) {
    const std::string out = " --out " + dir.string();
    ASSERT_EQ(run(std::string("train ") + kTinyTrain + " --seed 4" + out).status, 0);
    ASSERT_TRUE(fs::exists(path("model.json")));
    EXPECT_NE(read("train_log.csv").find("epoch,train_mse,val_mse"), std::string::npos);

    const std::string model = " --model " + path("model.json");
    ASSERT_EQ(run("detect" + model + " --layer 1 --p 2 --eta 0" + out).status, 0);
    const auto ranked = pid::parse_ledger_json(read("ledger.json"));
    for (std::size_t k = 1; k < ranked.size(); ++k) EXPECT_GE(ranked[k - 1].strength, ranked[k].strength);
    const auto pairwise = read("pairwise.csv");
    EXPECT_EQ(std::count(pairwise.begin(), pairwise.end(), '\n'), 10);

    ASSERT_EQ(run("eval" + model + " --function F5" + out).status, 0);
    const auto eval = nlohmann::json::parse(read("eval.json"));
    EXPECT_GE(eval["auc"].get<double>(), 0.0);
    EXPECT_LE(eval["auc"].get<double>(), 1.0);

    ASSERT_EQ(run("perturb" + model + " --delta 0.01 --seed 2" + out).status, 0);
    const auto st = nlohmann::json::parse(read("stability.json"));
    EXPECT_EQ(st["violations"].get<int>(), 0);
    for (const auto& row : st["common"]) EXPECT_LE(row["diff"].get<double>(), st["bound"].get<double>());

    ASSERT_EQ(run("saliency" + model + " --height 2 --width 5" + out).status, 0);
    EXPECT_EQ(read("saliency.pgm").rfind("P5\n5 2\n255\n", 0), 0u);
    EXPECT_EQ(run("saliency" + model + " --height 3 --width 5" + out).status, 1);

    pid::save_dataset(pid::gen_synthetic(5, 50, 1), path("data.csv"));
    ASSERT_EQ(run("cross --data " + path("data.csv") + " --candidates 0:1,7:8:9 --bucket 4" + out).status, 0);
    EXPECT_NE(read("crossed.csv").find("cross_7_8_9,y"), std::string::npos);
    ASSERT_EQ(run("cross --data " + path("data.csv") + " --ledger " + path("ledger.json") + " --top 3" + out).status, 0);
}

TEST_F(CliTest, RerunsAreByteIdenticalAndSeedEnvOverrides) {
    const std::string a = " --out " + path("a"), b = " --out " + path("b"), c = " --out " + path("c");
    ASSERT_EQ(run(std::string("train ") + kTinyTrain + " --seed 1" + a).status, 0);
    ASSERT_EQ(run(std::string("train ") + kTinyTrain + " --seed 1" + b).status, 0);
    EXPECT_EQ(read("a/model.json"), read("b/model.json"));
    EXPECT_EQ(read("a/train_log.csv"), read("b/train_log.csv"));
    ASSERT_EQ(run(std::string("train ") + kTinyTrain + " --seed 99" + c, "PID_SEED=1").status, 0);
    EXPECT_EQ(read("a/model.json"), read("c/model.json"));
}

TEST_F(CliTest, BenchReportsTrimmedMeans) {
    const auto r = run("bench --functions F3,F5 --trials 5 --seed 7 --samples 300 --arch 8,4 --max-epochs 2 --threads 2 --out " +
                       dir.string());
    ASSERT_EQ(r.status, 0) << r.output;
    const auto rep = nlohmann::json::parse(read("report.json"));
    ASSERT_EQ(rep["trials"].size(), 10u);
    for (const auto& f : rep["functions"]) {
        EXPECT_EQ(f["used_trials"].get<int>(), 3);
        std::vector<double> aucs;
        for (const auto& t : rep["trials"])
            if (t["fid"] == f["fid"]) aucs.push_back(t["auc"].get<double>());
        EXPECT_DOUBLE_EQ(f["mean_auc"].get<double>(), pid::trimmed_mean_std(aucs).first);
    }
    EXPECT_EQ(read("report.csv").substr(0, 28), "fid,trial,auc,test_mse,seed\n");
}
