// Trains a small MLP on F5 and scores the detected pairwise interactions.
//   sample_synthetic [samples] [epochs]

#include <cstdio>
#include <cstdlib>

#include "pid/pid.hpp"

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 3000;
    pid::TrainConfig cfg;
    cfg.hidden = {64, 32, 16};
    cfg.max_epochs = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 100;
    cfg.seed = 1;

    const auto data = pid::gen_synthetic(5, n, 42);
    const auto trained = pid::train_mlp(data, cfg);
    std::printf("test mse %.6g after %zu epochs\n", trained.log.test_mse, trained.log.epochs());

    const auto ledger = pid::detect(trained.net);
    const auto ranked = pid::rank(ledger);
    for (std::size_t k = 0; k < ranked.size() && k < 8; ++k) {
        std::printf("%10.5f  {", ranked[k].strength);
        for (std::size_t m = 0; m < ranked[k].candidate.features.size(); ++m)
            std::printf("%s%u", m ? "," : "", ranked[k].candidate.features[m]);
        std::printf("}\n");
    }
    const auto scores = pid::pairwise_strengths(ledger, data.features());
    std::printf("pairwise AUC %.4f\n", pid::roc_auc(scores, pid::ground_truth_pairs(5)));
}
