// Builds the 4-2-1 network of the worked birth/death example and prints its
// ranked ledger and per-unit chains.

#include <cstdio>

#include "pid/pid.hpp"

int main() {
    // w'_k = (16 - k) / 16; edge order as in the example:
    // x1-h1, h1-y, x4-h2, x2-h1, x3-h2, h2-y, x3-h1, x2-h2, x4-h1, x1-h2
    auto w = [](int k) { return (16.0 - k) / 16.0; };
    pid::NetworkSpec net;
    net.layers.emplace_back(4, 2);
    net.layers.emplace_back(2, 1);
    auto& W1 = net.layers[0];
    auto& W2 = net.layers[1];
    W1.at(0, 0) = w(0);
    W2.at(0, 0) = w(1);
    W1.at(3, 1) = w(2);
    W1.at(1, 0) = w(3);
    W1.at(2, 1) = w(4);
    W2.at(1, 0) = w(5);
    W1.at(2, 0) = w(6);
    W1.at(1, 1) = w(7);
    W1.at(3, 0) = w(8);
    W1.at(0, 1) = w(9);

    const auto f = pid::build_filtration(net);
    for (const auto& st : pid::trace_neurons(f)) {
        std::printf("h%zu:\n", st.neuron + 1);
        for (const auto& link : st.chain) {
            std::printf("  {");
            for (std::size_t k = 0; k < link.features.size(); ++k)
                std::printf("%sx%u", k ? "," : "", link.features[k] + 1);
            std::printf("} born %.4f dies %.4f\n", link.birth, link.death);
        }
    }
    std::printf("%s", pid::ledger_to_json(pid::detect(f)).c_str());
}
