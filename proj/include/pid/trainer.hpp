#pragma once

// Small ReLU MLP regressor: Adam on MSE + l1 * sum|W|, mini-batches,
// early stopping on a validation split.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pid/dataset.hpp"
#include "pid/error.hpp"
#include "pid/format.hpp"
#include "pid/model_io.hpp"

namespace pid {

struct TrainConfig {
    std::vector<std::size_t> hidden{140, 100, 60, 20};
    double lr = 5e-3;
    double l1 = 5e-5;
    std::size_t batch = 100;
    std::size_t max_epochs = 500;
    std::size_t early_stop_rounds = 100;
    std::uint64_t seed = 0;
    /// Validation and test each take this fraction; the rest trains.
    double val_fraction = 1.0 / 3.0;

    void validate() const {
        if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be positive");
        if (!(l1 >= 0.0) || !std::isfinite(l1)) throw InvalidArgument("l1 strength must be >= 0");
        if (batch == 0) throw InvalidArgument("batch size must be >= 1");
        if (max_epochs == 0) throw InvalidArgument("max_epochs must be >= 1");
        if (early_stop_rounds == 0) throw InvalidArgument("early_stop_rounds must be >= 1");
        for (auto w : hidden)
            if (w == 0) throw InvalidArgument("hidden widths must be >= 1");
        if (!(val_fraction > 0.0 && val_fraction < 0.5)) throw InvalidArgument("val_fraction must lie in (0, 0.5)");
    }
};

struct TrainLog {
    std::vector<double> train_mse;
    std::vector<double> val_mse;
    std::size_t best_epoch = 0;  // 1-based
    double best_val_mse = std::numeric_limits<double>::infinity();
    double test_mse = std::numeric_limits<double>::quiet_NaN();
    std::string note = "inputs and targets used as generated (no standardization)";

    std::size_t epochs() const noexcept { return val_mse.size(); }

    std::string to_csv() const {
        std::string out = "# " + note + "\n";
        out += "# best_epoch=" + std::to_string(best_epoch) + " best_val_mse=" + fmt::real(best_val_mse) +
               " test_mse=" + (std::isfinite(test_mse) ? fmt::real(test_mse) : std::string("nan")) + "\n";
        out += "epoch,train_mse,val_mse\n";
        for (std::size_t e = 0; e < val_mse.size(); ++e)
            out += std::to_string(e + 1) + "," + fmt::real(train_mse[e]) + "," + fmt::real(val_mse[e]) + "\n";
        return out;
    }
};

struct TrainResult {
    NetworkSpec net;
    TrainLog log;
};

/// Loss value and gradients with respect to every weight and bias.
struct Gradients {
    double loss = 0.0;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

namespace detail {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using ERow = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Working copy of an MLP with its forward/backward buffers.
class Mlp {
public:
    std::vector<EMat> W;
    std::vector<ERow> b;

    explicit Mlp(const std::vector<std::size_t>& widths) {
        for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
            W.emplace_back(EMat::Zero(static_cast<Eigen::Index>(widths[k]), static_cast<Eigen::Index>(widths[k + 1])));
            b.emplace_back(ERow::Zero(static_cast<Eigen::Index>(widths[k + 1])));
        }
        dW.resize(W.size());
        db.resize(b.size());
        Z.resize(W.size());
        A.resize(W.size());
    }

    static Mlp from_network(const NetworkSpec& net) {
        Mlp m(net.widths());
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            const auto& L = net.layers[k];
            m.W[k] = Eigen::Map<const RowMat>(L.data.data(), static_cast<Eigen::Index>(L.rows),
                                              static_cast<Eigen::Index>(L.cols));
            if (net.has_biases())
                m.b[k] = Eigen::Map<const ERow>(net.biases[k].data(), static_cast<Eigen::Index>(net.biases[k].size()));
        }
        return m;
    }

    NetworkSpec to_network() const {
        NetworkSpec net;
        for (std::size_t k = 0; k < W.size(); ++k) {
            Matrix m(static_cast<std::size_t>(W[k].rows()), static_cast<std::size_t>(W[k].cols()));
            Eigen::Map<RowMat>(m.data.data(), W[k].rows(), W[k].cols()) = W[k];
            net.layers.push_back(std::move(m));
            net.biases.emplace_back(b[k].data(), b[k].data() + b[k].size());
        }
        return net;
    }

    // Returns the (n x 1) output; fills Z/A for a subsequent backward().
    const EMat& forward(const EMat& X) {
        const EMat* in = &X;
        for (std::size_t k = 0; k < W.size(); ++k) {
            Z[k].noalias() = (*in) * W[k];
            Z[k].rowwise() += b[k];
            if (k + 1 < W.size()) {
                A[k] = Z[k].cwiseMax(0.0);
                in = &A[k];
            }
        }
        return Z.back();
    }

    // Mean squared error of the last forward() against y.
    double forward_mse(const EMat& X, const Eigen::VectorXd& y) {
        const EMat& out = forward(X);
        return (out.col(0) - y).squaredNorm() / static_cast<double>(y.size());
    }

    // Gradients of mean((out - y)^2) + l1 * sum|W| after forward(X).
    void backward(const EMat& X, const Eigen::VectorXd& y, double l1) {
        const double n = static_cast<double>(y.size());
        G = Z.back();
        G.col(0) -= y;
        G *= 2.0 / n;
        for (std::size_t k = W.size(); k-- > 0;) {
            const EMat& in = k == 0 ? X : A[k - 1];
            dW[k].noalias() = in.transpose() * G;
            db[k] = G.colwise().sum();
            if (l1 > 0.0) dW[k] += l1 * W[k].unaryExpr([](double w) { return double((w > 0.0) - (w < 0.0)); });
            if (k > 0) {
                Gprev.noalias() = G * W[k].transpose();
                G = Gprev.cwiseProduct((Z[k - 1].array() > 0.0).cast<double>().matrix());
            }
        }
    }

    double l1_norm() const {
        double s = 0.0;
        for (const auto& w : W) s += w.cwiseAbs().sum();
        return s;
    }

    std::vector<EMat> dW;
    std::vector<ERow> db;

private:
    std::vector<EMat> Z, A;
    EMat G, Gprev;
};

inline EMat rows_to_eigen(const Matrix& X, std::size_t begin, std::size_t end) {
    EMat out(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(X.cols));
    for (std::size_t i = begin; i < end; ++i)
        for (std::size_t j = 0; j < X.cols; ++j) out(static_cast<Eigen::Index>(i - begin), static_cast<Eigen::Index>(j)) = X.at(i, j);
    return out;
}

inline Eigen::VectorXd targets_to_eigen(std::span<const double> y, std::size_t begin, std::size_t end) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) out(static_cast<Eigen::Index>(i - begin)) = y[i];
    return out;
}

struct Split {
    std::size_t train_end, val_end, n;
};

inline Split split_thirds(std::size_t n, double val_fraction) {
    const auto held = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction));
    return {n - 2 * held, n - held, n};
}

}  // namespace detail

/// Loss mean((f(x) - y)^2) + l1 * sum|W| and its gradients; the l1 term uses
/// sign(0) = 0 and does not touch biases.
inline Gradients loss_gradient(const NetworkSpec& net, const DatasetSpec& data, double l1) {
    net.validate();
    data.validate();
    if (data.features() != net.input_dim()) throw ShapeMismatch("dataset width does not match network input");
    auto mlp = detail::Mlp::from_network(net);
    const auto X = detail::rows_to_eigen(data.X, 0, data.samples());
    const auto y = detail::targets_to_eigen(data.y, 0, data.samples());
    Gradients g;
    g.loss = mlp.forward_mse(X, y) + l1 * mlp.l1_norm();
    mlp.backward(X, y, l1);
    for (std::size_t k = 0; k < mlp.W.size(); ++k) {
        Matrix m(static_cast<std::size_t>(mlp.dW[k].rows()), static_cast<std::size_t>(mlp.dW[k].cols()));
        Eigen::Map<detail::RowMat>(m.data.data(), mlp.dW[k].rows(), mlp.dW[k].cols()) = mlp.dW[k];
        g.weights.push_back(std::move(m));
        g.biases.emplace_back(mlp.db[k].data(), mlp.db[k].data() + mlp.db[k].size());
    }
    return g;
}

/// Mean squared error of the network over every sample of `data`.
inline double mse(const NetworkSpec& net, const DatasetSpec& data) {
    if (data.features() != net.input_dim())
        throw ShapeMismatch("dataset has " + std::to_string(data.features()) + " features, network expects " +
                            std::to_string(net.input_dim()));
    if (net.output_dim() != 1) throw ShapeMismatch("mse expects a single-output network");
    if (data.samples() == 0) return 0.0;
    auto mlp = detail::Mlp::from_network(net);
    return mlp.forward_mse(detail::rows_to_eigen(data.X, 0, data.samples()),
                           detail::targets_to_eigen(data.y, 0, data.samples()));
}

/// Trains on the first part of `data` and early-stops on the next part; the
/// last part is held out for the reported test MSE. Returns the weights of
/// the best validation epoch.
inline TrainResult train_mlp(const DatasetSpec& data, const TrainConfig& cfg) {
    cfg.validate();
    data.validate();
    const auto split = detail::split_thirds(data.samples(), cfg.val_fraction);
    if (split.train_end == 0 || split.val_end == split.train_end)
        throw InvalidArgument("dataset too small to split into train/validation/test");

    std::vector<std::size_t> widths{data.features()};
    widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    widths.push_back(1);

    std::mt19937_64 rng(cfg.seed);
    detail::Mlp mlp(widths);
    for (auto& w : mlp.W) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> init(-limit, limit);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = init(rng);
    }

    const auto Xtr = detail::rows_to_eigen(data.X, 0, split.train_end);
    const auto ytr = detail::targets_to_eigen(data.y, 0, split.train_end);
    const auto Xva = detail::rows_to_eigen(data.X, split.train_end, split.val_end);
    const auto yva = detail::targets_to_eigen(data.y, split.train_end, split.val_end);

    // Adam state.
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<detail::EMat> mW, vW;
    std::vector<detail::ERow> mb, vb;
    for (std::size_t k = 0; k < mlp.W.size(); ++k) {
        mW.push_back(detail::EMat::Zero(mlp.W[k].rows(), mlp.W[k].cols()));
        vW.push_back(mW.back());
        mb.push_back(detail::ERow::Zero(mlp.b[k].size()));
        vb.push_back(mb.back());
    }
    double beta1_t = 1.0, beta2_t = 1.0;

    TrainLog log;
    std::vector<detail::EMat> best_W = mlp.W;
    std::vector<detail::ERow> best_b = mlp.b;
    std::size_t since_best = 0;
    std::vector<std::size_t> order(split.train_end);
    std::iota(order.begin(), order.end(), std::size_t{0});
    detail::EMat Xb;
    Eigen::VectorXd yb;
    const auto d = static_cast<Eigen::Index>(data.features());

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double train_sse = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch);
            const auto B = static_cast<Eigen::Index>(stop - start);
            Xb.resize(B, d);
            yb.resize(B);
            for (Eigen::Index r = 0; r < B; ++r) {
                const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(r)]);
                Xb.row(r) = Xtr.row(src);
                yb(r) = ytr(src);
            }
            const double batch_mse = mlp.forward_mse(Xb, yb);
            if (!std::isfinite(batch_mse))
                throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                                       std::to_string(start) + " (lr=" + fmt::real(cfg.lr) + ")");
            train_sse += batch_mse * static_cast<double>(B);
            mlp.backward(Xb, yb, cfg.l1);

            beta1_t *= beta1;
            beta2_t *= beta2;
            const double step = cfg.lr * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
            for (std::size_t k = 0; k < mlp.W.size(); ++k) {
                mW[k] = beta1 * mW[k] + (1.0 - beta1) * mlp.dW[k];
                vW[k] = beta2 * vW[k] + (1.0 - beta2) * mlp.dW[k].cwiseProduct(mlp.dW[k]);
                mlp.W[k].array() -= step * mW[k].array() / (vW[k].array().sqrt() + eps);
                mb[k] = beta1 * mb[k] + (1.0 - beta1) * mlp.db[k];
                vb[k] = beta2 * vb[k] + (1.0 - beta2) * mlp.db[k].cwiseProduct(mlp.db[k]);
                mlp.b[k].array() -= step * mb[k].array() / (vb[k].array().sqrt() + eps);
            }
        }
        const double val = mlp.forward_mse(Xva, yva);
        if (!std::isfinite(val))
            throw TrainingDiverged("non-finite validation loss at epoch " + std::to_string(epoch));
        log.train_mse.push_back(train_sse / static_cast<double>(order.size()));
        log.val_mse.push_back(val);
        if (val < log.best_val_mse) {
            log.best_val_mse = val;
            log.best_epoch = epoch;
            best_W = mlp.W;
            best_b = mlp.b;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_rounds) {
            break;
        }
    }

    mlp.W = std::move(best_W);
    mlp.b = std::move(best_b);
    TrainResult result{mlp.to_network(), std::move(log)};
    if (split.val_end < split.n)
        result.log.test_mse = mlp.forward_mse(detail::rows_to_eigen(data.X, split.val_end, split.n),
                                               detail::targets_to_eigen(data.y, split.val_end, split.n));
    result.net.meta = {{"arch", widths},
                       {"best_epoch", result.log.best_epoch},
                       {"l1", cfg.l1},
                       {"lr", cfg.lr},
                       {"seed", cfg.seed},
                       {"source", data.provenance}};
    return result;
}

}  // namespace pid
