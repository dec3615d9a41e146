#include "primix/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace primix {

namespace {

void push_block(std::vector<double*>& out, double* data, Index n) {
    for (Index i = 0; i < n; ++i) out.push_back(data + i);
}

}  // namespace

std::vector<double*> param_ptrs(MlpParams& p) {
    std::vector<double*> out;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        push_block(out, p.weights[l].data(), p.weights[l].size());
        push_block(out, p.biases[l].data(), p.biases[l].size());
    }
    return out;
}

std::vector<double*> grad_ptrs(MlpGrads& g) {
    std::vector<double*> out;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        push_block(out, g.weights[l].data(), g.weights[l].size());
        push_block(out, g.biases[l].data(), g.biases[l].size());
    }
    return out;
}

std::vector<double*> param_ptrs(LstmParams& p) {
    std::vector<double*> out;
    for (auto& cell : p.cells) {
        push_block(out, cell.w_x.data(), cell.w_x.size());
        push_block(out, cell.w_h.data(), cell.w_h.size());
        push_block(out, cell.b.data(), cell.b.size());
    }
    push_block(out, p.w_out.data(), p.w_out.size());
    push_block(out, p.b_out.data(), p.b_out.size());
    return out;
}

std::vector<double*> grad_ptrs(LstmGrads& g) {
    std::vector<double*> out;
    for (std::size_t l = 0; l < g.w_x.size(); ++l) {
        push_block(out, g.w_x[l].data(), g.w_x[l].size());
        push_block(out, g.w_h[l].data(), g.w_h[l].size());
        push_block(out, g.b[l].data(), g.b[l].size());
    }
    push_block(out, g.w_out.data(), g.w_out.size());
    push_block(out, g.b_out.data(), g.b_out.size());
    return out;
}

void adam_step(const std::vector<double*>& params, const std::vector<double*>& grads,
               AdamState& state, const TrainConfig& cfg) {
    if (params.size() != grads.size() ||
        static_cast<Index>(params.size()) != state.m.size())
        throw std::invalid_argument("adam_step: size mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = *grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        *params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

double mse(const Vec& pred, const Vec& target) {
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

std::vector<double> train_mlp(MlpParams& model, const PairDataset& data,
                              const TrainConfig& cfg) {
    if (data.size() == 0)
        throw std::invalid_argument("train_mlp: empty dataset");
    if (data.inputs.cols() != model.input_size() ||
        data.targets.cols() != model.output_size())
        throw std::invalid_argument("train_mlp: shape mismatch");

    auto params = param_ptrs(model);
    MlpGrads grads = MlpGrads::zeros_like(model);
    auto gptrs = grad_ptrs(grads);
    AdamState adam(static_cast<Index>(params.size()));
    Rng rng(derive_seed({cfg.seed, 0x6d6c70ull}));

    std::vector<Index> order(data.size());
    std::iota(order.begin(), order.end(), Index{0});

    std::vector<double> history;
    MlpCache cache;
    const double out_dim = static_cast<double>(model.output_size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0;
        Index n_batches = 0;
        for (Index start = 0; start < data.size(); start += cfg.batch_size) {
            const Index count = std::min<Index>(cfg.batch_size, data.size() - start);
            grads.set_zero();
            double batch_loss = 0;
            for (Index b = 0; b < count; ++b) {
                const Index idx = order[start + b];
                const Vec x = data.inputs.row(idx).transpose();
                const Vec y = data.targets.row(idx).transpose();
                const Vec pred = mlp_forward(model, x, cache);
                const Vec err = pred - y;
                batch_loss += err.squaredNorm() / out_dim;
                const Vec dy = 2.0 * err / (out_dim * static_cast<double>(count));
                mlp_backward(model, cache, dy, &grads);
            }
            batch_loss /= static_cast<double>(count);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged");
            adam_step(params, gptrs, adam, cfg);
            epoch_loss += batch_loss;
            ++n_batches;
        }
        history.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return history;
}

std::vector<double> train_lstm(LstmParams& model, const std::vector<SeqSample>& data,
                               const TrainConfig& cfg) {
    if (data.empty())
        throw std::invalid_argument("train_lstm: empty dataset");

    auto params = param_ptrs(model);
    LstmGrads grads = LstmGrads::zeros_like(model);
    auto gptrs = grad_ptrs(grads);
    AdamState adam(static_cast<Index>(params.size()));
    Rng rng(derive_seed({cfg.seed, 0x6c73746dull}));

    std::vector<Index> order(data.size());
    std::iota(order.begin(), order.end(), Index{0});

    std::vector<double> history;
    const double out_dim = static_cast<double>(model.output_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0;
        Index n_batches = 0;
        for (std::size_t start = 0; start < data.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count =
                std::min<std::size_t>(cfg.batch_size, data.size() - start);
            grads.set_zero();
            double batch_loss = 0;
            for (std::size_t b = 0; b < count; ++b) {
                const SeqSample& seq = data[order[start + b]];
                const std::size_t steps = seq.inputs.size();
                LstmState state;
                std::vector<LstmStepCache> caches(steps);
                std::vector<Vec> dys(steps);
                double seq_loss = 0;
                for (std::size_t t = 0; t < steps; ++t) {
                    const Vec pred = lstm_step(model, state, seq.inputs[t], caches[t]);
                    const Vec err = pred - seq.targets[t];
                    seq_loss += err.squaredNorm() / out_dim;
                    dys[t] = 2.0 * err /
                             (out_dim * static_cast<double>(steps) * static_cast<double>(count));
                }
                seq_loss /= static_cast<double>(steps);
                batch_loss += seq_loss;
                lstm_backward(model, caches, dys, &grads);
            }
            batch_loss /= static_cast<double>(count);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged");
            adam_step(params, gptrs, adam, cfg);
            epoch_loss += batch_loss;
            ++n_batches;
        }
        history.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return history;
}

double gradient_check(const std::vector<double*>& params, const Vec& analytic,
                      const std::function<double()>& loss_fn, int n_probes, Rng& rng) {
    if (static_cast<Index>(params.size()) != analytic.size())
        throw std::invalid_argument("gradient_check: size mismatch");
    const double h = 1e-5;
    std::vector<std::size_t> indices(params.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    shuffle(indices, rng);
    const std::size_t probes =
        std::min<std::size_t>(static_cast<std::size_t>(n_probes), indices.size());

    double max_rel = 0;
    for (std::size_t k = 0; k < probes; ++k) {
        double* p = params[indices[k]];
        const double saved = *p;
        *p = saved + h;
        const double lp = loss_fn();
        *p = saved - h;
        const double lm = loss_fn();
        *p = saved;
        const double numeric = (lp - lm) / (2 * h);
        const double rel = std::abs(analytic[static_cast<Index>(indices[k])] - numeric) /
                           std::max(1e-8, std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

double mlp_gradient_check(MlpParams& model, const PairDataset& data, int n_probes,
                          std::uint64_t seed) {
    const double denom =
        static_cast<double>(data.size()) * static_cast<double>(model.output_size());
    auto loss_fn = [&]() {
        double loss = 0;
        for (Index i = 0; i < data.size(); ++i)
            loss += (mlp_forward(model, data.inputs.row(i).transpose()) -
                     data.targets.row(i).transpose())
                        .squaredNorm();
        return loss / denom;
    };

    MlpGrads grads = MlpGrads::zeros_like(model);
    MlpCache cache;
    for (Index i = 0; i < data.size(); ++i) {
        const Vec pred = mlp_forward(model, data.inputs.row(i).transpose(), cache);
        const Vec dy = 2.0 * (pred - data.targets.row(i).transpose()) / denom;
        mlp_backward(model, cache, dy, &grads);
    }

    auto params = param_ptrs(model);
    auto gptrs = grad_ptrs(grads);
    Vec analytic(static_cast<Index>(gptrs.size()));
    for (std::size_t i = 0; i < gptrs.size(); ++i)
        analytic[static_cast<Index>(i)] = *gptrs[i];

    Rng rng(derive_seed({seed, 0x67636d6cull}));
    return gradient_check(params, analytic, loss_fn, n_probes, rng);
}

double lstm_gradient_check(LstmParams& model, const SeqSample& seq, int n_probes,
                           std::uint64_t seed) {
    const std::size_t steps = seq.inputs.size();
    const double denom =
        static_cast<double>(steps) * static_cast<double>(model.output_size);
    auto loss_fn = [&]() {
        LstmState state;
        double loss = 0;
        for (std::size_t t = 0; t < steps; ++t)
            loss += (lstm_step(model, state, seq.inputs[t]) - seq.targets[t]).squaredNorm();
        return loss / denom;
    };

    LstmGrads grads = LstmGrads::zeros_like(model);
    LstmState state;
    std::vector<LstmStepCache> caches(steps);
    std::vector<Vec> dys(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const Vec pred = lstm_step(model, state, seq.inputs[t], caches[t]);
        dys[t] = 2.0 * (pred - seq.targets[t]) / denom;
    }
    lstm_backward(model, caches, dys, &grads);

    auto params = param_ptrs(model);
    auto gptrs = grad_ptrs(grads);
    Vec analytic(static_cast<Index>(gptrs.size()));
    for (std::size_t i = 0; i < gptrs.size(); ++i)
        analytic[static_cast<Index>(i)] = *gptrs[i];

    Rng rng(derive_seed({seed, 0x67636c73ull}));
    return gradient_check(params, analytic, loss_fn, n_probes, rng);
}

}  // namespace primix
