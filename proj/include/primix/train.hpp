#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "primix/lstm.hpp"
#include "primix/mlp.hpp"
#include "primix/types.hpp"

namespace primix {

struct TrainConfig {
    double learning_rate = 5e-4;
    int batch_size = 16;
    int epochs = 1000;
    std::uint64_t seed = 0;
    // Adam moments
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    Vec m, v;
    long t = 0;

    explicit AdamState(Index n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
};

/// Pointers to every parameter coefficient in a fixed traversal order.
/// The matching grad view uses the same order.
std::vector<double*> param_ptrs(MlpParams& p);
std::vector<double*> grad_ptrs(MlpGrads& g);
std::vector<double*> param_ptrs(LstmParams& p);
std::vector<double*> grad_ptrs(LstmGrads& g);

void adam_step(const std::vector<double*>& params, const std::vector<double*>& grads,
               AdamState& state, const TrainConfig& cfg);

/// Supervised pairs with rows as samples.
struct PairDataset {
    Mat inputs;   // n x in
    Mat targets;  // n x out
    Index size() const { return inputs.rows(); }
};

/// One training sequence for a recurrent model.
struct SeqSample {
    std::vector<Vec> inputs;
    std::vector<Vec> targets;
};

/// Minibatch Adam on mean-squared error; pairs are reshuffled every epoch
/// with the seeded stream. Returns the per-epoch mean loss. Throws
/// std::runtime_error("training diverged") on a non-finite loss.
std::vector<double> train_mlp(MlpParams& model, const PairDataset& data,
                              const TrainConfig& cfg);

/// Same contract for sequence data: full backprop through time per sequence,
/// minibatched over sequences.
std::vector<double> train_lstm(LstmParams& model, const std::vector<SeqSample>& data,
                               const TrainConfig& cfg);

/// Central-difference check of an analytic gradient on n_probes randomly
/// chosen parameters. Returns max |analytic - numeric| / max(1e-8, |numeric|).
double gradient_check(const std::vector<double*>& params, const Vec& analytic,
                      const std::function<double()>& loss_fn, int n_probes, Rng& rng);

/// MSE gradient checks for the two architectures over a fixed dataset.
double mlp_gradient_check(MlpParams& model, const PairDataset& data, int n_probes,
                          std::uint64_t seed);
double lstm_gradient_check(LstmParams& model, const SeqSample& seq, int n_probes,
                           std::uint64_t seed);

/// Mean squared error over all coefficients of (pred - target).
double mse(const Vec& pred, const Vec& target);

}  // namespace primix
