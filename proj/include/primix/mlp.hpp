#pragma once

#include <vector>

#include "primix/rng.hpp"
#include "primix/types.hpp"

namespace primix {

/// Fully connected network: tanh on hidden layers, identity on the output
/// layer. weights[l] maps layer l activations (in) to layer l+1 (out).
struct MlpParams {
    std::vector<int> layer_sizes;  // [in, hidden..., out]
    std::vector<Mat> weights;      // out x in per layer
    std::vector<Vec> biases;

    /// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, biases zero.
    static MlpParams init(const std::vector<int>& sizes, Rng& rng);

    Index input_size() const { return layer_sizes.front(); }
    Index output_size() const { return layer_sizes.back(); }
    Index layer_count() const { return static_cast<Index>(weights.size()); }
};

Vec mlp_forward(const MlpParams& params, const Vec& x);

/// Per-layer activations kept for backprop. act[0] is the input.
struct MlpCache {
    std::vector<Vec> act;
};

Vec mlp_forward(const MlpParams& params, const Vec& x, MlpCache& cache);

/// Gradient buffers shaped like the parameters.
struct MlpGrads {
    std::vector<Mat> weights;
    std::vector<Vec> biases;

    static MlpGrads zeros_like(const MlpParams& params);
    void set_zero();
};

/// Backpropagates dLoss/dOutput through the cached forward pass. Returns
/// dLoss/dInput; parameter gradients are accumulated into *grads when given
/// (pass nullptr for a frozen network).
Vec mlp_backward(const MlpParams& params, const MlpCache& cache, const Vec& dy,
                 MlpGrads* grads);

}  // namespace primix
