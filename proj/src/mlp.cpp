#include "primix/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace primix {

MlpParams MlpParams::init(const std::vector<int>& sizes, Rng& rng) {
    if (sizes.size() < 2)
        throw std::invalid_argument("mlp: need at least input and output sizes");
    MlpParams p;
    p.layer_sizes = sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Mat w(sizes[l + 1], fan_in);
        for (Index i = 0; i < w.rows(); ++i)
            for (Index j = 0; j < w.cols(); ++j)
                w(i, j) = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Vec::Zero(sizes[l + 1]));
    }
    return p;
}

Vec mlp_forward(const MlpParams& params, const Vec& x) {
    MlpCache cache;
    return mlp_forward(params, x, cache);
}

Vec mlp_forward(const MlpParams& params, const Vec& x, MlpCache& cache) {
    if (x.size() != params.input_size())
        throw std::invalid_argument("mlp_forward: input size mismatch");
    cache.act.resize(params.weights.size() + 1);
    cache.act[0] = x;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        Vec z = params.weights[l] * cache.act[l] + params.biases[l];
        const bool hidden = l + 1 < params.weights.size();
        cache.act[l + 1] = hidden ? z.array().tanh().matrix() : std::move(z);
    }
    return cache.act.back();
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
    MlpGrads g;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        g.weights.push_back(Mat::Zero(params.weights[l].rows(), params.weights[l].cols()));
        g.biases.push_back(Vec::Zero(params.biases[l].size()));
    }
    return g;
}

void MlpGrads::set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

Vec mlp_backward(const MlpParams& params, const MlpCache& cache, const Vec& dy,
                 MlpGrads* grads) {
    Vec delta = dy;
    for (std::size_t l = params.weights.size(); l-- > 0;) {
        const bool hidden = l + 1 < params.weights.size();
        if (hidden) {
            // tanh'(z) = 1 - tanh(z)^2, and act holds tanh(z)
            delta = delta.cwiseProduct(
                (1.0 - cache.act[l + 1].array().square()).matrix());
        }
        if (grads) {
            grads->weights[l].noalias() += delta * cache.act[l].transpose();
            grads->biases[l] += delta;
        }
        delta = params.weights[l].transpose() * delta;
    }
    return delta;
}

}  // namespace primix
