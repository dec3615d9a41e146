#include "primix/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace primix {

ProportionVector softmax(const Vec& logits) {
    if (logits.size() == 0)
        throw std::invalid_argument("softmax: empty logits");
    const double shift = logits.maxCoeff();
    Vec w = (logits.array() - shift).exp().matrix();
    return w / w.sum();
}

ProportionVector ce_weights(const Vec& costs, const CEConfig& cfg) {
    const Index n = costs.size();
    if (cfg.top_m < 1 || n < cfg.top_m)
        throw std::invalid_argument("ce_weights: need at least top_m costs");
    if (!costs.allFinite())
        throw std::invalid_argument("ce_weights: no viable samples");
    if (cfg.rho <= 0)
        throw std::invalid_argument("ce_weights: rho must be positive");

    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index a, Index b) { return costs[a] < costs[b]; });
    idx.resize(cfg.top_m);

    const double shift = costs[idx.front()];  // minimum selected cost
    Vec w = Vec::Zero(n);
    double sum = 0;
    for (Index i : idx) {
        const double e = std::exp(-(costs[i] - shift) / cfg.rho);
        w[i] = e;
        sum += e;
    }
    // sum >= 1 because the minimum-cost term contributes exp(0)
    return w / sum;
}

double compute_cost(const Mat& candidate_f, const Mat& reference_f, const CostWeights& w,
                    CostWindow window) {
    if (candidate_f.rows() != reference_f.rows() ||
        candidate_f.cols() != reference_f.cols())
        throw std::invalid_argument("compute_cost: length mismatch");
    if (candidate_f.rows() < 1 || candidate_f.cols() % 3 != 0)
        throw std::invalid_argument("compute_cost: bad sequence shape");
    if (!w.valid())
        throw std::invalid_argument("compute_cost: invalid weights");

    const Index rows = window == CostWindow::kFirstStep ? 1 : candidate_f.rows();
    const Index d = candidate_f.cols() / 3;
    const Mat diff = candidate_f.topRows(rows) - reference_f.topRows(rows);
    const double denom = static_cast<double>(rows * d);
    const double l_theta = diff.middleCols(0, d).squaredNorm() / denom;
    const double l_omega = diff.middleCols(d, d).squaredNorm() / denom;
    const double l_tau = diff.middleCols(2 * d, d).squaredNorm() / denom;
    return w.alpha * l_theta + w.beta * l_omega + w.gamma * l_tau;
}

double weight_entropy(const ProportionVector& w) {
    double h = 0;
    for (Index i = 0; i < w.size(); ++i)
        if (w[i] > 0) h -= w[i] * std::log(w[i]);
    return h;
}

double effective_samples(const ProportionVector& w) {
    const double s = w.squaredNorm();
    return s > 0 ? 1.0 / s : 0.0;
}

}  // namespace primix
