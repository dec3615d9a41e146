#pragma once

#include <cstdint>
#include <vector>

#include "primix/types.hpp"

namespace primix {

/// Convex blend weights over lower-layer candidates; nonnegative, sums to 1.
using ProportionVector = Vec;

/// Coefficients of the per-channel cost terms (angle, velocity, torque).
struct CostWeights {
    double alpha = 1.0;
    double beta = 0.1;
    double gamma = 0.1;

    bool valid() const {
        return alpha >= 0 && beta >= 0 && gamma >= 0 && alpha + beta + gamma > 0;
    }
};

/// Whether candidate cost looks at the first predicted step only or averages
/// over the whole horizon window.
enum class CostWindow { kFirstStep, kFullWindow };

/// Candidate generation and cross-entropy weighting parameters.
struct CEConfig {
    double rho = 0.05;              // temperature of exp(-cost/rho)
    int top_m = 50;                 // weighted average restricted to the M best
    int samples_per_primitive = 10; // first replica stays noise-free
    double noise_sigma_theta = 0.02;  // [rad]
    double noise_sigma_omega = 0.02;  // [rad/s]
    double noise_sigma_tau = 0.02;    // [N·m]
    CostWindow cost_window = CostWindow::kFirstStep;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency
};

/// Noise-perturbed predicted leader sequences plus their scalar costs.
/// sequences[m] has one row per horizon step.
struct CandidateBatch {
    std::vector<Mat> sequences;
    Vec costs;

    Index size() const { return static_cast<Index>(sequences.size()); }
};

/// Max-subtracted exponential normalization.
ProportionVector softmax(const Vec& logits);

/// Cross-entropy weights over candidate costs: the top_m lowest-cost samples
/// (ties broken toward the lower index) get weight proportional to
/// exp(-cost/rho), every other sample gets exactly zero. Computed with
/// min-shifted exponents. Throws std::invalid_argument when fewer than top_m
/// costs are given or any cost is non-finite.
ProportionVector ce_weights(const Vec& costs, const CEConfig& cfg);

/// Weighted per-channel MSE between a candidate follower sequence and the
/// reference follower sequence (rows = steps, cols = flattened 3D state).
/// kFirstStep evaluates row 0 only; kFullWindow averages over all rows.
double compute_cost(const Mat& candidate_f, const Mat& reference_f, const CostWeights& w,
                    CostWindow window = CostWindow::kFirstStep);

/// Shannon entropy of a proportion vector (natural log, 0·log0 = 0).
double weight_entropy(const ProportionVector& w);

/// Effective sample count 1 / sum(w^2).
double effective_samples(const ProportionVector& w);

}  // namespace primix
