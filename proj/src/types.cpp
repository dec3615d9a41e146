#include "primix/types.hpp"

#include <stdexcept>

namespace primix {

Vec flatten(const RobotState& state) {
    const Index d = state.dof();
    Vec out(3 * d);
    out.segment(0, d) = state.theta;
    out.segment(d, d) = state.omega;
    out.segment(2 * d, d) = state.tau;
    return out;
}

RobotState unflatten(const Vec& v) {
    if (v.size() % 3 != 0)
        throw std::invalid_argument("unflatten: length not a multiple of 3");
    const Index d = v.size() / 3;
    return RobotState(v.segment(0, d), v.segment(d, d), v.segment(2 * d, d));
}

NormStats compute_norm_stats(const std::vector<Trajectory>& trajs) {
    Index total = 0;
    for (const auto& t : trajs) total += t.length();
    if (trajs.empty() || total < 2)
        throw std::invalid_argument("no data");

    const Index dim = 3 * trajs.front().dof();
    Vec sum = Vec::Zero(dim);
    for (const auto& t : trajs)
        for (const auto& s : t.states)
            sum += flatten(s);
    const Vec mean = sum / static_cast<double>(total);

    Vec sq = Vec::Zero(dim);
    for (const auto& t : trajs)
        for (const auto& s : t.states) {
            const Vec d = flatten(s) - mean;
            sq += d.cwiseProduct(d);
        }
    Vec stddev = (sq / static_cast<double>(total)).cwiseSqrt();
    stddev = stddev.cwiseMax(NormStats::kStdFloor);
    return NormStats{mean, stddev};
}

Vec normalize(const Vec& v, const NormStats& stats) {
    if (v.size() != stats.mean.size())
        throw std::invalid_argument("normalize: length mismatch");
    return (v - stats.mean).cwiseQuotient(stats.stddev);
}

Vec denormalize(const Vec& v, const NormStats& stats) {
    if (v.size() != stats.mean.size())
        throw std::invalid_argument("denormalize: length mismatch");
    return v.cwiseProduct(stats.stddev) + stats.mean;
}

}  // namespace primix
