#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace primix {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// One value per joint; units depend on the channel (rad, rad/s or N·m).
using JointVector = Vec;

/// Full state of one robot at one tick, channel order theta, omega, tau.
struct RobotState {
    JointVector theta;  // joint angles [rad]
    JointVector omega;  // joint velocities [rad/s]
    JointVector tau;    // response torque [N·m]

    RobotState() = default;
    explicit RobotState(Index dof)
        : theta(Vec::Zero(dof)), omega(Vec::Zero(dof)), tau(Vec::Zero(dof)) {}
    RobotState(JointVector th, JointVector om, JointVector ta)
        : theta(std::move(th)), omega(std::move(om)), tau(std::move(ta)) {}

    Index dof() const { return theta.size(); }
    bool finite() const {
        return theta.allFinite() && omega.allFinite() && tau.allFinite();
    }
};

/// Uniformly sampled state sequence. Timestamps are implicit: row i is at i*dt.
struct Trajectory {
    double dt = 0.01;  // sampling period [s]
    std::vector<RobotState> states;

    Index length() const { return static_cast<Index>(states.size()); }
    Index dof() const { return states.empty() ? 0 : states.front().dof(); }
};

/// Synchronized leader/follower pair recorded in one bilateral-control session.
struct Demonstration {
    std::string id;
    Trajectory leader;
    Trajectory follower;

    Index length() const { return leader.length(); }
    Index dof() const { return leader.dof(); }
};

/// Per-dimension mean and standard deviation of flattened states.
/// Std entries are floored at kStdFloor so constant channels stay divisible.
struct NormStats {
    Vec mean;
    Vec stddev;

    static constexpr double kStdFloor = 1e-6;
};

/// Flattens a state to a length-3*dof vector in fixed order [theta, omega, tau].
Vec flatten(const RobotState& state);

/// Inverse of flatten. The vector length must be a multiple of 3.
RobotState unflatten(const Vec& v);

/// Per-dimension mean and population standard deviation over all flattened
/// states of all trajectories. Throws std::invalid_argument("no data") when
/// the input holds fewer than two samples in total.
NormStats compute_norm_stats(const std::vector<Trajectory>& trajs);

/// (v - mean) / std, elementwise.
Vec normalize(const Vec& v, const NormStats& stats);

/// v * std + mean, elementwise.
Vec denormalize(const Vec& v, const NormStats& stats);

inline Vec normalize(const RobotState& s, const NormStats& stats) {
    return normalize(flatten(s), stats);
}

}  // namespace primix
