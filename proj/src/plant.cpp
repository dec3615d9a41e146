#include "primix/plant.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace primix {

namespace {

struct ArmDynamicsTerms {
    Eigen::Matrix2d mass;
    Eigen::Vector2d coriolis;  // C(q, qdot) * qdot
    Eigen::Vector2d gravity;
};

// Standard planar 2R dynamics with uniform-rod links (lc = l/2, I = m l^2/12).
ArmDynamicsTerms arm_terms(const ArmParams& p, const Vec& theta, const Vec& omega) {
    const double l1 = p.link_lengths[0], l2 = p.link_lengths[1];
    const double m1 = p.link_masses[0], m2 = p.link_masses[1];
    const double lc1 = 0.5 * l1, lc2 = 0.5 * l2;
    const double i1 = m1 * l1 * l1 / 12.0, i2 = m2 * l2 * l2 / 12.0;
    const double c2 = std::cos(theta[1]), s2 = std::sin(theta[1]);

    ArmDynamicsTerms t;
    t.mass(0, 0) = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * c2);
    t.mass(0, 1) = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
    t.mass(1, 0) = t.mass(0, 1);
    t.mass(1, 1) = i2 + m2 * lc2 * lc2;

    const double h = m2 * l1 * lc2 * s2;
    t.coriolis[0] = -h * omega[1] * omega[1] - 2 * h * omega[0] * omega[1];
    t.coriolis[1] = h * omega[0] * omega[0];

    t.gravity.setZero();
    if (p.gravity) {
        const double g = p.gravity_accel;
        const double c1 = std::cos(theta[0]), c12 = std::cos(theta[0] + theta[1]);
        t.gravity[0] = (m1 * lc1 + m2 * l1) * g * c1 + m2 * lc2 * g * c12;
        t.gravity[1] = m2 * lc2 * g * c12;
    }
    return t;
}

}  // namespace

RobotState step_dynamics(const RobotState& arm_state, const JointVector& input_torque,
                         const JointVector& external_torque, const ArmParams& params) {
    const Vec tau_total = input_torque + external_torque;
    const auto t = arm_terms(params, arm_state.theta, arm_state.omega);
    const double dt = params.dt_sim;

    // Semi-implicit Euler with implicit viscous damping:
    // (M + dt B) w' = M w + dt (tau - c - g). The arm's mass matrix is badly
    // conditioned near the straight configuration, so explicit damping there
    // would need a far smaller step.
    Eigen::Matrix2d lhs = t.mass;
    lhs(0, 0) += dt * params.joint_damping[0];
    lhs(1, 1) += dt * params.joint_damping[1];
    const Eigen::Vector2d rhs =
        t.mass * arm_state.omega.head<2>() +
        dt * (tau_total.head<2>() - t.coriolis - t.gravity);

    RobotState next;
    next.omega = Vec(3);
    next.omega.head<2>() = lhs.ldlt().solve(rhs);
    next.omega[2] = (params.gripper_inertia * arm_state.omega[2] + dt * tau_total[2]) /
                    (params.gripper_inertia + dt * params.joint_damping[2]);
    next.theta = arm_state.theta + dt * next.omega;
    next.tau = external_torque;
    if (!next.finite())
        throw std::runtime_error("dynamics diverged");
    return next;
}

double arm_energy(const RobotState& s, const ArmParams& p) {
    const auto t = arm_terms(p, s.theta, s.omega);
    double e = 0.5 * s.omega.head<2>().dot(t.mass * s.omega.head<2>()) +
               0.5 * p.gripper_inertia * s.omega[2] * s.omega[2];
    if (p.gravity) {
        const double l1 = p.link_lengths[0];
        const double lc1 = 0.5 * l1, lc2 = 0.5 * p.link_lengths[1];
        const double m1 = p.link_masses[0], m2 = p.link_masses[1];
        const double s1 = std::sin(s.theta[0]), s12 = std::sin(s.theta[0] + s.theta[1]);
        e += p.gravity_accel * (m1 * lc1 * s1 + m2 * (l1 * s1 + lc2 * s12));
    }
    return e;
}

std::pair<RobotState, RobotState> bilateral_step(const RobotState& leader,
                                                 const RobotState& follower,
                                                 const JointVector& operator_torque,
                                                 const JointVector& env_torque,
                                                 const BilateralGains& gains,
                                                 const ArmParams& params) {
    const Vec dtheta = follower.theta - leader.theta;
    const Vec domega = follower.omega - leader.omega;
    const Vec reflect = gains.kf.cwiseProduct(operator_torque + env_torque);

    const Vec tau_leader = gains.kp.cwiseProduct(dtheta) + gains.kd.cwiseProduct(domega) - reflect;
    const Vec tau_follower = -gains.kp.cwiseProduct(dtheta) - gains.kd.cwiseProduct(domega) - reflect;

    return {step_dynamics(leader, tau_leader, operator_torque, params),
            step_dynamics(follower, tau_follower, env_torque, params)};
}

namespace {

struct HermiteSegment {
    bool inside = false;
    std::size_t i = 0;
    double u = 0, h = 1;
    Eigen::Vector3d m0, m1;  // tangents scaled by h
};

// Monotone (PCHIP-style) tangents so targets never overshoot a hold:
// a knot between segments of opposite or zero slope gets a zero tangent.
HermiteSegment locate_segment(const std::vector<Waypoint>& w, double t) {
    HermiteSegment seg;
    if (w.size() < 2 || t <= w.front().t || t >= w.back().t) return seg;
    seg.inside = true;
    while (seg.i + 1 < w.size() && w[seg.i + 1].t <= t) ++seg.i;
    seg.h = w[seg.i + 1].t - w[seg.i].t;
    seg.u = (t - w[seg.i].t) / seg.h;

    auto slope = [&](std::size_t j) -> Eigen::Vector3d {
        return (w[j + 1].target - w[j].target) / (w[j + 1].t - w[j].t);
    };
    auto tangent = [&](std::size_t j) -> Eigen::Vector3d {
        if (j == 0) return slope(0);
        if (j + 1 == w.size()) return slope(j - 1);
        const Eigen::Vector3d s0 = slope(j - 1), s1 = slope(j);
        Eigen::Vector3d m;
        for (int c = 0; c < 3; ++c)
            m[c] = (s0[c] * s1[c] <= 0.0) ? 0.0 : 2.0 * s0[c] * s1[c] / (s0[c] + s1[c]);
        return m;
    };
    seg.m0 = tangent(seg.i) * seg.h;
    seg.m1 = tangent(seg.i + 1) * seg.h;
    return seg;
}

}  // namespace

Eigen::Vector3d ScriptedOperator::target(double t) const {
    if (waypoints.empty()) return Eigen::Vector3d::Zero();
    const HermiteSegment seg = locate_segment(waypoints, t);
    if (!seg.inside)
        return t <= waypoints.front().t ? waypoints.front().target : waypoints.back().target;
    const double u = seg.u, u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * waypoints[seg.i].target + (u3 - 2 * u2 + u) * seg.m0 +
           (-2 * u3 + 3 * u2) * waypoints[seg.i + 1].target + (u3 - u2) * seg.m1;
}

Eigen::Vector3d ScriptedOperator::target_velocity(double t) const {
    const HermiteSegment seg = locate_segment(waypoints, t);
    if (!seg.inside) return Eigen::Vector3d::Zero();
    const double u = seg.u, u2 = u * u;
    return ((6 * u2 - 6 * u) * waypoints[seg.i].target + (3 * u2 - 4 * u + 1) * seg.m0 +
            (-6 * u2 + 6 * u) * waypoints[seg.i + 1].target + (3 * u2 - 2 * u) * seg.m1) /
           seg.h;
}

JointVector ScriptedOperator::torque(double t, const RobotState& leader,
                                     const ArmParams& params) const {
    const Eigen::Vector3d ref = target(t);
    const Eigen::Vector3d ref_vel = target_velocity(t);
    Eigen::Vector3d gain_p = kp;
    if (gain_p[2] == 0.0) gain_p[2] = params.gripper_stiffness;
    return gain_p.cwiseProduct(ref - leader.theta.head<3>()) +
           kd.cwiseProduct(ref_vel - leader.omega.head<3>());
}

Eigen::Vector2d forward_kinematics(const ArmParams& params, const JointVector& theta) {
    const double l1 = params.link_lengths[0], l2 = params.link_lengths[1];
    const double q1 = theta[0], q12 = theta[0] + theta[1];
    return {l1 * std::cos(q1) + l2 * std::cos(q12), l1 * std::sin(q1) + l2 * std::sin(q12)};
}

Eigen::Matrix2d arm_jacobian(const ArmParams& params, const JointVector& theta) {
    const double l1 = params.link_lengths[0], l2 = params.link_lengths[1];
    const double q1 = theta[0], q12 = theta[0] + theta[1];
    Eigen::Matrix2d j;
    j(0, 0) = -l1 * std::sin(q1) - l2 * std::sin(q12);
    j(0, 1) = -l2 * std::sin(q12);
    j(1, 0) = l1 * std::cos(q1) + l2 * std::cos(q12);
    j(1, 1) = l2 * std::cos(q12);
    return j;
}

Eigen::Vector2d inverse_kinematics(const ArmParams& params, const Eigen::Vector2d& p) {
    const double l1 = params.link_lengths[0], l2 = params.link_lengths[1];
    const double r2 = p.squaredNorm();
    const double r = std::sqrt(r2);
    const double margin = 0.02;
    if (r > l1 + l2 - margin || r < std::abs(l1 - l2) + margin)
        throw std::invalid_argument("inverse_kinematics: point outside workspace");
    const double c2 = (r2 - l1 * l1 - l2 * l2) / (2 * l1 * l2);
    const double q2 = std::acos(std::clamp(c2, -1.0, 1.0));  // elbow-up branch
    const double q1 = std::atan2(p.y(), p.x()) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
    return {q1, q2};
}

Scene scene_update(const Scene& scene, const RobotState& follower, const ArmParams& params) {
    Scene next = scene;
    const Eigen::Vector2d ee = forward_kinematics(params, follower.theta);
    const bool closed = follower.theta[2] < scene.gripper_close_angle;

    if (!closed) {
        for (auto& o : next.objects)
            if (o.grasped) {
                o.grasped = false;
                o.velocity.setZero();
            }
    } else if (!next.any_grasped()) {
        int best = -1;
        double best_d = scene.grasp_radius;
        for (std::size_t i = 0; i < next.objects.size(); ++i) {
            const double d = (next.objects[i].position - ee).norm();
            if (d <= best_d) {
                best = static_cast<int>(i);
                best_d = d;
            }
        }
        if (best >= 0) next.objects[best].grasped = true;
    }

    // Grasped object trails the end effector behind a spring-damper.
    const Eigen::Vector2d ee_vel =
        arm_jacobian(params, follower.theta) * follower.omega.head<2>();
    for (auto& o : next.objects)
        if (o.grasped) {
            const Eigen::Vector2d force =
                scene.attach_stiffness * (ee - o.position) +
                scene.attach_damping * (ee_vel - o.velocity);
            o.velocity += params.dt_sim * force / scene.object_mass;
            o.position += params.dt_sim * o.velocity;
        }
    return next;
}

JointVector contact_torque(const Scene& scene, const RobotState& follower,
                           const ArmParams& params) {
    Vec tau = Vec::Zero(3);
    const Eigen::Vector2d ee = forward_kinematics(params, follower.theta);
    const Eigen::Vector2d ee_vel =
        arm_jacobian(params, follower.theta) * follower.omega.head<2>();
    for (const auto& o : scene.objects)
        if (o.grasped) {
            const Eigen::Vector2d force_on_object =
                scene.attach_stiffness * (ee - o.position) +
                scene.attach_damping * (ee_vel - o.velocity);
            tau.head<2>() -= arm_jacobian(params, follower.theta).transpose() * force_on_object;
        }
    return tau;
}

bool task_success(const Scene& scene) {
    for (const auto& o : scene.objects) {
        if (o.grasped) return false;
        if ((o.position - o.goal).norm() > scene.place_radius) return false;
    }
    return true;
}

}  // namespace primix
