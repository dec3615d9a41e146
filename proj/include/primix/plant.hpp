#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "primix/types.hpp"

namespace primix {

/// Physical parameters of one simulated arm: two revolute links moving in a
/// horizontal plane plus a gripper joint modeled as a damped inertia. The
/// closed-loop gripper behaves as a damped spring toward its commanded angle;
/// gripper_stiffness is the spring gain controllers use for that joint.
struct ArmParams {
    Eigen::Vector2d link_lengths{0.30, 0.25};   // [m]
    Eigen::Vector2d link_masses{1.2, 0.9};      // [kg], uniform rods
    Eigen::Vector3d joint_damping{0.10, 0.06, 0.02};  // [N·m·s/rad]
    double gripper_stiffness = 4.0;             // [N·m/rad]
    double gripper_inertia = 2e-3;              // [kg·m²]
    double dt_sim = 5e-4;                       // [s]
    bool gravity = false;                       // vertical-plane mode for robustness tests
    double gravity_accel = 9.81;

    bool valid() const {
        return link_lengths.minCoeff() > 0 && link_masses.minCoeff() > 0 &&
               joint_damping.minCoeff() > 0 && gripper_stiffness > 0 &&
               gripper_inertia > 0 && dt_sim > 0;
    }
};

/// Per-joint gains of the symmetric bilateral coupling law. kp/kd act on the
/// position/velocity difference, kf on the response-torque sum.
struct BilateralGains {
    Eigen::Vector3d kp{80.0, 60.0, 4.0};
    Eigen::Vector3d kd{6.0, 4.0, 0.05};
    Eigen::Vector3d kf{0.2, 0.2, 0.1};
};

/// One semi-implicit Euler step of the arm dynamics. The returned state's tau
/// channel records external_torque (the response torque a disturbance
/// observer would estimate on hardware). Throws std::runtime_error
/// ("dynamics diverged") if the result is not finite.
RobotState step_dynamics(const RobotState& arm_state, const JointVector& input_torque,
                         const JointVector& external_torque, const ArmParams& params);

/// Total mechanical energy of the arm (kinetic, plus potential when gravity
/// is enabled). Used by passivity checks.
double arm_energy(const RobotState& s, const ArmParams& params);

/// Advances the coupled leader/follower pair by one dt_sim step under the
/// 4-channel bilateral law: antisymmetric position/velocity coupling plus a
/// symmetric force-reflection term that drives tau_l + tau_f toward zero.
/// operator_torque acts only on the leader, env_torque only on the follower.
std::pair<RobotState, RobotState> bilateral_step(const RobotState& leader,
                                                 const RobotState& follower,
                                                 const JointVector& operator_torque,
                                                 const JointVector& env_torque,
                                                 const BilateralGains& gains,
                                                 const ArmParams& params);

/// A (time, joint target) knot of the scripted operator.
struct Waypoint {
    double t = 0;
    Eigen::Vector3d target{0, 0, 0};
};

/// Deterministic stand-in for the human demonstrator: PD torque with
/// velocity feedforward toward a monotone piecewise-cubic interpolation of
/// the waypoints. Outside the waypoint span the nearest target is held.
struct ScriptedOperator {
    std::vector<Waypoint> waypoints;  // time-sorted
    Eigen::Vector3d kp{50.0, 35.0, 0.0};  // kp[2] == 0 selects gripper_stiffness
    Eigen::Vector3d kd{2.0, 1.2, 0.04};

    Eigen::Vector3d target(double t) const;
    Eigen::Vector3d target_velocity(double t) const;
    JointVector torque(double t, const RobotState& leader, const ArmParams& params) const;
};

/// End-effector position of the two arm links (gripper joint ignored).
Eigen::Vector2d forward_kinematics(const ArmParams& params, const JointVector& theta);

/// 2x2 positional Jacobian of the arm joints.
Eigen::Matrix2d arm_jacobian(const ArmParams& params, const JointVector& theta);

/// Elbow-up inverse kinematics. Throws std::invalid_argument when the point
/// is outside the reachable annulus (with a small interior margin).
Eigen::Vector2d inverse_kinematics(const ArmParams& params, const Eigen::Vector2d& p);

struct SceneObject {
    Eigen::Vector2d position{0, 0};
    Eigen::Vector2d goal{0, 0};
    Eigen::Vector2d velocity{0, 0};  // only meaningful while grasped
    bool grasped = false;
};

/// Pick-and-place scene. A grasped object is dragged behind the end effector
/// by a spring-damper so the follower's tau channel sees a real load.
struct Scene {
    std::vector<SceneObject> objects;
    double grasp_radius = 0.04;         // [m]
    double place_radius = 0.04;         // [m]
    double gripper_close_angle = 0.35;  // grasped while gripper angle is below this
    double object_mass = 0.2;           // [kg]
    double attach_stiffness = 400.0;    // [N/m]
    double attach_damping = 8.0;        // [N·s/m]

    bool any_grasped() const {
        for (const auto& o : objects)
            if (o.grasped) return true;
        return false;
    }
};

/// Grasp/release events plus one dt_sim integration step of any grasped
/// object. Closing the gripper within grasp_radius of an ungrasped object
/// grasps it (nearest first, one at a time); opening releases it in place.
Scene scene_update(const Scene& scene, const RobotState& follower, const ArmParams& params);

/// Torque the environment applies on the follower: the reaction of the
/// grasped-object attachment spring, mapped through the arm Jacobian.
JointVector contact_torque(const Scene& scene, const RobotState& follower,
                           const ArmParams& params);

/// True iff every object is released and lies within place_radius of its goal.
bool task_success(const Scene& scene);

}  // namespace primix
