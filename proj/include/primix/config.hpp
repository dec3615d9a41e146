#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "primix/fusion.hpp"
#include "primix/plant.hpp"
#include "primix/segmentation.hpp"

namespace primix {

/// Geometry of one pick-and-place task. The operator waypoint script is
/// synthesized from it (reach, close, carry, open, retreat per object).
struct TaskGeometry {
    std::string name;
    std::string role;  // "primitive" or "composite"
    std::vector<Eigen::Vector2d> object_starts;
    std::vector<Eigen::Vector2d> object_goals;
};

/// Flat key/value experiment configuration; every numeric default of the
/// pipeline lives here. Field groups map onto the config file sections.
struct ExperimentConfig {
    // [core]
    int dof = 3;

    // [plant]
    ArmParams plant;
    double dt_ctrl = 0.01;

    // [gains]
    BilateralGains gains;
    Eigen::Vector3d operator_kp{50.0, 35.0, 0.0};  // 0 on the gripper selects gripper_stiffness
    Eigen::Vector3d operator_kd{2.0, 1.2, 0.04};

    // [scene]
    double grasp_radius = 0.04;
    double place_radius = 0.04;
    double gripper_close_angle = 0.35;
    double object_mass = 0.2;
    double attach_stiffness = 400.0;
    double attach_damping = 8.0;

    // [script]
    Eigen::Vector2d home{0.0, 0.35};
    double reach_time = 1.2;
    double grip_time = 0.5;
    double carry_time = 1.5;
    double release_time = 0.5;
    double retreat_time = 0.8;
    double settle_time = 0.5;
    double grip_open = 0.7;
    double grip_closed = 0.08;

    // [segmentation]
    SegmentSpec segmentation;  // seed comes from the global seed

    // [nn]  (Table-I-scale sizes are reachable here: lower 8x200, upper/ltof 10x80)
    std::vector<int> lower_hidden{32, 32};
    int upper_hidden = 32;
    int upper_layers = 2;
    std::vector<int> ltof_hidden{64, 64};

    // [train]
    double learning_rate = 5e-4;
    int batch_size = 16;
    int lower_epochs = 1500;
    int upper_epochs = 400;
    int learning_epochs = 150;
    int ltof_epochs = 200;
    double augment_sigma = 0.08;  // input-noise augmentation, normalized units
    int augment_copies = 4;
    std::uint64_t seed = 42;

    // [models]
    int horizon = 20;
    CostWeights cost_weights;
    double rho = 0.002;
    int top_m = 50;
    int samples_per_primitive = 10;
    double noise_sigma_theta = 0.02;
    double noise_sigma_omega = 0.02;
    double noise_sigma_tau = 0.02;
    std::string cost_window = "first_step";  // or "full_window"
    int learning_max_primitives = 30;
    int threads = 0;

    // [run]
    int trials = 10;
    double start_perturbation = 0.02;
    std::string validation_task = "right_to_left";

    // [task.*]
    std::vector<TaskGeometry> tasks;

    CEConfig ce_config() const;
    /// Canonical text form; also what config_hash digests.
    std::string serialize() const;
    std::string config_hash() const;

    const TaskGeometry& task(const std::string& name) const;
};

ExperimentConfig default_config();

/// Parses the flat INI-style file. Unknown sections or keys are errors.
ExperimentConfig load_config(const std::string& path);

/// Writes cfg.serialize() to path.
void write_config(const std::string& path, const ExperimentConfig& cfg);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace primix
