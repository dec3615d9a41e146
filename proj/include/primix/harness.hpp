#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "primix/config.hpp"
#include "primix/controllers.hpp"
#include "primix/plant.hpp"
#include "primix/types.hpp"

namespace primix {

/// Fully resolved task: synthesized operator script plus the scene layout.
struct TaskDefinition {
    std::string name;
    std::string role;
    std::vector<Waypoint> script;
    Scene scene;
    double duration = 0;  // [s]
};

/// Builds the waypoint script (reach, close, carry, open, retreat per
/// object) and scene for one task geometry. Throws if any waypoint is
/// outside the reachable workspace.
TaskDefinition build_task(const ExperimentConfig& cfg, const TaskGeometry& geometry);

/// Runs the scripted-operator bilateral simulation for one task and records
/// states at every control tick. The returned demo ends with the task
/// completed; otherwise a std::runtime_error naming the task is thrown.
Demonstration collect_demonstration(const ExperimentConfig& cfg, const TaskDefinition& task);

/// Closed-loop execution: the controller's predicted leader state is the
/// follower's command input. Returns the recorded trajectory pair
/// (leader = predictions), final scene, and per-step latency samples.
struct RolloutRecord {
    Demonstration trace;
    Scene final_scene;
    bool success = false;
    double place_error = 0;  // mean final object-to-goal distance [m]
    std::vector<double> step_latency_ms;
    std::vector<std::vector<double>> fusion_diag;  // tick, entropy, min_cost, ess
};

/// Any of the four controllers behind one interface.
class Controller {
public:
    virtual ~Controller() = default;
    virtual void reset() = 0;
    virtual RobotState step(const RobotState& follower) = 0;
    /// entropy/min-cost/ess of the last step for fusion variants.
    virtual std::optional<std::array<double, 3>> diagnostics() const { return std::nullopt; }
};

RolloutRecord run_rollout(const ExperimentConfig& cfg, const TaskDefinition& task,
                          Controller& controller, const Scene& initial_scene);

/// Scene with object starts perturbed uniformly in ±cfg.start_perturbation,
/// streams derived from (seed, task name, trial).
Scene perturbed_scene(const ExperimentConfig& cfg, const TaskDefinition& task, int trial);

// ---------------------------------------------------------------------------
// Pipeline stages. All artifact files live under out_dir:
//   demos/<task>.csv           segments/{manifest.csv,<demo>_s<i>.csv,norm_stats.json}
//   models/*.json              runs/<task>_<controller>/...
// Each stage reads only earlier stages' outputs, so the pipeline restarts
// cleanly from any point; missing prerequisites raise errors naming the stage.

void stage_collect(const ExperimentConfig& cfg, const std::string& out_dir);
void stage_segment(const ExperimentConfig& cfg, const std::string& out_dir);
void stage_train_lower(const ExperimentConfig& cfg, const std::string& out_dir);
void stage_train_upper(const ExperimentConfig& cfg, const std::string& out_dir);
void stage_train_ltof(const ExperimentConfig& cfg, const std::string& out_dir);

inline constexpr const char* kControllerNames[] = {"baseline", "learning", "sampling",
                                                   "playback"};

struct TrialResult {
    std::string task;
    std::string controller;
    int trial = 0;
    bool success = false;
    double place_error = 0;
    std::vector<double> step_latency_ms;
};

struct RunSummary {
    std::vector<TrialResult> trials;

    int successes(const std::string& task, const std::string& controller) const;
    std::vector<double> latencies_ms(const std::string& controller) const;
};

/// Evaluates trials for every (evaluation task x controller) cell, or a
/// single cell when filters are given. Writes per-trial trajectory and
/// diagnostic CSVs, latency stats, results.csv, and a summary table.
RunSummary stage_run(const ExperimentConfig& cfg, const std::string& out_dir,
                     const std::string& task_filter = "",
                     const std::string& controller_filter = "", int trials_override = 0);

/// Aggregates results.csv (+ latency files) into report.csv / report.txt.
void stage_eval_report(const ExperimentConfig& cfg, const std::string& out_dir);

/// The two Table-II-style evaluation cells: the validation task (one of the
/// primitive tasks re-run with perturbed starts) and the composite task.
std::vector<std::string> evaluation_tasks(const ExperimentConfig& cfg);

/// Demonstrations used for primitive training (all tasks tagged "primitive").
std::vector<std::string> primitive_tasks(const ExperimentConfig& cfg);

/// Writes meta.json (config hash, seed, version) into a stage directory.
void write_stage_manifest(const std::string& dir, const ExperimentConfig& cfg);

}  // namespace primix
