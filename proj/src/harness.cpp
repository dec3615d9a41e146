#include "primix/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "primix/csv.hpp"
#include "primix/model_io.hpp"
#include "primix/rng.hpp"

namespace primix {

namespace fs = std::filesystem;

namespace {

ArtifactMeta make_meta(const ExperimentConfig& cfg) {
    return ArtifactMeta{cfg.config_hash(), cfg.seed, "primix-0.1"};
}

RobotState home_state(const ExperimentConfig& cfg) {
    const Eigen::Vector2d arm = inverse_kinematics(cfg.plant, cfg.home);
    RobotState s(3);
    s.theta << arm[0], arm[1], cfg.grip_open;
    return s;
}

Scene base_scene(const ExperimentConfig& cfg, const TaskGeometry& geometry) {
    Scene scene;
    scene.grasp_radius = cfg.grasp_radius;
    scene.place_radius = cfg.place_radius;
    scene.gripper_close_angle = cfg.gripper_close_angle;
    scene.object_mass = cfg.object_mass;
    scene.attach_stiffness = cfg.attach_stiffness;
    scene.attach_damping = cfg.attach_damping;
    for (std::size_t i = 0; i < geometry.object_starts.size(); ++i) {
        SceneObject obj;
        obj.position = geometry.object_starts[i];
        obj.goal = geometry.object_goals[i];
        scene.objects.push_back(obj);
    }
    return scene;
}

void require_file(const std::string& path, const std::string& stage) {
    if (!fs::exists(path))
        throw std::runtime_error("missing prerequisite '" + path + "': run stage '" +
                                 stage + "' first");
}

int substeps_per_tick(const ExperimentConfig& cfg) {
    const int n = static_cast<int>(std::llround(cfg.dt_ctrl / cfg.plant.dt_sim));
    if (n < 1 || std::abs(n * cfg.plant.dt_sim - cfg.dt_ctrl) > 1e-9)
        throw std::invalid_argument("dt_ctrl must be an integer multiple of dt_sim");
    return n;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TaskDefinition build_task(const ExperimentConfig& cfg, const TaskGeometry& geometry) {
    TaskDefinition task;
    task.name = geometry.name;
    task.role = geometry.role;
    task.scene = base_scene(cfg, geometry);

    const Eigen::Vector2d home_arm = inverse_kinematics(cfg.plant, cfg.home);
    auto arm_target = [&](const Eigen::Vector2d& p, double grip) {
        const Eigen::Vector2d q = inverse_kinematics(cfg.plant, p);
        return Eigen::Vector3d{q[0], q[1], grip};
    };

    double t = 0;
    task.script.push_back({t, {home_arm[0], home_arm[1], cfg.grip_open}});
    for (std::size_t i = 0; i < geometry.object_starts.size(); ++i) {
        const auto& start = geometry.object_starts[i];
        const auto& goal = geometry.object_goals[i];
        t += cfg.reach_time;
        task.script.push_back({t, arm_target(start, cfg.grip_open)});
        t += cfg.grip_time;
        task.script.push_back({t, arm_target(start, cfg.grip_closed)});
        t += cfg.carry_time;
        task.script.push_back({t, arm_target(goal, cfg.grip_closed)});
        t += cfg.release_time;
        task.script.push_back({t, arm_target(goal, cfg.grip_open)});
        t += cfg.retreat_time;
        task.script.push_back({t, {home_arm[0], home_arm[1], cfg.grip_open}});
    }
    task.duration = t + cfg.settle_time;
    return task;
}

Demonstration collect_demonstration(const ExperimentConfig& cfg, const TaskDefinition& task) {
    const int substeps = substeps_per_tick(cfg);
    const Index ticks = static_cast<Index>(std::llround(task.duration / cfg.dt_ctrl)) + 1;

    ScriptedOperator op;
    op.waypoints = task.script;
    op.kp = cfg.operator_kp;
    op.kd = cfg.operator_kd;

    RobotState leader = home_state(cfg);
    RobotState follower = leader;
    Scene scene = task.scene;

    Demonstration demo;
    demo.id = task.name;
    demo.leader.dt = demo.follower.dt = cfg.dt_ctrl;

    for (Index k = 0; k < ticks; ++k) {
        const double t = static_cast<double>(k) * cfg.dt_ctrl;
        leader.tau = op.torque(t, leader, cfg.plant);
        follower.tau = contact_torque(scene, follower, cfg.plant);
        demo.leader.states.push_back(leader);
        demo.follower.states.push_back(follower);

        for (int s = 0; s < substeps; ++s) {
            const double ts = t + s * cfg.plant.dt_sim;
            const Vec tau_op = op.torque(ts, leader, cfg.plant);
            const Vec tau_env = contact_torque(scene, follower, cfg.plant);
            std::tie(leader, follower) =
                bilateral_step(leader, follower, tau_op, tau_env, cfg.gains, cfg.plant);
            scene = scene_update(scene, follower, cfg.plant);
        }
    }
    if (!task_success(scene))
        throw std::runtime_error("collect: demonstration for task '" + task.name +
                                 "' did not complete the task");
    return demo;
}

Scene perturbed_scene(const ExperimentConfig& cfg, const TaskDefinition& task, int trial) {
    Scene scene = task.scene;
    std::uint64_t name_hash = fnv1a64(task.name);
    Rng rng(derive_seed({cfg.seed, name_hash, static_cast<std::uint64_t>(trial), 0x7363656eull}));
    for (auto& obj : scene.objects) {
        obj.position.x() += rng.uniform(-cfg.start_perturbation, cfg.start_perturbation);
        obj.position.y() += rng.uniform(-cfg.start_perturbation, cfg.start_perturbation);
    }
    return scene;
}

RolloutRecord run_rollout(const ExperimentConfig& cfg, const TaskDefinition& task,
                          Controller& controller, const Scene& initial_scene) {
    const int substeps = substeps_per_tick(cfg);
    const Index ticks = static_cast<Index>(std::llround(task.duration / cfg.dt_ctrl)) + 1;

    RobotState follower = home_state(cfg);
    Scene scene = initial_scene;
    controller.reset();

    RolloutRecord rec;
    rec.trace.id = task.name;
    rec.trace.leader.dt = rec.trace.follower.dt = cfg.dt_ctrl;

    for (Index k = 0; k < ticks; ++k) {
        follower.tau = contact_torque(scene, follower, cfg.plant);

        const auto t0 = std::chrono::steady_clock::now();
        const RobotState command = controller.step(follower);
        const auto t1 = std::chrono::steady_clock::now();
        rec.step_latency_ms.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
        if (auto diag = controller.diagnostics())
            rec.fusion_diag.push_back(
                {static_cast<double>(k), (*diag)[0], (*diag)[1], (*diag)[2]});

        rec.trace.leader.states.push_back(command);
        rec.trace.follower.states.push_back(follower);

        for (int s = 0; s < substeps; ++s) {
            const Vec tau_env = contact_torque(scene, follower, cfg.plant);
            const Vec tau_f = cfg.gains.kp.cwiseProduct(command.theta - follower.theta) +
                              cfg.gains.kd.cwiseProduct(command.omega - follower.omega) -
                              cfg.gains.kf.cwiseProduct(command.tau + tau_env);
            follower = step_dynamics(follower, tau_f, tau_env, cfg.plant);
            scene = scene_update(scene, follower, cfg.plant);
        }
    }

    rec.final_scene = scene;
    rec.success = task_success(scene);
    double err = 0;
    for (const auto& obj : scene.objects) err += (obj.position - obj.goal).norm();
    rec.place_error = scene.objects.empty() ? 0 : err / static_cast<double>(scene.objects.size());
    return rec;
}

// ---------------------------------------------------------------------------
// Stage helpers

std::vector<std::string> primitive_tasks(const ExperimentConfig& cfg) {
    std::vector<std::string> names;
    for (const auto& t : cfg.tasks)
        if (t.role == "primitive") names.push_back(t.name);
    return names;
}

std::vector<std::string> evaluation_tasks(const ExperimentConfig& cfg) {
    std::vector<std::string> names{cfg.validation_task};
    for (const auto& t : cfg.tasks)
        if (t.role == "composite") names.push_back(t.name);
    return names;
}

void write_stage_manifest(const std::string& dir, const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["config_hash"] = cfg.config_hash();
    j["seed"] = cfg.seed;
    j["version"] = "primix-0.1";
    std::ofstream f(dir + "/meta.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + dir + "/meta.json");
    f << j.dump(1) << '\n';
}

void stage_collect(const ExperimentConfig& cfg, const std::string& out_dir) {
    const std::string dir = out_dir + "/demos";
    fs::create_directories(dir);
    for (const auto& geometry : cfg.tasks) {
        const TaskDefinition task = build_task(cfg, geometry);
        const Demonstration demo = collect_demonstration(cfg, task);
        write_demonstration_csv(dir + "/" + task.name + ".csv", demo);
    }
    write_stage_manifest(dir, cfg);
}

namespace {

Demonstration load_demo(const ExperimentConfig& cfg, const std::string& out_dir,
                        const std::string& task_name, const std::string& needed_by) {
    const std::string path = out_dir + "/demos/" + task_name + ".csv";
    require_file(path, "collect");
    (void)needed_by;
    Demonstration demo = read_demonstration_csv(path);
    demo.id = task_name;
    if (demo.dof() != cfg.dof)
        throw std::runtime_error("demo '" + task_name + "' dof mismatch");
    return demo;
}

std::string dataset_file(const std::string& demo_id, int segment) {
    return demo_id + "_s" + std::to_string(segment) + ".csv";
}

const std::string kStatsKind = "norm_stats";

}  // namespace

void stage_segment(const ExperimentConfig& cfg, const std::string& out_dir) {
    const std::string dir = out_dir + "/segments";
    fs::create_directories(dir);

    std::vector<Demonstration> demos;
    for (const auto& name : primitive_tasks(cfg))
        demos.push_back(load_demo(cfg, out_dir, name, "segment"));

    std::vector<Trajectory> all;
    for (const auto& d : demos) {
        all.push_back(d.leader);
        all.push_back(d.follower);
    }
    const NormStats stats = compute_norm_stats(all);
    write_model_file(dir + "/norm_stats.json", kStatsKind, norm_stats_to_json(stats),
                     make_meta(cfg));

    SegmentSpec spec = cfg.segmentation;
    spec.seed = cfg.seed;
    const auto datasets = build_primitive_sets(demos, spec, cfg.horizon);

    std::ofstream manifest(dir + "/manifest.csv", std::ios::binary);
    manifest << "demo_id,segment_index,tick_begin,tick_end,pairs,file\n";
    for (const auto& ds : datasets) {
        const std::string file = dataset_file(ds.demo_id, ds.segment_index);
        manifest << ds.demo_id << ',' << ds.segment_index << ',' << ds.tick_begin << ','
                 << ds.tick_end << ',' << ds.size() << ',' << file << '\n';

        const Index dim = ds.inputs.cols();
        std::vector<std::string> header;
        for (const char* block : {"input", "ref", "target"})
            for (Index j = 0; j < dim; ++j)
                header.push_back(std::string(block) + "_" + std::to_string(j));
        std::vector<std::vector<double>> rows;
        for (Index i = 0; i < ds.size(); ++i) {
            std::vector<double> row;
            for (Index j = 0; j < dim; ++j) row.push_back(ds.inputs(i, j));
            for (Index j = 0; j < dim; ++j) row.push_back(ds.references(i, j));
            for (Index j = 0; j < dim; ++j) row.push_back(ds.targets(i, j));
            rows.push_back(std::move(row));
        }
        write_table_csv(dir + "/" + file, header, rows);
    }
    write_stage_manifest(dir, cfg);
}

namespace {

NormStats load_stats(const std::string& out_dir) {
    const std::string path = out_dir + "/segments/norm_stats.json";
    require_file(path, "segment");
    return norm_stats_from_json(read_model_file(path, kStatsKind));
}

std::vector<PrimitiveDataset> load_segments(const std::string& out_dir) {
    const std::string manifest_path = out_dir + "/segments/manifest.csv";
    require_file(manifest_path, "segment");
    std::ifstream f(manifest_path);
    std::string line;
    std::getline(f, line);  // header
    std::vector<PrimitiveDataset> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string demo_id, seg, begin, end, pairs, file;
        std::getline(ss, demo_id, ',');
        std::getline(ss, seg, ',');
        std::getline(ss, begin, ',');
        std::getline(ss, end, ',');
        std::getline(ss, pairs, ',');
        std::getline(ss, file, ',');

        const auto rows = read_table_csv(out_dir + "/segments/" + file);
        const Index dim = rows.empty() ? 0 : static_cast<Index>(rows.front().size()) / 3;
        PrimitiveDataset ds;
        ds.demo_id = demo_id;
        ds.segment_index = std::stoi(seg);
        ds.tick_begin = std::stol(begin);
        ds.tick_end = std::stol(end);
        ds.inputs = Mat(static_cast<Index>(rows.size()), dim);
        ds.references = Mat(static_cast<Index>(rows.size()), dim);
        ds.targets = Mat(static_cast<Index>(rows.size()), dim);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (Index j = 0; j < dim; ++j) {
                ds.inputs(static_cast<Index>(i), j) = rows[i][j];
                ds.references(static_cast<Index>(i), j) = rows[i][dim + j];
                ds.targets(static_cast<Index>(i), j) = rows[i][2 * dim + j];
            }
        out.push_back(std::move(ds));
    }
    return out;
}

AugmentConfig augment_config(const ExperimentConfig& cfg) {
    return AugmentConfig{cfg.augment_sigma, cfg.augment_copies};
}

TrainConfig train_config(const ExperimentConfig& cfg, int epochs) {
    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.epochs = epochs;
    tc.seed = cfg.seed;
    return tc;
}

}  // namespace

void stage_train_lower(const ExperimentConfig& cfg, const std::string& out_dir) {
    const std::string dir = out_dir + "/models";
    fs::create_directories(dir);
    const NormStats stats = load_stats(out_dir);
    const auto datasets = load_segments(out_dir);
    const LowerBank bank =
        train_lower_bank(datasets, stats, cfg.lower_hidden,
                         train_config(cfg, cfg.lower_epochs), cfg.horizon, cfg.threads,
                         augment_config(cfg));
    save_lower_bank(dir + "/lower_bank.json", bank, make_meta(cfg));
    write_stage_manifest(dir, cfg);
}

void stage_train_ltof(const ExperimentConfig& cfg, const std::string& out_dir) {
    const std::string dir = out_dir + "/models";
    fs::create_directories(dir);
    const NormStats stats = load_stats(out_dir);
    std::vector<Demonstration> demos;
    for (const auto& name : primitive_tasks(cfg))
        demos.push_back(load_demo(cfg, out_dir, name, "train-ltof"));
    const LToFModel model = train_ltof(demos, stats, cfg.ltof_hidden,
                                       train_config(cfg, cfg.ltof_epochs),
                                       augment_config(cfg));
    save_ltof(dir + "/ltof.json", model, make_meta(cfg));
}

void stage_train_upper(const ExperimentConfig& cfg, const std::string& out_dir) {
    const std::string dir = out_dir + "/models";
    fs::create_directories(dir);
    const NormStats stats = load_stats(out_dir);

    for (const auto& task_name : evaluation_tasks(cfg)) {
        const std::vector<Demonstration> demos{
            load_demo(cfg, out_dir, task_name, "train-upper")};

        const BaselineModel baseline = train_baseline(
            demos, stats, cfg.upper_hidden, cfg.upper_layers, cfg.lower_hidden, cfg.horizon,
            train_config(cfg, cfg.upper_epochs), augment_config(cfg));
        save_baseline(dir + "/baseline_" + task_name + ".json", baseline, make_meta(cfg));

        const SamplingUpperModel sampling = train_sampling_upper(
            demos, stats, cfg.upper_hidden, cfg.upper_layers, cfg.horizon,
            train_config(cfg, cfg.upper_epochs), augment_config(cfg));
        save_sampling_upper(dir + "/sampling_" + task_name + ".json", sampling,
                            make_meta(cfg));

        {
            const std::string bank_path = dir + "/lower_bank.json";
            require_file(bank_path, "train-lower");
            const LowerBank bank = load_lower_bank(bank_path);
            const LowerBank subset = select_primitives(bank, cfg.learning_max_primitives);
            LearningUpperModel upper = init_learning_upper(
                stats, cfg.upper_hidden, cfg.upper_layers, cfg.horizon,
                static_cast<int>(subset.size()), cfg.seed);
            train_learning_upper(upper, subset, demos, train_config(cfg, cfg.learning_epochs),
                                 augment_config(cfg));
            save_learning_upper(dir + "/learning_" + task_name + ".json", upper,
                                make_meta(cfg));
        }

        // Playback needs no upper training; register the reference recording.
        nlohmann::json body;
        body["demo"] = "demos/" + task_name + ".csv";
        body["task"] = task_name;
        write_model_file(dir + "/playback_" + task_name + ".json", "playback",
                         std::move(body), make_meta(cfg));
    }
}

// ---------------------------------------------------------------------------
// Run + report

namespace {

class BaselineRunner : public Controller {
public:
    explicit BaselineRunner(BaselineModel model) : inner_(std::move(model)) {}
    void reset() override { inner_.reset(); }
    RobotState step(const RobotState& follower) override { return inner_.step(follower); }

private:
    BaselineController inner_;
};

class LearningRunner : public Controller {
public:
    LearningRunner(LearningUpperModel upper, LowerBank bank)
        : inner_(std::move(upper), std::move(bank)) {}
    void reset() override { inner_.reset(); }
    RobotState step(const RobotState& follower) override { return inner_.step(follower); }

private:
    LearningProportionController inner_;
};

class SamplingRunner : public Controller {
public:
    SamplingRunner(SamplingUpperModel upper, LowerBank bank, LToFModel ltof, CostWeights cw,
                   CEConfig ce)
        : inner_(std::move(upper), std::move(bank), std::move(ltof), cw, ce) {}
    void reset() override { inner_.reset(); }
    RobotState step(const RobotState& follower) override { return inner_.step(follower); }
    std::optional<std::array<double, 3>> diagnostics() const override {
        const auto& r = inner_.last_result();
        return std::array<double, 3>{r.entropy, r.min_cost, r.effective_samples};
    }

private:
    SamplingProportionController inner_;
};

class PlaybackRunner : public Controller {
public:
    PlaybackRunner(Trajectory playback, LowerBank bank, LToFModel ltof, CostWeights cw,
                   CEConfig ce)
        : inner_(std::move(playback), std::move(bank), std::move(ltof), cw, ce) {}
    void reset() override { inner_.reset(); }
    RobotState step(const RobotState& follower) override { return inner_.step(follower); }
    std::optional<std::array<double, 3>> diagnostics() const override {
        const auto& r = inner_.last_result();
        return std::array<double, 3>{r.entropy, r.min_cost, r.effective_samples};
    }

private:
    PlaybackProportionController inner_;
};

struct LoadedModels {
    LowerBank bank;
    LToFModel ltof;
};

std::unique_ptr<Controller> make_controller(const ExperimentConfig& cfg,
                                            const std::string& out_dir,
                                            const std::string& task_name,
                                            const std::string& controller,
                                            const LoadedModels& shared,
                                            std::uint64_t trial_seed) {
    const std::string dir = out_dir + "/models";
    if (controller == "baseline") {
        const std::string path = dir + "/baseline_" + task_name + ".json";
        require_file(path, "train-upper");
        return std::make_unique<BaselineRunner>(load_baseline(path));
    }
    if (controller == "learning") {
        const std::string path = dir + "/learning_" + task_name + ".json";
        require_file(path, "train-upper");
        LearningUpperModel upper = load_learning_upper(path);
        LowerBank subset = select_primitives(shared.bank, cfg.learning_max_primitives);
        return std::make_unique<LearningRunner>(std::move(upper), std::move(subset));
    }
    CEConfig ce = cfg.ce_config();
    ce.seed = trial_seed;
    if (controller == "sampling") {
        const std::string path = dir + "/sampling_" + task_name + ".json";
        require_file(path, "train-upper");
        return std::make_unique<SamplingRunner>(load_sampling_upper(path), shared.bank,
                                                shared.ltof, cfg.cost_weights, ce);
    }
    if (controller == "playback") {
        const std::string path = dir + "/playback_" + task_name + ".json";
        require_file(path, "train-upper");
        const auto body = read_model_file(path, "playback");
        const std::string demo_path = out_dir + "/" + body.at("demo").get<std::string>();
        require_file(demo_path, "collect");
        Demonstration demo = read_demonstration_csv(demo_path);
        return std::make_unique<PlaybackRunner>(std::move(demo.follower), shared.bank,
                                                shared.ltof, cfg.cost_weights, ce);
    }
    throw std::invalid_argument("unknown controller: " + controller);
}

}  // namespace

int RunSummary::successes(const std::string& task, const std::string& controller) const {
    int n = 0;
    for (const auto& t : trials)
        if (t.task == task && t.controller == controller && t.success) ++n;
    return n;
}

std::vector<double> RunSummary::latencies_ms(const std::string& controller) const {
    std::vector<double> out;
    for (const auto& t : trials)
        if (t.controller == controller)
            out.insert(out.end(), t.step_latency_ms.begin(), t.step_latency_ms.end());
    return out;
}

RunSummary stage_run(const ExperimentConfig& cfg, const std::string& out_dir,
                     const std::string& task_filter, const std::string& controller_filter,
                     int trials_override) {
    const std::string runs_dir = out_dir + "/runs";
    fs::create_directories(runs_dir);
    const int trials = trials_override > 0 ? trials_override : cfg.trials;

    std::vector<std::string> task_names = evaluation_tasks(cfg);
    if (!task_filter.empty()) task_names = {task_filter};
    std::vector<std::string> controllers(std::begin(kControllerNames),
                                         std::end(kControllerNames));
    if (!controller_filter.empty()) controllers = {controller_filter};

    LoadedModels shared;
    const std::string bank_path = out_dir + "/models/lower_bank.json";
    const std::string ltof_path = out_dir + "/models/ltof.json";
    require_file(bank_path, "train-lower");
    require_file(ltof_path, "train-ltof");
    shared.bank = load_lower_bank(bank_path);
    shared.ltof = load_ltof(ltof_path);

    RunSummary summary;
    for (const auto& task_name : task_names) {
        const TaskDefinition task = build_task(cfg, cfg.task(task_name));
        for (const auto& controller_name : controllers) {
            const std::string cell_dir = runs_dir + "/" + task_name + "_" + controller_name;
            fs::create_directories(cell_dir);
            std::vector<std::vector<double>> latency_rows;

            for (int trial = 0; trial < trials; ++trial) {
                const std::uint64_t trial_seed =
                    derive_seed({cfg.seed, fnv1a64(task_name), fnv1a64(controller_name),
                                 static_cast<std::uint64_t>(trial), 0x6365ull});
                auto controller = make_controller(cfg, out_dir, task_name, controller_name,
                                                  shared, trial_seed);
                const Scene scene = perturbed_scene(cfg, task, trial);

                RolloutRecord rec;
                bool diverged = false;
                try {
                    rec = run_rollout(cfg, task, *controller, scene);
                } catch (const std::runtime_error&) {
                    diverged = true;  // divergence counts as failure, not abort
                }

                TrialResult result;
                result.task = task_name;
                result.controller = controller_name;
                result.trial = trial;
                result.success = !diverged && rec.success;
                result.place_error = diverged ? -1.0 : rec.place_error;
                result.step_latency_ms = rec.step_latency_ms;
                summary.trials.push_back(result);

                if (!diverged) {
                    write_demonstration_csv(
                        cell_dir + "/trial_" + std::to_string(trial) + ".csv", rec.trace);
                    if (!rec.fusion_diag.empty())
                        write_table_csv(cell_dir + "/diag_" + std::to_string(trial) + ".csv",
                                        {"tick", "entropy", "min_cost", "ess"},
                                        rec.fusion_diag);
                }
                for (std::size_t i = 0; i < rec.step_latency_ms.size(); ++i)
                    latency_rows.push_back({static_cast<double>(trial),
                                            static_cast<double>(i),
                                            rec.step_latency_ms[i]});
            }
            // Wall-clock data is kept apart from the deterministic outputs.
            write_table_csv(cell_dir + "/latency.csv", {"trial", "tick", "latency_ms"},
                            latency_rows);
        }
    }

    // results.csv - deterministic per-trial table
    {
        std::ofstream f(runs_dir + "/results.csv", std::ios::binary);
        f << "task,controller,trial,success,place_error\n";
        for (const auto& t : summary.trials)
            f << t.task << ',' << t.controller << ',' << t.trial << ','
              << (t.success ? 1 : 0) << ',' << format_double(t.place_error) << '\n';
    }

    // summary_table.txt - controller x task success grid
    {
        std::ofstream f(runs_dir + "/summary_table.txt", std::ios::binary);
        f << "Task success rate (%), " << trials << " trials per cell\n";
        f << "model";
        for (const auto& task_name : task_names) f << '\t' << task_name;
        f << '\n';
        for (const auto& controller_name : controllers) {
            f << controller_name;
            for (const auto& task_name : task_names) {
                const int s = summary.successes(task_name, controller_name);
                f << '\t' << (100 * s) / trials;
            }
            f << '\n';
        }
    }
    write_stage_manifest(runs_dir, cfg);
    return summary;
}

void stage_eval_report(const ExperimentConfig& cfg, const std::string& out_dir) {
    const std::string runs_dir = out_dir + "/runs";
    require_file(runs_dir + "/results.csv", "run");

    struct Cell {
        int trials = 0;
        int successes = 0;
        double place_error_sum = 0;
        std::vector<double> latencies;
        std::vector<double> entropies;
    };
    std::vector<std::string> cell_keys;
    std::vector<Cell> cells;
    auto cell_of = [&](const std::string& key) -> Cell& {
        for (std::size_t i = 0; i < cell_keys.size(); ++i)
            if (cell_keys[i] == key) return cells[i];
        cell_keys.push_back(key);
        cells.emplace_back();
        return cells.back();
    };

    std::ifstream f(runs_dir + "/results.csv");
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string task, controller, trial, success, place_error;
        std::getline(ss, task, ',');
        std::getline(ss, controller, ',');
        std::getline(ss, trial, ',');
        std::getline(ss, success, ',');
        std::getline(ss, place_error, ',');
        Cell& cell = cell_of(task + "," + controller);
        cell.trials += 1;
        cell.successes += std::stoi(success);
        cell.place_error_sum += parse_double(place_error);
    }

    for (std::size_t i = 0; i < cell_keys.size(); ++i) {
        const auto comma = cell_keys[i].find(',');
        const std::string dir =
            runs_dir + "/" + cell_keys[i].substr(0, comma) + "_" + cell_keys[i].substr(comma + 1);
        if (fs::exists(dir + "/latency.csv"))
            for (const auto& row : read_table_csv(dir + "/latency.csv"))
                cells[i].latencies.push_back(row[2]);
        for (int trial = 0;; ++trial) {
            const std::string diag = dir + "/diag_" + std::to_string(trial) + ".csv";
            if (!fs::exists(diag)) break;
            for (const auto& row : read_table_csv(diag)) cells[i].entropies.push_back(row[1]);
        }
    }

    std::ofstream report_csv(out_dir + "/report.csv", std::ios::binary);
    report_csv << "task,controller,trials,success_rate,mean_place_error_m,mean_latency_ms,"
                  "median_latency_ms,mean_weight_entropy\n";
    std::ofstream report_txt(out_dir + "/report.txt", std::ios::binary);
    report_txt << "primix evaluation report (config " << cfg.config_hash() << ")\n\n";

    for (std::size_t i = 0; i < cell_keys.size(); ++i) {
        const Cell& c = cells[i];
        const double rate = c.trials ? static_cast<double>(c.successes) / c.trials : 0;
        const double place = c.trials ? c.place_error_sum / c.trials : 0;
        double lat_mean = 0;
        for (double v : c.latencies) lat_mean += v;
        if (!c.latencies.empty()) lat_mean /= static_cast<double>(c.latencies.size());
        const double lat_median = median_of(c.latencies);
        double ent_mean = 0;
        for (double v : c.entropies) ent_mean += v;
        if (!c.entropies.empty()) ent_mean /= static_cast<double>(c.entropies.size());

        report_csv << cell_keys[i] << ',' << c.trials << ',' << format_double(rate) << ','
                   << format_double(place) << ',' << format_double(lat_mean) << ','
                   << format_double(lat_median) << ',' << format_double(ent_mean) << '\n';

        const auto comma = cell_keys[i].find(',');
        report_txt << cell_keys[i].substr(0, comma) << " / " << cell_keys[i].substr(comma + 1)
                   << ": success " << c.successes << "/" << c.trials << ", mean place error "
                   << format_double(place) << " m, latency mean " << format_double(lat_mean)
                   << " ms median " << format_double(lat_median) << " ms";
        if (!c.entropies.empty())
            report_txt << ", weight entropy mean " << format_double(ent_mean);
        report_txt << '\n';
    }
}

}  // namespace primix
