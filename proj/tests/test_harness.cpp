#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "primix/csv.hpp"
#include "primix/harness.hpp"

using namespace primix;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Cut-down configuration so the pipeline smoke test stays fast: two source
// tasks, short demos, tiny training budgets, few candidates.
ExperimentConfig smoke_config() {
    ExperimentConfig cfg = default_config();
    cfg.tasks = {default_config().tasks[0], default_config().tasks[1],
                 default_config().tasks[5]};
    cfg.reach_time = 0.8;
    cfg.carry_time = 1.0;
    cfg.grip_time = 0.4;
    cfg.release_time = 0.4;
    cfg.retreat_time = 0.6;
    cfg.settle_time = 0.3;
    cfg.lower_epochs = 40;
    cfg.upper_epochs = 30;
    cfg.learning_epochs = 10;
    cfg.ltof_epochs = 30;
    cfg.lower_hidden = {16, 16};
    cfg.upper_hidden = 12;
    cfg.upper_layers = 1;
    cfg.ltof_hidden = {16};
    cfg.samples_per_primitive = 3;
    cfg.top_m = 10;
    cfg.trials = 1;
    cfg.learning_max_primitives = 8;
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("shipped default config matches the built-in defaults") {
    const std::string shipped = std::string(PRIMIX_SOURCE_DIR) + "/configs/default.ini";
    const ExperimentConfig cfg = load_config(shipped);
    CHECK(cfg.serialize() == default_config().serialize());
    CHECK(cfg.config_hash() == default_config().config_hash());
}

TEST_CASE("config rejects unknown keys") {
    TempDir dir("primix_cfg_test");
    const std::string path = dir.str() + "/bad.ini";
    std::ofstream(path) << "[plant]\nlink_lengths = 0.3 0.25\nwarp_drive = 9\n";
    CHECK_THROWS(load_config(path));
}

TEST_CASE("config round-trips through serialize/load") {
    TempDir dir("primix_cfg_rt");
    ExperimentConfig cfg = default_config();
    cfg.seed = 777;
    cfg.rho = 0.125;
    cfg.tasks[2].object_starts[0] = {0.05, 0.4};
    const std::string path = dir.str() + "/cfg.ini";
    write_config(path, cfg);
    const ExperimentConfig back = load_config(path);
    CHECK(back.serialize() == cfg.serialize());
}

TEST_CASE("build_task synthesizes a sorted, reachable script") {
    const ExperimentConfig cfg = default_config();
    for (const auto& geometry : cfg.tasks) {
        const TaskDefinition task = build_task(cfg, geometry);
        REQUIRE(task.script.size() >= 6);
        for (std::size_t i = 1; i < task.script.size(); ++i)
            CHECK(task.script[i].t > task.script[i - 1].t);
        CHECK(task.duration > task.script.back().t);
        // scripts begin and end at home with the gripper open
        CHECK(task.script.front().target == task.script.back().target);
        CHECK(task.script.front().target[2] == cfg.grip_open);
        CHECK(task.scene.objects.size() == geometry.object_starts.size());
    }
}

TEST_CASE("collected demonstrations complete their task with tight tracking") {
    const ExperimentConfig cfg = default_config();  // shipped timing
    const TaskDefinition task = build_task(cfg, cfg.tasks[1]);
    const Demonstration demo = collect_demonstration(cfg, task);

    CHECK(demo.length() == static_cast<Index>(std::llround(task.duration / cfg.dt_ctrl)) + 1);
    CHECK(demo.leader.dt == cfg.dt_ctrl);

    // leader and follower stay close even through the acceleration transients
    double worst = 0;
    for (Index k = 0; k < demo.length(); ++k)
        worst = std::max(worst, (demo.leader.states[k].theta - demo.follower.states[k].theta)
                                    .cwiseAbs()
                                    .maxCoeff());
    CHECK(worst < 0.05);
}

TEST_CASE("collection is byte-deterministic") {
    const ExperimentConfig cfg = smoke_config();
    const TaskDefinition task = build_task(cfg, cfg.tasks[1]);
    TempDir dir("primix_collect_det");
    write_demonstration_csv(dir.str() + "/a.csv", collect_demonstration(cfg, task));
    write_demonstration_csv(dir.str() + "/b.csv", collect_demonstration(cfg, task));
    CHECK(read_file(dir.str() + "/a.csv") == read_file(dir.str() + "/b.csv"));
}

TEST_CASE("pipeline stages run end to end and rerun byte-identically") {
    const ExperimentConfig cfg = smoke_config();
    TempDir dir("primix_pipeline_smoke");
    const std::string out = dir.str();

    stage_collect(cfg, out);
    for (const auto& name : {"left_to_right", "right_to_left", "two_object"})
        CHECK(fs::exists(out + "/demos/" + std::string(name) + ".csv"));

    stage_segment(cfg, out);
    CHECK(fs::exists(out + "/segments/manifest.csv"));
    CHECK(fs::exists(out + "/segments/norm_stats.json"));
    // 2 primitive demos x 10 segments
    int dataset_files = 0;
    for (const auto& e : fs::directory_iterator(out + "/segments")) {
        const std::string name = e.path().filename().string();
        if (e.path().extension() == ".csv" && name != "manifest.csv") ++dataset_files;
    }
    CHECK(dataset_files == 20);

    stage_train_lower(cfg, out);
    const LowerBank bank = load_lower_bank(out + "/models/lower_bank.json");
    CHECK(bank.size() == 20);
    CHECK(bank.horizon == cfg.horizon);

    stage_train_ltof(cfg, out);
    stage_train_upper(cfg, out);
    for (const auto& name : {"baseline_right_to_left", "sampling_right_to_left",
                             "learning_right_to_left", "playback_right_to_left",
                             "baseline_two_object", "sampling_two_object",
                             "learning_two_object", "playback_two_object"})
        CHECK(fs::exists(out + "/models/" + std::string(name) + ".json"));

    const RunSummary summary = stage_run(cfg, out, "right_to_left", "playback", 1);
    REQUIRE(summary.trials.size() == 1);
    CHECK(fs::exists(out + "/runs/right_to_left_playback/trial_0.csv"));
    CHECK(fs::exists(out + "/runs/right_to_left_playback/diag_0.csv"));
    CHECK(fs::exists(out + "/runs/right_to_left_playback/latency.csv"));
    CHECK(fs::exists(out + "/runs/results.csv"));
    CHECK(fs::exists(out + "/runs/summary_table.txt"));

    stage_eval_report(cfg, out);
    CHECK(fs::exists(out + "/report.csv"));
    CHECK(fs::exists(out + "/report.txt"));

    // segment stage rerun is byte-identical
    const std::string manifest_before = read_file(out + "/segments/manifest.csv");
    const std::string stats_before = read_file(out + "/segments/norm_stats.json");
    stage_segment(cfg, out);
    CHECK(read_file(out + "/segments/manifest.csv") == manifest_before);
    CHECK(read_file(out + "/segments/norm_stats.json") == stats_before);

    // run stage rerun is byte-identical on the deterministic outputs
    const std::string trial_before = read_file(out + "/runs/right_to_left_playback/trial_0.csv");
    stage_run(cfg, out, "right_to_left", "playback", 1);
    CHECK(read_file(out + "/runs/right_to_left_playback/trial_0.csv") == trial_before);
}

TEST_CASE("missing prerequisites raise actionable errors") {
    const ExperimentConfig cfg = smoke_config();
    TempDir dir("primix_missing_stage");
    try {
        stage_train_lower(cfg, dir.str());
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("segment") != std::string::npos);
    }
    try {
        stage_segment(cfg, dir.str());
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("collect") != std::string::npos);
    }
}

TEST_CASE("eval report aggregation matches an independent recomputation") {
    const ExperimentConfig cfg = smoke_config();
    TempDir dir("primix_report_oracle");
    const std::string out = dir.str();

    stage_collect(cfg, out);
    stage_segment(cfg, out);
    stage_train_lower(cfg, out);
    stage_train_ltof(cfg, out);
    stage_train_upper(cfg, out);
    stage_run(cfg, out, "right_to_left", "sampling", 2);
    stage_eval_report(cfg, out);

    // re-aggregate the per-step latency log naively
    std::vector<double> latencies;
    for (const auto& row : read_table_csv(out + "/runs/right_to_left_sampling/latency.csv"))
        latencies.push_back(row[2]);
    REQUIRE_FALSE(latencies.empty());
    double mean = 0;
    for (double v : latencies) mean += v;
    mean /= static_cast<double>(latencies.size());
    std::sort(latencies.begin(), latencies.end());
    const double median = latencies.size() % 2
                              ? latencies[latencies.size() / 2]
                              : 0.5 * (latencies[latencies.size() / 2 - 1] +
                                       latencies[latencies.size() / 2]);

    std::ifstream report(out + "/report.csv");
    std::string line;
    std::getline(report, line);  // header
    bool found = false;
    while (std::getline(report, line)) {
        if (line.rfind("right_to_left,sampling,", 0) != 0) continue;
        found = true;
        std::stringstream ss(line);
        std::string cell;
        for (int i = 0; i < 6; ++i) std::getline(ss, cell, ',');
        const double mean_reported = parse_double(cell);
        std::getline(ss, cell, ',');
        const double median_reported = parse_double(cell);
        CHECK(std::abs(mean_reported - mean) < 1e-9);
        CHECK(std::abs(median_reported - median) < 1e-9);
    }
    CHECK(found);
}

TEST_CASE("cli subcommands run the collect stage") {
    TempDir dir("primix_cli_smoke");
    const std::string out = dir.str();
    ExperimentConfig cfg = smoke_config();
    const std::string cfg_path = out + "/cfg.ini";
    write_config(cfg_path, cfg);

    const std::string cmd = std::string(PRIMIX_CLI_PATH) + " collect --config " + cfg_path +
                            " --out " + out + " 2>/dev/null";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(out + "/demos/right_to_left.csv"));

    // bad invocation exits nonzero
    const std::string bad = std::string(PRIMIX_CLI_PATH) + " run --config " + cfg_path +
                            " --out " + out + " 2>/dev/null";
    CHECK(std::system(bad.c_str()) != 0);  // models missing
}
