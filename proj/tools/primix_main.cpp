#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "primix/config.hpp"
#include "primix/harness.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "override the config seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
}

primix::ExperimentConfig load(const CommonOpts& opts) {
    primix::ExperimentConfig cfg = primix::load_config(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"proportion-based motion-primitive pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string run_task, run_controller;
    int run_trials = 0;

    auto* collect = app.add_subcommand("collect", "record scripted bilateral demonstrations");
    auto* segment = app.add_subcommand("segment", "split demos into primitive datasets");
    auto* train_lower = app.add_subcommand("train-lower", "train the primitive bank");
    auto* train_upper = app.add_subcommand("train-upper", "train per-task upper layers");
    auto* train_ltof = app.add_subcommand("train-ltof", "train the leader-to-follower map");
    auto* run = app.add_subcommand("run", "closed-loop evaluation trials");
    auto* report = app.add_subcommand("eval-report", "aggregate run outputs");

    for (auto* cmd : {collect, segment, train_lower, train_upper, train_ltof, run, report})
        add_common(cmd, opts);
    run->add_option("--task", run_task, "evaluate a single task");
    run->add_option("--controller", run_controller, "evaluate a single controller")
        ->check(CLI::IsMember({"baseline", "learning", "sampling", "playback"}));
    run->add_option("--trials", run_trials, "override trial count");

    CLI11_PARSE(app, argc, argv);

    try {
        const primix::ExperimentConfig cfg = load(opts);
        if (collect->parsed()) primix::stage_collect(cfg, opts.out_dir);
        if (segment->parsed()) primix::stage_segment(cfg, opts.out_dir);
        if (train_lower->parsed()) primix::stage_train_lower(cfg, opts.out_dir);
        if (train_upper->parsed()) primix::stage_train_upper(cfg, opts.out_dir);
        if (train_ltof->parsed()) primix::stage_train_ltof(cfg, opts.out_dir);
        if (run->parsed())
            primix::stage_run(cfg, opts.out_dir, run_task, run_controller, run_trials);
        if (report->parsed()) primix::stage_eval_report(cfg, opts.out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
