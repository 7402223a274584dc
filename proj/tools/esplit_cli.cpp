#include "esplit/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Rare-event probabilities for Brownian motion by multilevel splitting"};
    app.require_subcommand(1);

    esplit::RunOptions opts;
    std::uint64_t seed = 0;
    std::size_t trials = 0;

    std::string config;
    auto* run = app.add_subcommand("run", "Replicate one estimator");
    run->add_option("--config", config, "Experiment file (JSON)")->required();
    run->add_option("--out-dir", opts.out_dir, "Output directory");
    auto* run_seed = run->add_option("--seed", seed, "Overrides the file's seed");
    auto* run_trials = run->add_option("--trials", trials, "Overrides the file's trial count");
    run->add_option("--jobs", opts.jobs, "Worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--timing", opts.timing, "Fill the millis column of trials.csv");

    std::vector<std::string> configs;
    auto* cmp = app.add_subcommand("compare", "Run several estimators on one problem");
    cmp->add_option("--configs", configs, "Experiment files")->required()->delimiter(',');
    cmp->add_option("--out-dir", opts.out_dir, "Output directory");
    auto* cmp_seed = cmp->add_option("--seed", seed, "Overrides every file's seed");
    auto* cmp_trials = cmp->add_option("--trials", trials, "Overrides every file's trial count");
    cmp->add_option("--jobs", opts.jobs, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*run_seed || *cmp_seed) opts.seed = seed;
    if (*run_trials || *cmp_trials) opts.trials = trials;
    try {
        if (*run) return esplit::command_run(config, opts, std::cerr);
        return esplit::command_compare(configs, opts, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
