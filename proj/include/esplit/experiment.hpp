#pragma once

// Experiment descriptions, replication loops and CSV/JSON reporting used by
// the command-line tool.

#include "esplit/splitting.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace esplit {

enum class Method { exact_fixed, exact_smc, euler_fixed, euler_smc };

std::string to_string(Method m);

/// Raised for malformed or inconsistent experiment files.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    std::string problem = "bm1d";  // bm1d, bm2d_min or custom
    std::string xi = "identity";   // custom problems: identity, min or abs_diff
    std::string label;
    InitialLaw initial = InitialLaw::point_mass(Point{1.0});
    double z_A = 0.0;
    std::vector<double> levels{3.0};
    Method method = Method::exact_smc;
    std::size_t particles = 100;
    std::vector<std::size_t> ratios;
    double euler_h0 = 0.01;
    double euler_rescale = 1.0;
    double segment_length = 1.0;
    double eps1 = 0.5;
    double rho = 0.5;
    double layer_grid_ratio = 2.0;
    double level_tolerance_scale = 1.0;
    RefineStrategy refine_strategy = RefineStrategy::first;
    double split_grid = 0.0;
    long max_refinements = 1'000'000;
    std::size_t trials = 1;
    std::uint64_t seed = 1;

    bool is_exact() const { return method == Method::exact_fixed || method == Method::exact_smc; }
    std::string display_label() const;
    /// Builds and validates the splitting configuration.
    SplitConfig split_config() const;
    EulerSchedule euler_schedule() const;
    /// P(tau_B < tau_A) when available in closed form.
    std::optional<double> true_p() const;
    /// Same problem geometry (used by compare).
    bool same_problem(const RunConfig& other) const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& cfg);

struct TrialResult {
    std::size_t trial = 0;
    bool failed = false;
    std::string error;
    Estimate estimate;
    double millis = 0.0;
};

TrialResult run_trial(const RunConfig& cfg, std::size_t trial);

/// All trials, in trial order, using up to `jobs` worker threads.
std::vector<TrialResult> run_trials(const RunConfig& cfg, unsigned jobs);

struct Summary {
    std::size_t completed = 0;
    std::size_t failures = 0;
    double mean = 0.0;
    double variance = 0.0;
    double std_error = 0.0;
    double relative_variance = 0.0;
    double mean_cells = 0.0;
    double mean_refinements = 0.0;
};

Summary summarize(const std::vector<TrialResult>& results);

/// Columns: trial, p_hat, N_1..N_m, extinct, cells, refinements, millis.
/// `millis` is left empty unless `timing` is set, so that the file is a
/// deterministic function of the configuration.
void write_trials_csv(std::ostream& os, const RunConfig& cfg,
                      const std::vector<TrialResult>& results, bool timing);

nlohmann::json summary_json(const RunConfig& cfg, const std::vector<TrialResult>& results,
                            double runtime_seconds);

/// Gaussian kernel density with the normal-reference bandwidth.
struct DensityEstimate {
    double bandwidth = 0.0;
    std::vector<double> grid;
    std::vector<double> density;
};

double reference_bandwidth(const std::vector<double>& samples);
DensityEstimate kernel_density(const std::vector<double>& samples, const std::vector<double>& grid);

struct RunOptions {
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    unsigned jobs = 1;
    bool timing = false;
};

/// Returns the process exit code.
int command_run(const std::string& config_path, const RunOptions& opts, std::ostream& log);
int command_compare(const std::vector<std::string>& config_paths, const RunOptions& opts,
                    std::ostream& log);

}  // namespace esplit
