#include "esplit/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace esplit {

using nlohmann::json;

std::string to_string(Method m) {
    switch (m) {
        case Method::exact_fixed: return "exact_fixed";
        case Method::exact_smc: return "exact_smc";
        case Method::euler_fixed: return "euler_fixed";
        case Method::euler_smc: return "euler_smc";
    }
    return "exact_smc";
}

namespace {

Method parse_method(const std::string& s) {
    if (s == "exact_fixed") return Method::exact_fixed;
    if (s == "exact_smc") return Method::exact_smc;
    if (s == "euler_fixed") return Method::euler_fixed;
    if (s == "euler_smc") return Method::euler_smc;
    throw ConfigError("unknown method '" + s + "'");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Point to_point(const json& j, const char* key) {
    Point p;
    if (j.is_number()) {
        p.push_back(j.get<double>());
    } else if (j.is_array()) {
        for (const auto& v : j) p.push_back(v.get<double>());
    } else {
        throw ConfigError(std::string(key) + " must be a number or an array of numbers");
    }
    if (p.empty()) throw ConfigError(std::string(key) + " is empty");
    return p;
}

json from_point(const Point& p) { return json(std::vector<double>(p.begin(), p.end())); }

const std::set<std::string> kKnownKeys = {
    "problem", "xi", "label", "x0", "initial", "z_A", "levels", "method", "particles", "ratios",
    "euler", "segment_length", "eps1", "rho", "layer_grid_ratio", "level_tolerance_scale",
    "refine_strategy", "split_grid", "max_refinements", "trials", "seed", "comment"};

}  // namespace

std::string RunConfig::display_label() const {
    if (!label.empty()) return label;
    if (is_exact()) return to_string(method);
    return to_string(method) + "(h0=" + fmt_double(euler_h0) + ")";
}

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!kKnownKeys.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
    RunConfig c;
    try {
        c.problem = j.value("problem", c.problem);
        if (c.problem == "bm1d") {
            c.xi = "identity";
        } else if (c.problem == "bm2d_min") {
            c.xi = "min";
        } else if (c.problem == "custom") {
            c.xi = j.value("xi", std::string("identity"));
        } else {
            throw ConfigError("unknown problem '" + c.problem + "'");
        }
        c.label = j.value("label", std::string());
        if (j.contains("initial")) {
            const json& in = j.at("initial");
            const std::string kind = in.value("kind", std::string("point"));
            if (kind == "point")
                c.initial = InitialLaw::point_mass(to_point(in.at("x"), "initial.x"));
            else if (kind == "box")
                c.initial = InitialLaw::uniform_box(to_point(in.at("lower"), "initial.lower"),
                                                    to_point(in.at("upper"), "initial.upper"));
            else
                throw ConfigError("unknown initial law '" + kind + "'");
            if (j.contains("x0")) throw ConfigError("give either x0 or initial, not both");
        } else if (j.contains("x0")) {
            c.initial = InitialLaw::point_mass(to_point(j.at("x0"), "x0"));
        } else {
            throw ConfigError("missing x0");
        }
        c.z_A = j.at("z_A").get<double>();
        c.levels = j.at("levels").get<std::vector<double>>();
        c.method = parse_method(j.value("method", std::string("exact_smc")));
        c.particles = j.at("particles").get<std::size_t>();
        if (j.contains("ratios")) c.ratios = j.at("ratios").get<std::vector<std::size_t>>();
        if (j.contains("euler")) {
            const json& e = j.at("euler");
            c.euler_h0 = e.value("h0", c.euler_h0);
            c.euler_rescale = e.value("rescale", c.euler_rescale);
        }
        c.segment_length = j.value("segment_length", c.segment_length);
        c.eps1 = j.value("eps1", c.eps1);
        c.rho = j.value("rho", c.rho);
        c.layer_grid_ratio = j.value("layer_grid_ratio", c.layer_grid_ratio);
        c.level_tolerance_scale = j.value("level_tolerance_scale", c.level_tolerance_scale);
        const std::string strategy = j.value("refine_strategy", std::string("first"));
        if (strategy == "first")
            c.refine_strategy = RefineStrategy::first;
        else if (strategy == "largest_overlap")
            c.refine_strategy = RefineStrategy::largest_overlap;
        else
            throw ConfigError("unknown refine_strategy '" + strategy + "'");
        c.split_grid = j.value("split_grid", c.split_grid);
        c.max_refinements = j.value("max_refinements", c.max_refinements);
        c.trials = j.value("trials", c.trials);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    if (c.trials < 1) throw ConfigError("trials must be at least 1");
    if (!c.is_exact() && !(c.euler_h0 > 0.0 && c.euler_rescale > 0.0))
        throw ConfigError("euler.h0 and euler.rescale must be positive");
    try {
        (void)c.split_config();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration file " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_run_config(j);
}

json to_json(const RunConfig& c) {
    json j;
    j["problem"] = c.problem;
    if (c.problem == "custom") j["xi"] = c.xi;
    if (!c.label.empty()) j["label"] = c.label;
    if (c.initial.kind == InitialLaw::Kind::point)
        j["x0"] = from_point(c.initial.lower);
    else
        j["initial"] = {{"kind", "box"},
                        {"lower", from_point(c.initial.lower)},
                        {"upper", from_point(c.initial.upper)}};
    j["z_A"] = c.z_A;
    j["levels"] = c.levels;
    j["method"] = to_string(c.method);
    j["particles"] = c.particles;
    if (c.method == Method::exact_fixed || c.method == Method::euler_fixed) j["ratios"] = c.ratios;
    if (!c.is_exact()) j["euler"] = {{"h0", c.euler_h0}, {"rescale", c.euler_rescale}};
    j["segment_length"] = c.segment_length;
    j["eps1"] = c.eps1;
    j["rho"] = c.rho;
    j["layer_grid_ratio"] = c.layer_grid_ratio;
    j["level_tolerance_scale"] = c.level_tolerance_scale;
    j["refine_strategy"] =
        c.refine_strategy == RefineStrategy::first ? "first" : "largest_overlap";
    j["split_grid"] = c.split_grid;
    j["max_refinements"] = c.max_refinements;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    return j;
}

SplitConfig RunConfig::split_config() const {
    SplitConfig s;
    s.mode = (method == Method::exact_fixed || method == Method::euler_fixed) ? SplitMode::fixed
                                                                              : SplitMode::smc;
    s.particles = particles;
    s.ratios = ratios;
    try {
        s.levels = LevelSystem(z_A, levels);
        if (xi == "identity")
            s.xi = ReactionCoordinate::identity_1d();
        else if (xi == "min")
            s.xi = ReactionCoordinate::coordinate_min(initial.dim());
        else if (xi == "abs_diff")
            s.xi = ReactionCoordinate::coordinate_abs_diff();
        else
            throw ConfigError("unknown reaction coordinate '" + xi + "'");
        if (problem == "bm2d_min" && initial.dim() != 2)
            throw ConfigError("bm2d_min needs a two-dimensional start");
        s.initial = initial;
        s.sampler.ladder = ToleranceLadder(eps1, rho);
        s.sampler.segment_length = segment_length;
        s.sampler.layer_grid_ratio = layer_grid_ratio;
        s.level_tolerance_scale = level_tolerance_scale;
        s.refine_strategy = refine_strategy;
        s.split_grid = split_grid;
        s.max_refinements = max_refinements;
        s.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return s;
}

EulerSchedule RunConfig::euler_schedule() const {
    EulerSchedule e;
    e.h0 = euler_h0;
    e.rescale = euler_rescale;
    return e;
}

std::optional<double> RunConfig::true_p() const {
    if (xi != "identity" || initial.dim() != 1) return std::nullopt;
    // The hitting probability is linear in the start, so a uniform start
    // averages to its midpoint.
    const double x = 0.5 * (initial.lower[0] + initial.upper[0]);
    return (x - z_A) / (levels.back() - z_A);
}

bool RunConfig::same_problem(const RunConfig& o) const {
    return problem == o.problem && xi == o.xi && initial.kind == o.initial.kind &&
           initial.lower == o.initial.lower && initial.upper == o.initial.upper && z_A == o.z_A &&
           levels == o.levels;
}

TrialResult run_trial(const RunConfig& cfg, std::size_t trial) {
    TrialResult r;
    r.trial = trial;
    const SplitConfig split = cfg.split_config();
    const RngStream stream(cfg.seed, trial);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        switch (cfg.method) {
            case Method::exact_fixed: r.estimate = exact_mls_fixed(split, stream); break;
            case Method::exact_smc: r.estimate = exact_mls_smc(split, stream); break;
            case Method::euler_fixed:
            case Method::euler_smc: r.estimate = euler_mls(split, cfg.euler_schedule(), stream); break;
        }
    } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
    }
    r.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<TrialResult> run_trials(const RunConfig& cfg, unsigned jobs) {
    std::vector<TrialResult> results(cfg.trials);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < cfg.trials; t = next++) results[t] = run_trial(cfg, t);
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cfg.trials)));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return results;
}

Summary summarize(const std::vector<TrialResult>& results) {
    Summary s;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& r : results) {
        if (r.failed) {
            ++s.failures;
            continue;
        }
        ++s.completed;
        sum += r.estimate.p_hat;
        sum_sq += r.estimate.p_hat * r.estimate.p_hat;
        s.mean_cells += static_cast<double>(r.estimate.cost.cells_sampled);
        s.mean_refinements += static_cast<double>(r.estimate.cost.refinements);
    }
    if (s.completed == 0) return s;
    const double n = static_cast<double>(s.completed);
    s.mean = sum / n;
    s.variance = s.completed > 1 ? std::max(0.0, (sum_sq - n * s.mean * s.mean) / (n - 1.0)) : 0.0;
    s.std_error = std::sqrt(s.variance / n);
    s.relative_variance = s.mean > 0.0 ? s.variance / (s.mean * s.mean) : 0.0;
    s.mean_cells /= n;
    s.mean_refinements /= n;
    return s;
}

void write_trials_csv(std::ostream& os, const RunConfig& cfg,
                      const std::vector<TrialResult>& results, bool timing) {
    const std::size_t m = cfg.levels.size();
    os << "trial,p_hat";
    for (std::size_t i = 1; i <= m; ++i) os << ",N_" << i;
    os << ",extinct,cells,refinements,millis\n";
    for (const auto& r : results) {
        os << r.trial << ',';
        if (r.failed) {
            os << "NA";
            for (std::size_t i = 0; i < m; ++i) os << ',';
            os << ",,,";
        } else {
            const Estimate& e = r.estimate;
            os << fmt_double(e.p_hat);
            for (std::size_t i = 0; i < m; ++i) os << ',' << (i < e.N.size() ? e.N[i] : 0);
            os << ',' << (e.extinct ? 1 : 0) << ',' << e.cost.cells_sampled << ','
               << e.cost.refinements << ',';
        }
        if (timing) os << fmt_double(r.millis);
        os << '\n';
    }
}

json summary_json(const RunConfig& cfg, const std::vector<TrialResult>& results,
                  double runtime_seconds) {
    const Summary s = summarize(results);
    json j;
    j["problem"] = cfg.problem;
    j["label"] = cfg.display_label();
    j["method"] = to_string(cfg.method);
    j["trials"] = results.size();
    j["completed"] = s.completed;
    j["failures"] = s.failures;
    j["mean"] = s.mean;
    j["std_error"] = s.std_error;
    j["variance"] = s.variance;
    j["relative_variance"] = s.relative_variance;
    const auto truth = cfg.true_p();
    j["true_p"] = truth ? json(*truth) : json(nullptr);
    j["runtime_seconds"] = runtime_seconds;
    j["mean_cells"] = s.mean_cells;
    j["mean_refinements"] = s.mean_refinements;
    std::vector<double> level_means(cfg.levels.size(), 0.0);
    std::uint64_t steps = 0;
    for (const auto& r : results) {
        if (r.failed) continue;
        for (std::size_t i = 0; i < level_means.size() && i < r.estimate.p_level.size(); ++i)
            level_means[i] += r.estimate.p_level[i];
        steps += r.estimate.euler_steps;
    }
    for (auto& v : level_means) v = s.completed ? v / static_cast<double>(s.completed) : 0.0;
    j["level_ratio_means"] = level_means;
    if (!cfg.is_exact()) j["euler_steps"] = steps;
    json errors = json::array();
    for (const auto& r : results)
        if (r.failed) errors.push_back({{"trial", r.trial}, {"error", r.error}});
    j["failed_trials"] = errors;
    j["config"] = to_json(cfg);
    return j;
}

double reference_bandwidth(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("reference_bandwidth: no samples");
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    double h = 1.06 * sd * std::pow(n, -0.2);
    // Degenerate samples still get a usable kernel.
    if (!(h > 0.0)) h = std::max(1e-3 * std::abs(mean), 1e-12);
    return h;
}

DensityEstimate kernel_density(const std::vector<double>& samples, const std::vector<double>& grid) {
    DensityEstimate d;
    d.bandwidth = reference_bandwidth(samples);
    d.grid = grid;
    const double norm = 1.0 / (static_cast<double>(samples.size()) * d.bandwidth *
                               std::sqrt(2.0 * std::numbers::pi));
    for (double g : grid) {
        double acc = 0.0;
        for (double v : samples) {
            const double z = (g - v) / d.bandwidth;
            acc += std::exp(-0.5 * z * z);
        }
        d.density.push_back(acc * norm);
    }
    return d;
}

namespace {

void apply_overrides(RunConfig& cfg, const RunOptions& opts) {
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.trials) {
        if (*opts.trials < 1) throw ConfigError("trials must be at least 1");
        cfg.trials = *opts.trials;
    }
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

std::vector<double> completed_estimates(const std::vector<TrialResult>& results) {
    std::vector<double> v;
    for (const auto& r : results)
        if (!r.failed) v.push_back(r.estimate.p_hat);
    return v;
}

}  // namespace

int command_run(const std::string& config_path, const RunOptions& opts, std::ostream& log) {
    RunConfig cfg;
    try {
        cfg = load_run_config(config_path);
        apply_overrides(cfg, opts);
    } catch (const ConfigError& e) {
        log << "invalid configuration: " << e.what() << '\n';
        return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = run_trials(cfg, opts.jobs);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::filesystem::path dir(opts.out_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_trials_csv(csv, cfg, results, opts.timing);
    write_file(dir / "trials.csv", csv.str());
    const json summary = summary_json(cfg, results, secs);
    write_file(dir / "summary.json", summary.dump(2) + "\n");

    log << cfg.display_label() << ": mean " << summary["mean"].get<double>() << " (se "
        << summary["std_error"].get<double>() << ") over " << summary["completed"].get<std::size_t>()
        << " trials";
    if (!summary["true_p"].is_null()) log << ", true p " << summary["true_p"].get<double>();
    log << ", " << summary["failures"].get<std::size_t>() << " failed, " << secs << " s\n";
    return 0;
}

int command_compare(const std::vector<std::string>& paths, const RunOptions& opts,
                    std::ostream& log) {
    if (paths.empty()) {
        log << "compare: no configurations given\n";
        return 2;
    }
    std::vector<RunConfig> cfgs;
    try {
        for (const auto& p : paths) {
            cfgs.push_back(load_run_config(p));
            apply_overrides(cfgs.back(), opts);
        }
    } catch (const ConfigError& e) {
        log << "invalid configuration: " << e.what() << '\n';
        return 2;
    }
    for (std::size_t i = 1; i < cfgs.size(); ++i)
        if (!cfgs[i].same_problem(cfgs[0])) {
            log << "compare: " << paths[i] << " describes a different problem than " << paths[0]
                << '\n';
            return 2;
        }

    const std::filesystem::path dir(opts.out_dir);
    std::filesystem::create_directories(dir);
    std::vector<std::vector<TrialResult>> all;
    std::vector<double> secs;
    for (const auto& c : cfgs) {
        const auto t0 = std::chrono::steady_clock::now();
        all.push_back(run_trials(c, opts.jobs));
        secs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    std::ostringstream samples;
    samples << "label,method,trial,p_hat\n";
    double lo = kInf;
    double hi = -kInf;
    double widest = 0.0;
    std::vector<std::vector<double>> values;
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        for (const auto& r : all[i])
            if (!r.failed)
                samples << cfgs[i].display_label() << ',' << to_string(cfgs[i].method) << ','
                        << r.trial << ',' << fmt_double(r.estimate.p_hat) << '\n';
        values.push_back(completed_estimates(all[i]));
        if (values.back().empty()) continue;
        const auto [mn, mx] = std::minmax_element(values.back().begin(), values.back().end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
        widest = std::max(widest, reference_bandwidth(values.back()));
    }
    write_file(dir / "samples.csv", samples.str());

    constexpr int kGrid = 256;
    std::vector<double> grid;
    if (lo <= hi) {
        const double a = lo - 3.0 * widest;
        const double b = hi + 3.0 * widest;
        for (int k = 0; k < kGrid; ++k) grid.push_back(a + (b - a) * k / (kGrid - 1));
    }
    std::ostringstream density;
    density << "label,method,x,density\n";
    json methods = json::array();
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        json entry = summary_json(cfgs[i], all[i], secs[i]);
        if (!values[i].empty()) {
            const DensityEstimate d = kernel_density(values[i], grid);
            for (std::size_t k = 0; k < grid.size(); ++k)
                density << cfgs[i].display_label() << ',' << to_string(cfgs[i].method) << ','
                        << fmt_double(grid[k]) << ',' << fmt_double(d.density[k]) << '\n';
            entry["bandwidth"] = d.bandwidth;
        }
        if (!entry["true_p"].is_null())
            entry["bias"] = entry["mean"].get<double>() - entry["true_p"].get<double>();
        methods.push_back(std::move(entry));
    }
    write_file(dir / "density.csv", density.str());

    json summary;
    if (cfgs.size() == 1) {
        summary = methods[0];
    } else {
        summary["problem"] = cfgs[0].problem;
        const auto truth = cfgs[0].true_p();
        summary["true_p"] = truth ? json(*truth) : json(nullptr);
        summary["methods"] = methods;
    }
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    for (const auto& m : methods)
        log << m["label"].get<std::string>() << ": mean " << m["mean"].get<double>() << " (se "
            << m["std_error"].get<double>() << ")\n";
    return 0;
}

}  // namespace esplit
