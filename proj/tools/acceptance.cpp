// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "esplit/experiment.hpp"

#include <CLI11.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace esplit;

namespace {

// Tolerances, pinned.
constexpr int kCrossingRuns = 10'000;
constexpr double kCrossingSigmas = 4.0;
constexpr double kTestLevel = 0.01;
constexpr double kGapShrink = 0.5;
constexpr double kGeometricSe = 3.0;

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Sample {
    std::size_t n = 0;
    std::size_t failed = 0;
    double mean = 0.0;
    double se = 0.0;
};

Sample completed(const std::vector<TrialResult>& rs) {
    const Summary s = summarize(rs);
    return {s.completed, s.failures, s.mean, s.std_error};
}

// Two-sided one-sample t-test p-value.
double t_pvalue(const Sample& s, double mu) {
    if (s.n < 2 || !(s.se > 0.0)) return s.mean == mu ? 1.0 : 0.0;
    const boost::math::students_t dist(static_cast<double>(s.n - 1));
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(s.mean - mu) / s.se));
}

RunConfig load(const fs::path& dir, const std::string& name) { return load_run_config((dir / name).string()); }

int shell(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void crossing_law(std::uint64_t seed) {
    EsSamplerConfig sc;
    sc.ladder = ToleranceLadder(0.5, 1.0 / 3.0);
    const BrownianSampler sampler(sc);
    const auto xi = ReactionCoordinate::identity_1d();
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    for (double b : {2.0, 3.0, 9.0}) {
        int up = 0, errors = 0;
        for (int r = 0; r < kCrossingRuns; ++r) {
            RngStream rng(seed + static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(r));
            try {
                const Skeleton sk = sampler.sample_segment(rng, Point{1.0}, 0.0, 1.0, 1);
                up += two_sided_crossing(rng, sampler, sk, xi, 0.0, b, 1).D == 1;
            } catch (const NonConvergenceError&) {
                ++errors;
            }
        }
        const int n = kCrossingRuns - errors;
        const double p = 1.0 / b;
        const double f = up / static_cast<double>(n);
        const double tol = kCrossingSigmas * std::sqrt(p * (1.0 - p) / n);
        const bool this_ok = std::abs(f - p) <= tol && errors == 0;
        ok = ok && this_ok;
        detail += fmt("b=%g freq %.4f vs %.4f (tol %.4f, %d errors); ", b, f, p, tol, errors);
    }
    detail += fmt("%.1f s", seconds_since(t0));
    report("C1 two-sided crossing law a/b", ok, detail);
}

void unbiasedness(const fs::path& configs, unsigned jobs) {
    const RunConfig cfg = load(configs, "bm1d_two_level_smc.json");
    const auto t0 = std::chrono::steady_clock::now();
    const Sample s = completed(run_trials(cfg, jobs));
    const double pv = t_pvalue(s, 1.0 / 9.0);
    report("C2 exact SMC unbiased (N=200, 1000 reps)", pv >= kTestLevel,
           fmt("mean %.5f se %.5f vs 1/9=%.5f, t-test p=%.3f (needs >= %.2f), %zu failed, %.1f s", s.mean,
               s.se, 1.0 / 9.0, pv, kTestLevel, s.failed, seconds_since(t0)));
}

void euler_bias(const fs::path& configs, unsigned jobs) {
    const double truth = 1.0 / 9.0;
    const auto t0 = std::chrono::steady_clock::now();
    const Sample coarse = completed(run_trials(load(configs, "bm1d_two_level_euler_0.1.json"), jobs));
    const Sample fine = completed(run_trials(load(configs, "bm1d_two_level_euler_0.001.json"), jobs));
    const double pv = t_pvalue(coarse, truth);
    const double gap_coarse = std::abs(coarse.mean - truth);
    const double gap_fine = std::abs(fine.mean - truth);
    report("C3a Euler h0=0.1 rejected at 1% with mean below truth", pv < kTestLevel && coarse.mean < truth,
           fmt("mean %.5f se %.5f vs %.5f, t-test p=%.2e, direction %s", coarse.mean, coarse.se, truth, pv,
               coarse.mean < truth ? "below" : "ABOVE"));
    report("C3b Euler gap shrinks by half at h0=0.001", gap_fine <= kGapShrink * gap_coarse,
           fmt("gap %.5f -> %.5f (fine mean %.5f se %.5f), %.1f s", gap_coarse, gap_fine, fine.mean, fine.se,
               seconds_since(t0)));
}

void deep_levels(const fs::path& configs, unsigned jobs) {
    RunConfig deep = load(configs, "bm1d_18level.json");
    deep.trials = 1;
    auto t0 = std::chrono::steady_clock::now();
    const TrialResult one = run_trial(deep, 0);
    report("C4a 18-level exact fixed run completes", !one.failed && one.estimate.p_hat >= 0.0,
           one.failed ? "error: " + one.error
                      : fmt("p_hat %.4e (3^-18 = %.4e), %.1f s", one.estimate.p_hat, std::pow(3.0, -18.0),
                            seconds_since(t0)));

    t0 = std::chrono::steady_clock::now();
    const Sample s = completed(run_trials(load(configs, "bm1d_6level.json"), jobs));
    const double truth = std::pow(3.0, -6.0);
    report("C4b 6-level mean within 3 se of 3^-6", std::abs(s.mean - truth) <= kGeometricSe * s.se,
           fmt("mean %.4e se %.2e vs %.4e (%.2f se), %zu failed, %.1f s", s.mean, s.se, truth,
               std::abs(s.mean - truth) / s.se, s.failed, seconds_since(t0)));
}

void property_suites(const fs::path& tests) {
    struct Suite {
        const char* name;
        const char* binary;
        const char* filter;
    };
    const Suite suites[] = {
        {"skeleton algebra", "skeleton_test", "Compatible.*:Concat.*:Skeleton.*"},
        {"refinement nesting", "brownian_test", "RefineCell.*"},
        {"endpoint laws", "brownian_test", "SampleSegment.*:Extend.*"},
        {"classification vs brute force", "barriers_test", "ClassifySingle.*:ClassifyTwoSided.*"},
        {"block decomposition example", "barriers_test", "BlockDecompose.*"},
        {"retrospective Bernoulli and bounds", "sampling_test",
         "RetrospectiveBernoulli.*:BridgeExceedance.*:BridgeStayBounds.*"},
    };
    char tag = 'a';
    for (const auto& s : suites) {
        const auto t0 = std::chrono::steady_clock::now();
        const fs::path bin = tests / s.binary;
        const int code = shell(bin.string() + " --gtest_filter='" + s.filter + "'");
        report(fmt("C5%c property suite: %s", tag++, s.name), code == 0,
               fmt("%s [%s] exit %d, %.1f s", s.binary, s.filter, code, seconds_since(t0)));
    }
}

void determinism(const fs::path& configs, const fs::path& cli) {
    const fs::path dir = fs::temp_directory_path() / "esplit_acceptance";
    fs::remove_all(dir);
    const std::string base = cli.string() + " run --config " + (configs / "bm1d_two_level_smc.json").string() +
                             " --trials 20 --seed 4 --out-dir ";
    const int a = shell(base + (dir / "a").string() + " --jobs 1");
    const int b = shell(base + (dir / "b").string() + " --jobs 4");
    const std::string fa = slurp(dir / "a" / "trials.csv");
    const std::string fb = slurp(dir / "b" / "trials.csv");
    report("C6 same seed gives byte-identical trials.csv", a == 0 && b == 0 && !fa.empty() && fa == fb,
           fmt("exit %d/%d, %zu vs %zu bytes, %s", a, b, fa.size(), fb.size(), fa == fb ? "identical" : "DIFFER"));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string configs = ESPLIT_CONFIG_DIR;
    std::string tests = ESPLIT_TEST_DIR;
    std::string cli = ESPLIT_BIN;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::uint64_t seed = 2024;
    app.add_option("--configs", configs, "Directory of shipped experiment files");
    app.add_option("--tests", tests, "Directory holding the property test binaries");
    app.add_option("--cli", cli, "Path of the esplit binary");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Seed for the crossing-law runs");
    CLI11_PARSE(app, argc, argv);

    const auto t0 = std::chrono::steady_clock::now();
    crossing_law(seed);
    unbiasedness(configs, jobs);
    euler_bias(configs, jobs);
    deep_levels(configs, jobs);
    property_suites(tests);
    determinism(configs, cli);
    std::printf("%d criteria failed, %.1f s total\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
