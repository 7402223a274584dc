#pragma once

// Multilevel splitting estimators for P(tau_B < tau_A): the exact versions
// driven by epsilon-strong crossings, and Euler-Maruyama baselines with
// discrete barrier monitoring.

#include "esplit/barriers.hpp"
#include "esplit/brownian.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace esplit {

struct InitialLaw {
    enum class Kind { point, box };
    Kind kind = Kind::point;
    Point lower;  // the point itself for Kind::point
    Point upper;

    static InitialLaw point_mass(Point x);
    static InitialLaw uniform_box(Point lower, Point upper);

    std::size_t dim() const { return lower.size(); }
    Point draw(RngStream& rng) const;
    Box support() const;
};

struct ParticleRecord {
    Skeleton skeleton;
    double sigma_tilde = 0.0;
    Point x_at_sigma_tilde;
    int level_reached = 0;
    bool alive = true;
};

enum class SplitMode { fixed, smc };

struct SplitConfig {
    SplitMode mode = SplitMode::smc;
    /// N_0 in fixed mode, N in SMC mode.
    std::size_t particles = 100;
    /// R_1 .. R_{m-1}; fixed mode only.
    std::vector<std::size_t> ratios;
    LevelSystem levels{0.0, {1.0}};
    ReactionCoordinate xi = ReactionCoordinate::identity_1d();
    InitialLaw initial = InitialLaw::point_mass(Point{0.5});
    EsSamplerConfig sampler;
    /// Extension segments for level i use the ladder tolerance closest to
    /// eps1 * scale^(i-1).
    double level_tolerance_scale = 1.0;
    RefineStrategy refine_strategy = RefineStrategy::first;
    /// Sample paths in segments of this length so survivors split at the
    /// first grid point past the guaranteed crossing; 0 uses segment_length.
    double split_grid = 0.0;
    long max_refinements = 1'000'000;

    void validate() const;
    /// Ladder level for the fresh segments sampled at MLS level i (1-based).
    int extension_level(std::size_t i) const;
};

struct Estimate {
    double p_hat = 0.0;
    std::vector<std::size_t> N;      // N_1 .. N_m (zeros after extinction)
    std::vector<double> p_level;     // per-level ratio estimates
    bool extinct = false;
    SamplerStats cost;
    std::uint64_t euler_steps = 0;
};

/// p_hat recomputed from the stored counts.
double fixed_estimate(std::size_t N0, const std::vector<std::size_t>& ratios,
                      const std::vector<std::size_t>& N);
double smc_estimate(std::size_t N, const std::vector<std::size_t>& counts);

/// One exact MLS crossing step from a survivor (or from time 0 when `from`
/// is empty): runs the two-sided decision against (z_A, z_i).
ParticleRecord advance_particle(RngStream& rng, const BrownianSampler& sampler,
                                const SplitConfig& cfg, std::size_t i,
                                const ParticleRecord* from, SamplerStats* stats);

Estimate exact_mls_fixed(const SplitConfig& cfg, const RngStream& stream);
Estimate exact_mls_smc(const SplitConfig& cfg, const RngStream& stream);

using DriftFn = std::function<Point(const Point&)>;
/// Diagonal volatility, one entry per coordinate.
using VolFn = std::function<Point(const Point&)>;

/// x + mu(x) h + sigma(x) sqrt(h) Z. Empty functions mean zero drift and
/// unit volatility.
Point euler_kernel(RngStream& rng, const Point& x, double h, const DriftFn& mu = {},
                   const VolFn& sigma = {});

struct EulerSchedule {
    double h0 = 0.01;
    /// Step multiplier applied at each new level.
    double rescale = 1.0;
    std::uint64_t max_steps = 1'000'000'000ULL;
    DriftFn drift;
    VolFn vol;

    double step(std::size_t i) const;
};

/// G_i(x) = 1 iff xi(x) >= z_i.
inline bool potential(const ReactionCoordinate& xi, const Point& x, double z_i) {
    return xi.eval(x) >= z_i;
}

Estimate euler_mls(const SplitConfig& cfg, const EulerSchedule& schedule, const RngStream& stream);

}  // namespace esplit
