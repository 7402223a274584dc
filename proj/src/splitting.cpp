#include "esplit/splitting.hpp"

#include <cmath>
#include <limits>

namespace esplit {

InitialLaw InitialLaw::point_mass(Point x) {
    if (x.empty()) throw std::invalid_argument("InitialLaw: empty point");
    InitialLaw law;
    law.kind = Kind::point;
    law.upper = x;
    law.lower = std::move(x);
    return law;
}

InitialLaw InitialLaw::uniform_box(Point lower, Point upper) {
    if (lower.empty() || lower.size() != upper.size())
        throw std::invalid_argument("InitialLaw: box corners disagree in dimension");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] <= upper[i])) throw std::invalid_argument("InitialLaw: inverted box");
    InitialLaw law;
    law.kind = Kind::box;
    law.lower = std::move(lower);
    law.upper = std::move(upper);
    return law;
}

Point InitialLaw::draw(RngStream& rng) const {
    if (kind == Kind::point) return lower;
    Point x(lower.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = lower[i] + (upper[i] - lower[i]) * rng.uniform();
    return x;
}

Box InitialLaw::support() const { return Box{lower, upper}; }

void SplitConfig::validate() const {
    if (particles < 1) throw std::invalid_argument("SplitConfig: need at least one particle");
    if (mode == SplitMode::fixed) {
        if (ratios.size() + 1 != levels.m())
            throw std::invalid_argument("SplitConfig: need one splitting ratio per level after the first");
        for (auto r : ratios)
            if (r < 1) throw std::invalid_argument("SplitConfig: splitting ratios must be >= 1");
    }
    if (initial.dim() != xi.dim())
        throw std::invalid_argument("SplitConfig: initial law and reaction coordinate disagree in dimension");
    const Box support = initial.support();
    if (xi.inf_over(support) < levels.z_A() || xi.sup_over(support) >= levels.z(1))
        throw std::invalid_argument("SplitConfig: initial law must be supported in [z_A, z_1)");
    if (!(level_tolerance_scale > 0.0))
        throw std::invalid_argument("SplitConfig: level tolerance scale must be positive");
    if (split_grid < 0.0) throw std::invalid_argument("SplitConfig: negative split grid");
    if (max_refinements < 1) throw std::invalid_argument("SplitConfig: refinement cap < 1");
    sampler.validate();
}

int SplitConfig::extension_level(std::size_t i) const {
    return sampler.ladder.level_for_scale(std::pow(level_tolerance_scale, static_cast<double>(i - 1)));
}

double fixed_estimate(std::size_t N0, const std::vector<std::size_t>& ratios,
                      const std::vector<std::size_t>& N) {
    double denom = static_cast<double>(N0);
    for (auto r : ratios) denom *= static_cast<double>(r);
    return static_cast<double>(N.back()) / denom;
}

double smc_estimate(std::size_t N, const std::vector<std::size_t>& counts) {
    double p = 1.0;
    for (auto n : counts) p *= static_cast<double>(n) / static_cast<double>(N);
    return p;
}

ParticleRecord advance_particle(RngStream& rng, const BrownianSampler& sampler,
                                const SplitConfig& cfg, std::size_t i,
                                const ParticleRecord* from, SamplerStats* stats) {
    Skeleton start;
    if (from) {
        start = from->skeleton;
    } else {
        const Point x0 = cfg.initial.draw(rng);
        // On a split grid every segment is one grid step, so the decision
        // segment ends at the first grid point past the guaranteed crossing.
        const double len = cfg.split_grid > 0.0 ? cfg.split_grid : cfg.sampler.segment_length;
        start = sampler.sample_segment(rng, x0, 0.0, len,
                                       cfg.extension_level(1), stats);
    }
    CrossingOptions opts;
    opts.strategy = cfg.refine_strategy;
    opts.max_refinements = cfg.max_refinements;
    opts.extension_length = cfg.split_grid;
    CrossingVerdict v = two_sided_crossing(rng, sampler, start, cfg.xi, cfg.levels.z_A(),
                                           cfg.levels.z(i), cfg.extension_level(i), opts, stats);
    ParticleRecord rec;
    rec.alive = v.D == 1;
    rec.level_reached = rec.alive ? static_cast<int>(i) : static_cast<int>(i) - 1;
    rec.skeleton = std::move(v.full);
    rec.sigma_tilde = v.sigma_tilde;
    rec.x_at_sigma_tilde = rec.skeleton.terminal();
    return rec;
}

namespace {

constexpr std::uint64_t kResampleTag = std::numeric_limits<std::uint64_t>::max();

Estimate finish(Estimate e, std::size_t m) {
    e.N.resize(m, 0);
    e.p_level.resize(m, 0.0);
    return e;
}

}  // namespace

Estimate exact_mls_fixed(const SplitConfig& cfg, const RngStream& stream) {
    cfg.validate();
    if (cfg.mode != SplitMode::fixed)
        throw std::invalid_argument("exact_mls_fixed: configuration is not in fixed mode");
    const BrownianSampler sampler(cfg.sampler);
    const std::size_t m = cfg.levels.m();
    Estimate e;

    std::vector<ParticleRecord> survivors;
    for (std::size_t j = 0; j < cfg.particles; ++j) {
        RngStream rng = stream.child({1, j});
        ParticleRecord r = advance_particle(rng, sampler, cfg, 1, nullptr, &e.cost);
        if (r.alive) survivors.push_back(std::move(r));
    }
    e.N.push_back(survivors.size());
    e.p_level.push_back(static_cast<double>(survivors.size()) / static_cast<double>(cfg.particles));

    for (std::size_t i = 2; i <= m; ++i) {
        if (survivors.empty()) {
            e.extinct = true;
            e.p_hat = 0.0;
            return finish(std::move(e), m);
        }
        const std::size_t R = cfg.ratios[i - 2];
        std::vector<ParticleRecord> next;
        for (std::size_t j = 0; j < survivors.size(); ++j) {
            for (std::size_t k = 0; k < R; ++k) {
                RngStream rng = stream.child({i, j, k});
                ParticleRecord r = advance_particle(rng, sampler, cfg, i, &survivors[j], &e.cost);
                if (r.alive) next.push_back(std::move(r));
            }
        }
        e.p_level.push_back(static_cast<double>(next.size()) /
                            static_cast<double>(R * survivors.size()));
        e.N.push_back(next.size());
        survivors = std::move(next);
    }
    e.extinct = e.N.back() == 0;
    e.p_hat = fixed_estimate(cfg.particles, cfg.ratios, e.N);
    return e;
}

Estimate exact_mls_smc(const SplitConfig& cfg, const RngStream& stream) {
    cfg.validate();
    const BrownianSampler sampler(cfg.sampler);
    const std::size_t m = cfg.levels.m();
    const std::size_t N = cfg.particles;
    Estimate e;

    std::vector<ParticleRecord> survivors;
    for (std::size_t j = 0; j < N; ++j) {
        RngStream rng = stream.child({1, j});
        ParticleRecord r = advance_particle(rng, sampler, cfg, 1, nullptr, &e.cost);
        if (r.alive) survivors.push_back(std::move(r));
    }
    e.N.push_back(survivors.size());
    e.p_level.push_back(static_cast<double>(survivors.size()) / static_cast<double>(N));

    for (std::size_t i = 2; i <= m; ++i) {
        if (survivors.empty()) {
            e.extinct = true;
            e.p_hat = 0.0;
            return finish(std::move(e), m);
        }
        RngStream resample = stream.child({i, kResampleTag});
        std::vector<ParticleRecord> next;
        for (std::size_t j = 0; j < N; ++j) {
            const auto a = static_cast<std::size_t>(resample.below(survivors.size()));
            RngStream rng = stream.child({i, j});
            ParticleRecord r = advance_particle(rng, sampler, cfg, i, &survivors[a], &e.cost);
            if (r.alive) next.push_back(std::move(r));
        }
        e.N.push_back(next.size());
        e.p_level.push_back(static_cast<double>(next.size()) / static_cast<double>(N));
        survivors = std::move(next);
    }
    e.extinct = e.N.back() == 0;
    e.p_hat = smc_estimate(N, e.N);
    return e;
}

Point euler_kernel(RngStream& rng, const Point& x, double h, const DriftFn& mu, const VolFn& sigma) {
    if (!(h > 0.0)) throw std::invalid_argument("euler_kernel: step must be positive");
    Point y = x;
    const double sq = std::sqrt(h);
    const Point drift = mu ? mu(x) : Point{};
    const Point vol = sigma ? sigma(x) : Point{};
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (mu) y[i] += drift[i] * h;
        const double s = sigma ? vol[i] : 1.0;
        if (s != 0.0) y[i] += s * sq * rng.standard_normal();
    }
    return y;
}

double EulerSchedule::step(std::size_t i) const {
    return h0 * std::pow(rescale, static_cast<double>(i - 1));
}

namespace {

struct EulerParticle {
    Point x;
    bool alive = true;
};

EulerParticle run_euler(RngStream& rng, const SplitConfig& cfg, const EulerSchedule& sch,
                        std::size_t i, Point x, std::uint64_t& steps) {
    const double h = sch.step(i);
    const double z_A = cfg.levels.z_A();
    const double z_i = cfg.levels.z(i);
    for (std::uint64_t n = 0;; ++n) {
        const double v = cfg.xi.eval(x);
        if (v <= z_A) return {std::move(x), false};
        if (v >= z_i) return {std::move(x), true};
        if (n >= sch.max_steps)
            throw NonConvergenceError("Euler particle exceeded its step budget", {0.0, 1.0}, 0);
        x = euler_kernel(rng, x, h, sch.drift, sch.vol);
        ++steps;
    }
}

}  // namespace

Estimate euler_mls(const SplitConfig& cfg, const EulerSchedule& schedule, const RngStream& stream) {
    cfg.validate();
    if (!(schedule.h0 > 0.0) || !(schedule.rescale > 0.0))
        throw std::invalid_argument("euler_mls: step schedule must be positive");
    const std::size_t m = cfg.levels.m();
    const std::size_t N0 = cfg.particles;
    const bool fixed = cfg.mode == SplitMode::fixed;
    Estimate e;

    std::vector<Point> survivors;
    for (std::size_t j = 0; j < N0; ++j) {
        RngStream rng = stream.child({1, j});
        auto p = run_euler(rng, cfg, schedule, 1, cfg.initial.draw(rng), e.euler_steps);
        if (p.alive) survivors.push_back(std::move(p.x));
    }
    e.N.push_back(survivors.size());
    e.p_level.push_back(static_cast<double>(survivors.size()) / static_cast<double>(N0));

    for (std::size_t i = 2; i <= m; ++i) {
        if (survivors.empty()) {
            e.extinct = true;
            e.p_hat = 0.0;
            return finish(std::move(e), m);
        }
        std::vector<Point> next;
        std::size_t tried = 0;
        if (fixed) {
            const std::size_t R = cfg.ratios[i - 2];
            for (std::size_t j = 0; j < survivors.size(); ++j)
                for (std::size_t k = 0; k < R; ++k) {
                    RngStream rng = stream.child({i, j, k});
                    auto p = run_euler(rng, cfg, schedule, i, survivors[j], e.euler_steps);
                    if (p.alive) next.push_back(std::move(p.x));
                    ++tried;
                }
        } else {
            RngStream resample = stream.child({i, kResampleTag});
            for (std::size_t j = 0; j < N0; ++j) {
                const auto a = static_cast<std::size_t>(resample.below(survivors.size()));
                RngStream rng = stream.child({i, j});
                auto p = run_euler(rng, cfg, schedule, i, survivors[a], e.euler_steps);
                if (p.alive) next.push_back(std::move(p.x));
                ++tried;
            }
        }
        e.N.push_back(next.size());
        e.p_level.push_back(static_cast<double>(next.size()) / static_cast<double>(tried));
        survivors = std::move(next);
    }
    e.extinct = e.N.back() == 0;
    e.p_hat = fixed ? fixed_estimate(N0, cfg.ratios, e.N) : smc_estimate(N0, e.N);
    return e;
}

}  // namespace esplit
