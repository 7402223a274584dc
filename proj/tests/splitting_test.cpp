#include "esplit/splitting.hpp"
#include "stat_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace esplit;

namespace {

SplitConfig bm1d(std::vector<double> levels, SplitMode mode, std::size_t particles,
                 std::vector<std::size_t> ratios = {}, double x0 = 1.0, double z_A = 0.0) {
    SplitConfig cfg;
    cfg.mode = mode;
    cfg.particles = particles;
    cfg.ratios = std::move(ratios);
    cfg.levels = LevelSystem(z_A, std::move(levels));
    cfg.xi = ReactionCoordinate::identity_1d();
    cfg.initial = InitialLaw::point_mass(Point{x0});
    cfg.sampler.ladder = ToleranceLadder(0.5, 1.0 / 3.0);
    cfg.level_tolerance_scale = 3.0;
    return cfg;
}

template <class Fn>
std::vector<Estimate> replicate(int reps, std::uint64_t seed, Fn&& run) {
    std::vector<Estimate> out;
    for (int r = 0; r < reps; ++r) out.push_back(run(RngStream(seed, static_cast<std::uint64_t>(r))));
    return out;
}

std::vector<double> p_hats(const std::vector<Estimate>& es) {
    std::vector<double> v;
    for (const auto& e : es) v.push_back(e.p_hat);
    return v;
}

}  // namespace

TEST(Estimators, Arithmetic) {
    EXPECT_DOUBLE_EQ(fixed_estimate(100, {2, 2}, {80, 70, 50}), 0.125);
    EXPECT_DOUBLE_EQ(smc_estimate(10, {10, 10, 10}), 1.0);
    EXPECT_DOUBLE_EQ(smc_estimate(10, {5, 2}), 0.1);
    EXPECT_EQ(smc_estimate(10, {0, 0}), 0.0);
}

TEST(ExactMls, AllSurviveGivesOne) {
    const auto cfg = bm1d({1.001, 1.002}, SplitMode::smc, 20, {}, 1.0, -1000.0);
    const Estimate e = exact_mls_smc(cfg, RngStream(1, 0));
    EXPECT_EQ(e.p_hat, 1.0);
    EXPECT_EQ(e.N, (std::vector<std::size_t>{20, 20}));
    EXPECT_FALSE(e.extinct);
}

TEST(ExactMls, ExtinctionGivesZero) {
    for (const auto mode : {SplitMode::smc, SplitMode::fixed}) {
        const auto cfg = bm1d({50.0, 60.0, 70.0}, mode, 5, {2, 2}, 1.0, 0.999);
        const Estimate e = mode == SplitMode::smc ? exact_mls_smc(cfg, RngStream(2, 0))
                                                  : exact_mls_fixed(cfg, RngStream(2, 0));
        EXPECT_EQ(e.p_hat, 0.0);
        EXPECT_TRUE(e.extinct);
        EXPECT_EQ(e.N, (std::vector<std::size_t>{0, 0, 0}));
        EXPECT_EQ(e.p_level.size(), 3u);
    }
}

TEST(ExactMls, IdentitiesAndAbsorption) {
    const auto fixed = bm1d({2.0, 4.0, 8.0}, SplitMode::fixed, 20, {2, 3});
    const auto smc = bm1d({2.0, 4.0, 8.0}, SplitMode::smc, 20);
    for (int r = 0; r < 40; ++r) {
        const Estimate f = exact_mls_fixed(fixed, RngStream(3, static_cast<std::uint64_t>(r)));
        ASSERT_EQ(f.N.size(), 3u);
        EXPECT_EQ(f.p_hat, fixed_estimate(20, {2, 3}, f.N));
        EXPECT_LE(f.N[1], 2 * f.N[0]);
        EXPECT_LE(f.N[2], 3 * f.N[1]);
        EXPECT_EQ(f.extinct, f.p_hat == 0.0);
        const Estimate s = exact_mls_smc(smc, RngStream(4, static_cast<std::uint64_t>(r)));
        EXPECT_EQ(s.p_hat, smc_estimate(20, s.N));
        EXPECT_EQ(s.extinct, s.p_hat == 0.0);
        for (std::size_t i = 1; i < s.N.size(); ++i)
            if (s.N[i - 1] == 0) EXPECT_EQ(s.N[i], 0u);
        EXPECT_GT(s.cost.cells_sampled, 0u);
    }
}

TEST(ExactMls, DeterministicForSameStream) {
    const auto cfg = bm1d({3.0, 9.0}, SplitMode::smc, 30);
    const Estimate a = exact_mls_smc(cfg, RngStream(5, 1));
    const Estimate b = exact_mls_smc(cfg, RngStream(5, 1));
    EXPECT_EQ(a.p_hat, b.p_hat);
    EXPECT_EQ(a.N, b.N);
    EXPECT_EQ(a.cost.cells_sampled, b.cost.cells_sampled);
}

TEST(ExactMls, FixedModeParticlesOwnTheirStreams) {
    // Level-1 outcomes depend only on each particle's stream, so evaluating
    // the particles in reverse order reproduces N_1.
    const auto cfg = bm1d({3.0, 9.0}, SplitMode::fixed, 40, {3});
    const RngStream stream(6, 0);
    const Estimate e = exact_mls_fixed(cfg, stream);
    const BrownianSampler sampler(cfg.sampler);
    std::size_t alive = 0;
    for (std::size_t j = cfg.particles; j-- > 0;) {
        RngStream rng = stream.child({1, j});
        alive += advance_particle(rng, sampler, cfg, 1, nullptr, nullptr).alive;
    }
    EXPECT_EQ(alive, e.N[0]);
}

TEST(ExactMls, FixedSplittingMeanIsOneNinth) {
    const auto cfg = bm1d({3.0, 9.0}, SplitMode::fixed, 60, {3});
    const auto es = replicate(500, 7, [&](const RngStream& s) { return exact_mls_fixed(cfg, s); });
    const auto m = testutil::mean_se(p_hats(es));
    EXPECT_LT(std::abs(m.mean - 1.0 / 9.0), 3.0 * m.se);
}

TEST(ExactMls, SmcMeanAndLevelFactorisation) {
    const auto cfg = bm1d({3.0, 9.0}, SplitMode::smc, 200);
    const auto es = replicate(500, 8, [&](const RngStream& s) { return exact_mls_smc(cfg, s); });
    const auto m = testutil::mean_se(p_hats(es));
    EXPECT_LT(std::abs(m.mean - 1.0 / 9.0), 3.0 * m.se);
    for (std::size_t i = 0; i < 2; ++i) {
        std::vector<double> ratio;
        for (const auto& e : es) ratio.push_back(e.p_level[i]);
        const auto r = testutil::mean_se(ratio);
        EXPECT_LT(std::abs(r.mean - 1.0 / 3.0), 3.0 * r.se) << "level " << i + 1;
    }
}

TEST(ExactMls, GridSplittingKeepsMean) {
    auto cfg = bm1d({3.0, 9.0}, SplitMode::smc, 100);
    cfg.split_grid = 0.25;
    const auto es = replicate(300, 9, [&](const RngStream& s) { return exact_mls_smc(cfg, s); });
    const auto m = testutil::mean_se(p_hats(es));
    EXPECT_LT(std::abs(m.mean - 1.0 / 9.0), 3.0 * m.se);
}

TEST(ExactMls, UniformBoxStartAveragesLinearLaw) {
    auto cfg = bm1d({3.0}, SplitMode::smc, 100);
    cfg.initial = InitialLaw::uniform_box(Point{0.5}, Point{1.5});
    const auto es = replicate(200, 10, [&](const RngStream& s) { return exact_mls_smc(cfg, s); });
    const auto m = testutil::mean_se(p_hats(es));
    EXPECT_LT(std::abs(m.mean - 1.0 / 3.0), 3.0 * m.se);
}

TEST(ExactMls, TwoDimensionalMinRuns) {
    SplitConfig cfg;
    cfg.mode = SplitMode::smc;
    cfg.particles = 30;
    cfg.levels = LevelSystem(0.0, {1.0, 2.0});
    cfg.xi = ReactionCoordinate::coordinate_min();
    cfg.initial = InitialLaw::point_mass(Point{0.5, 0.5});
    cfg.sampler.ladder = ToleranceLadder(0.25, std::sqrt(0.5));
    const Estimate e = exact_mls_smc(cfg, RngStream(11, 0));
    EXPECT_GE(e.p_hat, 0.0);
    EXPECT_LE(e.p_hat, 1.0);
    EXPECT_EQ(e.p_hat, smc_estimate(30, e.N));
}

TEST(SplitConfig, ValidationErrors) {
    auto cfg = bm1d({3.0, 9.0}, SplitMode::fixed, 10, {});
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.ratios = {0};
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.ratios = {3};
    EXPECT_NO_THROW(cfg.validate());
    cfg.initial = InitialLaw::point_mass(Point{3.0});
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.initial = InitialLaw::uniform_box(Point{-0.5}, Point{1.0});
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.initial = InitialLaw::point_mass(Point{1.0, 1.0});
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    EXPECT_THROW(InitialLaw::uniform_box(Point{1.0}, Point{0.0}), std::invalid_argument);
}

TEST(SplitConfig, ExtensionLevelFollowsScale) {
    auto cfg = bm1d({3.0, 9.0, 27.0}, SplitMode::smc, 10);
    EXPECT_EQ(cfg.extension_level(1), 1);
    EXPECT_EQ(cfg.extension_level(2), 0);  // eps1 * 3 on a ladder of ratio 1/3
    EXPECT_EQ(cfg.extension_level(3), -1);
}

TEST(SplitGrid, SurvivorsSplitOnGridPoints) {
    auto cfg = bm1d({3.0, 9.0}, SplitMode::smc, 10);
    cfg.split_grid = 0.3;
    const BrownianSampler s(cfg.sampler);
    RngStream rng(12, 0);
    int alive = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const ParticleRecord r = advance_particle(rng, s, cfg, 1, nullptr, nullptr);
        ASSERT_TRUE(r.skeleton.well_formed());
        ASSERT_EQ(r.skeleton.span_end(), r.sigma_tilde);
        const double steps = r.sigma_tilde / 0.3;
        ASSERT_NEAR(steps, std::round(steps), 1e-9);
        alive += r.alive;
    }
    EXPECT_GT(alive, 0);
}

TEST(EulerKernel, DegenerateAndDrift) {
    RngStream rng(13, 0);
    const Point x{1.0, -2.0};
    const VolFn zero_vol = [](const Point& p) { return Point(p.size(), 0.0); };
    EXPECT_EQ(euler_kernel(rng, x, 0.1, {}, zero_vol), x);
    const DriftFn drift = [](const Point& p) { return Point(p.size(), 0.5); };
    Point y = x;
    for (int k = 0; k < 8; ++k) y = euler_kernel(rng, y, 0.25, drift, zero_vol);
    EXPECT_NEAR(y[0], 1.0 + 0.5 * 8 * 0.25, 1e-12);
    EXPECT_NEAR(y[1], -2.0 + 0.5 * 8 * 0.25, 1e-12);
    EXPECT_THROW(euler_kernel(rng, x, 0.0), std::invalid_argument);
}

TEST(EulerKernel, UnitStepIncrementIsStandardNormal) {
    RngStream rng(14, 0);
    std::vector<double> a, b;
    for (int i = 0; i < 10000; ++i) {
        const Point y = euler_kernel(rng, Point{0.0, 3.0}, 1.0);
        a.push_back(y[0]);
        b.push_back(y[1] - 3.0);
    }
    const auto cdf = [](double x) { return testutil::normal_cdf(x); };
    EXPECT_GT(testutil::ks_pvalue(a, cdf), 0.01);
    EXPECT_GT(testutil::ks_pvalue(b, cdf), 0.01);
}

TEST(EulerMls, PotentialIncludesBoundary) {
    const auto xi = ReactionCoordinate::identity_1d();
    EXPECT_TRUE(potential(xi, Point{3.0}, 3.0));
    EXPECT_FALSE(potential(xi, Point{2.999}, 3.0));
}

TEST(EulerMls, FineStepApproachesLinearLaw) {
    const auto cfg = bm1d({3.0}, SplitMode::smc, 100);
    EulerSchedule sch;
    sch.h0 = 1e-3;
    const auto es = replicate(200, 15, [&](const RngStream& s) { return euler_mls(cfg, sch, s); });
    const auto m = testutil::mean_se(p_hats(es));
    EXPECT_LT(std::abs(m.mean - 1.0 / 3.0), 3.0 * m.se);
    for (const auto& e : es) EXPECT_EQ(e.p_hat, smc_estimate(100, e.N));
}

TEST(EulerMls, CoarseStepBiasIsUpward) {
    // Discrete monitoring misses excursions into A as well as into B; started
    // at 1 between 0 and 3 the missed absorptions dominate and the estimate
    // sits above the continuous-time value.
    const auto cfg = bm1d({3.0}, SplitMode::smc, 100);
    EulerSchedule sch;
    sch.h0 = 0.1;
    const auto es = replicate(500, 16, [&](const RngStream& s) { return euler_mls(cfg, sch, s); });
    const auto v = p_hats(es);
    EXPECT_LT(testutil::t_test_pvalue(v, 1.0 / 3.0), 0.01);
    EXPECT_GT(testutil::mean_se(v).mean, 1.0 / 3.0);
}

TEST(EulerMls, FixedModeIdentities) {
    const auto cfg = bm1d({3.0, 9.0}, SplitMode::fixed, 30, {3});
    EulerSchedule sch;
    sch.h0 = 0.01;
    sch.rescale = 9.0;
    EXPECT_DOUBLE_EQ(sch.step(2), 0.09);
    for (int r = 0; r < 20; ++r) {
        const Estimate e = euler_mls(cfg, sch, RngStream(17, static_cast<std::uint64_t>(r)));
        EXPECT_EQ(e.p_hat, fixed_estimate(30, {3}, e.N));
        EXPECT_LE(e.N[1], 3 * e.N[0]);
        EXPECT_GT(e.euler_steps, 0u);
    }
}
