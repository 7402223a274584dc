#include "esplit/brownian.hpp"
#include "stat_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace esplit;

namespace {

BrownianSampler make_sampler(double eps1 = 0.5, double rho = 1.0 / 3.0) {
    EsSamplerConfig cfg;
    cfg.ladder = ToleranceLadder(eps1, rho);
    return BrownianSampler(cfg);
}

bool nested(const Cell& parent, const Skeleton& children) {
    for (const auto& c : children.cells())
        for (std::size_t i = 0; i < c.dim(); ++i)
            if (c.coords[i].lower < parent.coords[i].lower || c.coords[i].upper > parent.coords[i].upper)
                return false;
    return true;
}

// Running extremum of coordinate 0 over the skeleton span, to within tol,
// by refining whichever cell could still hold a larger value.
double running_extremum(RngStream& rng, const BrownianSampler& s, Skeleton sk, bool upper,
                        double tol) {
    const double sign = upper ? 1.0 : -1.0;
    for (;;) {
        double attained = -kInf;
        for (const auto& c : sk.cells())
            attained = std::max(attained, sign * (upper ? c.coords[0].inner_upper : c.coords[0].inner_lower));
        std::size_t best = sk.size();
        double bound = attained + tol;
        for (std::size_t k = 0; k < sk.size(); ++k) {
            const double b = sign * (upper ? sk[k].coords[0].upper : sk[k].coords[0].lower);
            if (b > bound) {
                bound = b;
                best = k;
            }
        }
        if (best == sk.size()) return sign * attained;
        sk = s.refine_cell(rng, sk, best);
    }
}

}  // namespace

TEST(SampleSegment, ShortIntervalGivesOneCell) {
    const auto s = make_sampler(5.0);
    RngStream rng(1, 0);
    const Skeleton sk = s.sample_segment(rng, Point{0.3}, 0.0, 1e-4, 1);
    ASSERT_EQ(sk.size(), 1u);
    const Box b = sk[0].box();
    EXPECT_TRUE(b.contains(sk[0].x_start()));
    EXPECT_TRUE(b.contains(sk[0].x_end()));
    EXPECT_EQ(sk[0].x_start(), Point{0.3});
}

TEST(SampleSegment, CellInvariantsAndDiameterBound) {
    const auto s = make_sampler(0.25, 0.5);
    RngStream rng(2, 0);
    for (int trial = 0; trial < 300; ++trial) {
        const int level = 1 + static_cast<int>(rng.below(4));
        const Skeleton sk = s.sample_segment(rng, Point{0.0, 1.0}, 0.0, 1.0, level);
        ASSERT_TRUE(sk.well_formed());
        EXPECT_EQ(sk.span_start(), 0.0);
        EXPECT_EQ(sk.span_end(), 1.0);
        for (const auto& c : sk.cells()) {
            EXPECT_EQ(c.level, level);
            EXPECT_LE(c.diameter(), 2.0 * s.ladder().eps(level));
        }
    }
}

TEST(SampleSegment, TerminalLawIsStandardNormal) {
    const auto s = make_sampler();
    std::vector<double> xs;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        RngStream rng(3, i);
        xs.push_back(s.sample_segment(rng, Point{0.0}, 0.0, 1.0, 1).terminal()[0]);
    }
    EXPECT_GT(testutil::ks_pvalue(xs, [](double x) { return testutil::normal_cdf(x); }), 0.01);
}

TEST(SampleSegment, TwoDimensionalCoordinatesIndependent) {
    const auto s = make_sampler(0.25, 0.5);
    std::vector<double> a, b;
    double cross = 0.0;
    const int n = 5000;
    for (int i = 0; i < n; ++i) {
        RngStream rng(4, static_cast<std::uint64_t>(i));
        const Point x = s.sample_segment(rng, Point{0.5, 0.5}, 0.0, 1.0, 1).terminal();
        a.push_back(x[0]);
        b.push_back(x[1]);
        cross += (x[0] - 0.5) * (x[1] - 0.5);
    }
    const auto cdf = [](double x) { return testutil::normal_cdf(x, 0.5, 1.0); };
    EXPECT_GT(testutil::ks_pvalue(a, cdf), 0.01);
    EXPECT_GT(testutil::ks_pvalue(b, cdf), 0.01);
    EXPECT_LT(std::abs(cross / n), 4.0 / std::sqrt(n));
}

TEST(SampleSegment, DeterministicForSameStream) {
    const auto s = make_sampler();
    RngStream a(5, 9), b(5, 9);
    EXPECT_EQ(s.sample_segment(a, Point{1.0}, 0.0, 1.0, 2), s.sample_segment(b, Point{1.0}, 0.0, 1.0, 2));
}

TEST(Extend, DoublesSpanAndContinues) {
    const auto s = make_sampler();
    RngStream rng(6, 0);
    const Skeleton sk = s.sample_segment(rng, Point{0.0}, 0.0, 1.0, 1);
    const Skeleton ext = s.extend(rng, sk, 1);
    EXPECT_EQ(ext.span_start(), 0.0);
    EXPECT_EQ(ext.span_end(), 2.0);
    EXPECT_EQ(ext[sk.size()].x_start(), sk.terminal());
    EXPECT_TRUE(ext.well_formed());
    EXPECT_EQ(ext.sub(0, sk.size()), sk);
}

TEST(Extend, TerminalLawAndMarkovConsistency) {
    const auto s = make_sampler();
    std::vector<double> extended, direct;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        RngStream a(7, i), b(8, i);
        extended.push_back(s.extend(a, s.sample_segment(a, Point{0.0}, 0.0, 1.0, 1), 1).terminal()[0]);
        direct.push_back(s.sample_segment(b, Point{0.0}, 0.0, 2.0, 1).terminal()[0]);
    }
    EXPECT_GT(testutil::ks_pvalue(extended,
                                  [](double x) { return testutil::normal_cdf(x, 0.0, std::sqrt(2.0)); }),
              0.01);
    EXPECT_GT(testutil::ks_two_sample_pvalue(extended, direct), 0.01);
}

TEST(RefineCell, ChildrenNestedInParent) {
    const auto s = make_sampler(0.5, 0.5);
    RngStream rng(9, 0);
    int violations = 0;
    int refinements = 0;
    while (refinements < 1000) {
        const std::size_t dim = 1 + rng.below(2);
        Skeleton sk = s.sample_segment(rng, Point(dim, 0.0), 0.0, 1.0, 1);
        for (int depth = 0; depth < 5; ++depth, ++refinements) {
            const std::size_t k = rng.below(sk.size());
            const Cell parent = sk[k];
            const Skeleton child = s.refine(rng, parent);
            violations += !nested(parent, child);
            ASSERT_EQ(child.front().x_start(), parent.x_start());
            ASSERT_EQ(child.back().x_end(), parent.x_end());
            ASSERT_EQ(child.span_start(), parent.t_start);
            ASSERT_EQ(child.span_end(), parent.t_end);
            ASSERT_TRUE(child.well_formed());
            for (const auto& c : child.cells()) {
                ASSERT_EQ(c.level, parent.level + 1);
                ASSERT_LE(c.diameter(), 2.0 * s.ladder().eps(parent.level + 1));
            }
            // The children must realise the parent's attained extrema.
            for (std::size_t i = 0; i < dim; ++i) {
                double lo = kInf, hi = -kInf;
                for (const auto& c : child.cells()) {
                    lo = std::min(lo, c.coords[i].inner_lower);
                    hi = std::max(hi, c.coords[i].inner_upper);
                }
                ASSERT_LE(lo, parent.coords[i].inner_lower);
                ASSERT_GE(hi, parent.coords[i].inner_upper);
            }
            const Skeleton before = sk;
            sk = sk.splice(k, k + 1, child);
            ASSERT_EQ(sk.sub(0, k), before.sub(0, k));
        }
    }
    EXPECT_EQ(violations, 0);
}

TEST(RefineCell, IndexOutOfRange) {
    const auto s = make_sampler();
    RngStream rng(10, 0);
    const Skeleton sk = s.sample_segment(rng, Point{0.0}, 0.0, 1.0, 1);
    EXPECT_THROW(s.refine_cell(rng, sk, sk.size()), std::out_of_range);
}

TEST(CoSimulation, MidpointsTrackFinePath) {
    // Realise the path at random times by refining down to a tiny tolerance
    // and compare with the coarse skeleton's piecewise-constant value.
    const auto s = make_sampler(0.5, 0.5);
    RngStream rng(11, 0);
    int checked = 0;
    while (checked < 1000) {
        const Skeleton coarse = s.sample_segment(rng, Point{0.0, 0.0}, 0.0, 1.0, 2);
        for (int j = 0; j < 20; ++j, ++checked) {
            const double u = rng.uniform();
            const std::size_t k = cell_index_at(coarse, u);
            Skeleton fine({coarse[k]});
            for (int depth = 0; depth < 12; ++depth) {
                const std::size_t f = cell_index_at(fine, u);
                fine = s.refine_cell(rng, fine, f);
            }
            const Cell& leaf = fine[cell_index_at(fine, u)];
            const Point coarse_value = evaluate(coarse, u);
            const double eps_leaf = s.ladder().eps(leaf.level);
            for (std::size_t i = 0; i < 2; ++i) {
                // The true path at u lies in the leaf box.
                const double lo = leaf.coords[i].lower, hi = leaf.coords[i].upper;
                ASSERT_LE(hi - lo, 2.0 * eps_leaf);
                ASSERT_LE(std::abs(coarse_value[i] - 0.5 * (lo + hi)),
                          s.ladder().eps(2) + eps_leaf);
            }
        }
    }
}

TEST(CoSimulation, RunningMaxMatchesReflectionLaw) {
    const auto s = make_sampler();
    std::vector<double> mx;
    for (std::uint64_t i = 0; i < 5000; ++i) {
        RngStream rng(12, i);
        mx.push_back(running_extremum(rng, s, s.sample_segment(rng, Point{0.0}, 0.0, 1.0, 1), true, 1e-3));
    }
    // P(max_{[0,1]} W <= m) = 2 Phi(m) - 1.
    EXPECT_GT(testutil::ks_pvalue(mx, [](double m) { return std::erf(m / std::sqrt(2.0)); }), 0.01);
}

TEST(CoSimulation, RunningMinOfBridgeMatchesClosedForm) {
    // Bridge from 0 to 0.4 over [0,1]: P(min >= m) = 1 - exp(-2 m (m - 0.4)) for m <= 0.
    const auto s = make_sampler();
    std::vector<double> mn;
    RngStream rng(13, 0);
    while (mn.size() < 3000) {
        // A wide outer layer leaves the bridge law essentially unconditioned.
        Cell c;
        c.t_start = 0.0;
        c.t_end = 1.0;
        c.coords.push_back(layered::normalized(CoordTrack{0.0, 0.4, -50.0, kInf, -kInf, 50.0}));
        c.level = 0;
        mn.push_back(running_extremum(rng, s, Skeleton({c}), false, 1e-3));
    }
    EXPECT_GT(testutil::ks_pvalue(mn, [](double m) { return std::exp(-2.0 * m * (m - 0.4)); }), 0.01);
}
