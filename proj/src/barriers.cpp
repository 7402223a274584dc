#include "esplit/barriers.hpp"

#include <algorithm>
#include <cmath>

namespace esplit {

ReactionCoordinate ReactionCoordinate::identity_1d() {
    return ReactionCoordinate(
        CoordinateKind::identity_1d, 1, [](const Point& x) { return x[0]; },
        [](const Box& b) { return b.lower[0]; }, [](const Box& b) { return b.upper[0]; });
}

ReactionCoordinate ReactionCoordinate::coordinate_min(std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("coordinate_min: zero dimension");
    return ReactionCoordinate(
        CoordinateKind::coordinate_min, dim,
        [](const Point& x) { return *std::min_element(x.begin(), x.end()); },
        [](const Box& b) { return *std::min_element(b.lower.begin(), b.lower.end()); },
        [](const Box& b) { return *std::min_element(b.upper.begin(), b.upper.end()); });
}

ReactionCoordinate ReactionCoordinate::coordinate_abs_diff() {
    return ReactionCoordinate(
        CoordinateKind::coordinate_abs_diff, 2,
        [](const Point& x) { return std::abs(x[0] - x[1]); },
        [](const Box& b) {
            // Zero when the two coordinate ranges overlap, else the gap.
            return std::max({0.0, b.lower[0] - b.upper[1], b.lower[1] - b.upper[0]});
        },
        [](const Box& b) {
            return std::max(std::abs(b.upper[0] - b.lower[1]), std::abs(b.lower[0] - b.upper[1]));
        });
}

ReactionCoordinate ReactionCoordinate::custom(PointFn eval, BoxFn inf_over, BoxFn sup_over,
                                              std::size_t dim) {
    if (!eval || !inf_over || !sup_over)
        throw std::invalid_argument("custom reaction coordinate needs eval, inf and sup");
    return ReactionCoordinate(CoordinateKind::custom, dim, std::move(eval), std::move(inf_over),
                              std::move(sup_over));
}

std::string ReactionCoordinate::name() const {
    switch (kind_) {
        case CoordinateKind::identity_1d: return "identity_1d";
        case CoordinateKind::coordinate_min: return "coordinate_min";
        case CoordinateKind::coordinate_abs_diff: return "coordinate_abs_diff";
        case CoordinateKind::custom: return "custom";
    }
    return "custom";
}

double ReactionCoordinate::attained_bound(const Cell& cell, bool upper) const {
    const double a = eval(cell.x_start());
    const double b = eval(cell.x_end());
    double v = upper ? std::max(a, b) : std::min(a, b);
    if (kind_ == CoordinateKind::identity_1d) {
        v = upper ? std::max(v, cell.coords[0].inner_upper) : std::min(v, cell.coords[0].inner_lower);
    } else if (kind_ == CoordinateKind::coordinate_min && !upper) {
        // The running min of min(x_i) is the smallest coordinate running min.
        for (const auto& t : cell.coords) v = std::min(v, t.inner_lower);
    } else if (kind_ == CoordinateKind::coordinate_min) {
        // When x_k reaches its max, every other coordinate is still above its lower bound.
        for (std::size_t k = 0; k < cell.coords.size(); ++k) {
            double m = cell.coords[k].inner_upper;
            for (std::size_t j = 0; j < cell.coords.size(); ++j)
                if (j != k) m = std::min(m, cell.coords[j].lower);
            v = std::max(v, m);
        }
    } else if (kind_ == CoordinateKind::coordinate_abs_diff && upper) {
        const auto& p = cell.coords[0];
        const auto& q = cell.coords[1];
        v = std::max({v, p.inner_upper - q.upper, q.inner_upper - p.upper, p.lower - q.inner_lower,
                      q.lower - p.inner_lower});
    }
    return v;
}

LevelSystem::LevelSystem(double z_A, std::vector<double> levels)
    : z_A_(z_A), levels_(std::move(levels)) {
    if (levels_.empty()) throw std::invalid_argument("LevelSystem: no levels");
    if (!(z_A_ < levels_.front())) throw std::invalid_argument("LevelSystem: need z_A < z_1");
    for (std::size_t i = 1; i < levels_.size(); ++i)
        if (!(levels_[i - 1] < levels_[i]))
            throw std::invalid_argument("LevelSystem: levels must be strictly increasing");
}

int classify_single(const Box& box, const ReactionCoordinate& xi, double z_D) {
    if (xi.sup_over(box) < z_D) return -1;
    if (xi.inf_over(box) >= z_D) return 1;
    return 0;
}

int classify_two_sided(const Box& box, const ReactionCoordinate& xi, double z_A, double z_B) {
    const double lo = xi.inf_over(box);
    const double hi = xi.sup_over(box);
    if (lo <= z_A && hi >= z_B)
        throw AssumptionViolated("classify_two_sided: box meets both barrier sets");
    if (hi <= z_A) return -2;
    if (lo <= z_A) return -1;
    if (lo >= z_B) return 2;
    if (hi >= z_B) return 1;
    return 0;
}

BlockDecomposition block_decompose(const std::vector<int>& n) {
    BlockDecomposition d;
    const std::size_t end = n.size();
    d.kappa.push_back(0);
    while (d.kappa.back() < end) {
        const std::size_t start = d.kappa.back();
        const bool zero = n[start] == 0;
        std::size_t k = start + 1;
        while (k < end && (n[k] == 0) == zero) ++k;
        d.kappa.push_back(k);
        d.kinds.push_back(zero ? BlockKind::zero
                               : (n[start] < 0 ? BlockKind::negative : BlockKind::positive));
    }
    return d;
}

namespace {

// Single-barrier view on one side: values are sign * xi, and the target set
// is {sign * xi >= level}.
struct Side {
    const ReactionCoordinate& xi;
    double sign;
    double level;
    bool witness;

    double sup(const Box& b) const { return sign > 0 ? xi.sup_over(b) : -xi.inf_over(b); }
    double inf(const Box& b) const { return sign > 0 ? xi.inf_over(b) : -xi.sup_over(b); }

    int classify(const Cell& c) const {
        const Box b = c.box();
        if (sup(b) < level) return -1;
        if (inf(b) >= level) return 1;
        if (witness && sign * xi.attained_bound(c, sign > 0) >= level) return 1;
        return 0;
    }
    double overlap(const Cell& c) const { return sup(c.box()) - level; }
};

SingleCrossing run_single(RngStream& rng, const BrownianSampler& sampler, Skeleton sk,
                          const Side& side, const CrossingOptions& opts, long& refinements,
                          SamplerStats* stats) {
    SingleCrossing out;
    std::size_t from = 0;
    for (;;) {
        std::size_t target = sk.size();
        double best = -kInf;
        for (std::size_t k = from; k < sk.size(); ++k) {
            const int n = side.classify(sk[k]);
            if (n == 1) {
                out.crossed = true;
                out.decisive = k;
                out.skeleton = std::move(sk);
                return out;
            }
            if (n == 0) {
                if (opts.strategy == RefineStrategy::first) {
                    if (target == sk.size()) target = k;
                } else {
                    const double o = side.overlap(sk[k]);
                    if (o > best) {
                        best = o;
                        target = k;
                    }
                }
            }
        }
        if (target == sk.size()) {
            out.crossed = false;
            out.decisive = sk.size();
            out.skeleton = std::move(sk);
            return out;
        }
        if (++refinements > opts.max_refinements)
            throw NonConvergenceError("barrier crossing exceeded its refinement cap", {0.0, 1.0},
                                      static_cast<int>(std::min<long>(refinements, 1 << 30)));
        sk = sampler.refine_cell(rng, sk, target, stats);
        // With the first-ambiguous rule, everything before the refined cell
        // is already known to lie outside the target set.
        from = opts.strategy == RefineStrategy::first ? target : 0;
    }
}

}  // namespace

SingleCrossing single_barrier_crossing(RngStream& rng, const BrownianSampler& sampler,
                                       const Skeleton& sk, const ReactionCoordinate& xi,
                                       double z_D, const CrossingOptions& opts,
                                       SamplerStats* stats) {
    long refinements = 0;
    return run_single(rng, sampler, sk, Side{xi, 1.0, z_D, opts.use_witness}, opts, refinements,
                      stats);
}

SingleCrossing single_barrier_crossing_below(RngStream& rng, const BrownianSampler& sampler,
                                             const Skeleton& sk, const ReactionCoordinate& xi,
                                             double z_D, const CrossingOptions& opts,
                                             SamplerStats* stats) {
    long refinements = 0;
    return run_single(rng, sampler, sk, Side{xi, -1.0, -z_D, opts.use_witness}, opts,
                      refinements, stats);
}

namespace {

bool meets_A(const Box& b, const ReactionCoordinate& xi, double z_A) {
    return xi.inf_over(b) <= z_A;
}
bool meets_B(const Box& b, const ReactionCoordinate& xi, double z_B) {
    return xi.sup_over(b) >= z_B;
}

// Refines until no box meets both sets and no neighbouring pair meets one
// set each.
Skeleton enforce_separation(RngStream& rng, const BrownianSampler& sampler, Skeleton sk,
                            const ReactionCoordinate& xi, double z_A, double z_B,
                            const CrossingOptions& opts, long& refinements, SamplerStats* stats) {
    std::size_t k = 0;
    while (k < sk.size()) {
        const Box b = sk[k].box();
        const bool a = meets_A(b, xi, z_A);
        const bool bb = meets_B(b, xi, z_B);
        std::size_t target = sk.size();
        if (a && bb) {
            target = k;
        } else if ((a || bb) && k + 1 < sk.size()) {
            const Box n = sk[k + 1].box();
            if ((a && meets_B(n, xi, z_B)) || (bb && meets_A(n, xi, z_A)))
                target = sk[k].diameter() >= sk[k + 1].diameter() ? k : k + 1;
        }
        if (target == sk.size()) {
            ++k;
            continue;
        }
        if (++refinements > opts.max_refinements)
            throw NonConvergenceError("barrier separation exceeded its refinement cap", {0.0, 1.0},
                                      static_cast<int>(std::min<long>(refinements, 1 << 30)));
        sk = sampler.refine_cell(rng, sk, target, stats);
        k = k > 0 ? k - 1 : 0;
    }
    return sk;
}

}  // namespace

CrossingVerdict two_sided_crossing(RngStream& rng, const BrownianSampler& sampler,
                                   const Skeleton& sk, const ReactionCoordinate& xi, double z_A,
                                   double z_B, int extension_level, const CrossingOptions& opts,
                                   SamplerStats* stats) {
    if (sk.empty()) throw std::invalid_argument("two_sided_crossing: empty skeleton");
    if (!(z_A < z_B)) throw std::invalid_argument("two_sided_crossing: need z_A < z_B");
    const double xi0 = xi.eval(sk.front().x_start());
    if (!(z_A <= xi0 && xi0 < z_B))
        throw std::invalid_argument("two_sided_crossing: start outside [z_A, z_B)");

    CrossingVerdict verdict;
    long refinements = 0;
    long extensions = 0;
    Skeleton current = sk;
    double s = sk.span_start();
    double t = sk.span_end();
    const Side side_A{xi, -1.0, -z_A, opts.use_witness};
    const Side side_B{xi, 1.0, z_B, opts.use_witness};

    for (;;) {
        current = enforce_separation(rng, sampler, std::move(current), xi, z_A, z_B, opts,
                                     refinements, stats);
        std::vector<int> n(current.size());
        for (std::size_t k = 0; k < current.size(); ++k)
            n[k] = classify_two_sided(current[k].box(), xi, z_A, z_B);
        const BlockDecomposition blocks = block_decompose(n);

        // Splicing refined blocks back shifts later indices by `offset`.
        std::ptrdiff_t offset = 0;
        int D = 0;
        std::size_t decisive = 0;
        for (std::size_t j = 1; j <= blocks.count() && D == 0; ++j) {
            if (blocks.kinds[j - 1] == BlockKind::zero) continue;
            const std::size_t b0 = blocks.begin(j);
            const std::size_t b1 = blocks.end(j);
            const bool negative = blocks.kinds[j - 1] == BlockKind::negative;
            const int certain = negative ? -2 : 2;
            auto hit = std::find(n.begin() + static_cast<std::ptrdiff_t>(b0),
                                 n.begin() + static_cast<std::ptrdiff_t>(b1), certain);
            if (hit != n.begin() + static_cast<std::ptrdiff_t>(b1)) {
                // An earlier cell of the same block may already witness the
                // crossing; the decisive cell only matters for splitting.
                D = negative ? -1 : 1;
                decisive = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(hit - n.begin()) +
                                                    offset);
                const Side& sd = negative ? side_A : side_B;
                for (std::size_t k = b0; k < static_cast<std::size_t>(hit - n.begin()); ++k) {
                    const auto kk = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(k) + offset);
                    if (sd.classify(current[kk]) == 1) {
                        decisive = kk;
                        break;
                    }
                }
                break;
            }
            const auto first = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(b0) + offset);
            const auto last = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(b1) + offset);
            SingleCrossing r = run_single(rng, sampler, current.sub(first, last),
                                          negative ? side_A : side_B, opts, refinements, stats);
            const std::size_t new_size = r.skeleton.size();
            current = current.splice(first, last, r.skeleton);
            if (r.crossed) {
                D = negative ? -1 : 1;
                decisive = first + r.decisive;
            }
            offset += static_cast<std::ptrdiff_t>(new_size) - static_cast<std::ptrdiff_t>(b1 - b0);
        }

        if (D != 0) {
            const std::size_t before = verdict.full.size();
            verdict.full = concat(verdict.full, current);
            verdict.D = D;
            verdict.sigma_tilde = t;
            verdict.decisive = before + decisive;
            return verdict;
        }

        verdict.full = concat(verdict.full, current);
        if (++extensions > opts.max_extensions)
            throw NonConvergenceError("barrier crossing exceeded its horizon budget", {0.0, 1.0},
                                      static_cast<int>(std::min<long>(extensions, 1 << 30)));
        const double next_t = opts.extension_length > 0.0 ? t + opts.extension_length : 2.0 * t - s;
        s = t;
        t = next_t;
        current = sampler.sample_segment(rng, verdict.full.terminal(), s, t, extension_level,
                                         stats);
    }
}

}  // namespace esplit
