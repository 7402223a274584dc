#pragma once

// Level sets of a reaction coordinate and exact barrier-crossing decisions
// on epsilon-strong skeletons.

#include "esplit/brownian.hpp"
#include "esplit/sampling.hpp"
#include "esplit/skeleton.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace esplit {

enum class CoordinateKind { identity_1d, coordinate_min, coordinate_abs_diff, custom };

/// Scalar xi with exact extrema over closed boxes.
class ReactionCoordinate {
public:
    using PointFn = std::function<double(const Point&)>;
    using BoxFn = std::function<double(const Box&)>;

    static ReactionCoordinate identity_1d();
    /// min over coordinates; monotone in each argument.
    static ReactionCoordinate coordinate_min(std::size_t dim = 2);
    /// |x_0 - x_1| in two dimensions.
    static ReactionCoordinate coordinate_abs_diff();
    static ReactionCoordinate custom(PointFn eval, BoxFn inf_over, BoxFn sup_over,
                                     std::size_t dim);

    CoordinateKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    std::string name() const;

    double eval(const Point& x) const { return eval_(x); }
    double inf_over(const Box& b) const { return inf_(b); }
    double sup_over(const Box& b) const { return sup_(b); }

    /// A value of xi that the path is known to attain inside the cell, beyond
    /// the exact endpoint values (upper = true gives a lower bound on the
    /// running max of xi; otherwise an upper bound on the running min).
    double attained_bound(const Cell& cell, bool upper) const;

private:
    ReactionCoordinate(CoordinateKind kind, std::size_t dim, PointFn eval, BoxFn inf, BoxFn sup)
        : kind_(kind), dim_(dim), eval_(std::move(eval)), inf_(std::move(inf)), sup_(std::move(sup)) {}

    CoordinateKind kind_;
    std::size_t dim_;
    PointFn eval_;
    BoxFn inf_;
    BoxFn sup_;
};

/// z_A < z_1 < ... < z_m = z_B.
class LevelSystem {
public:
    LevelSystem(double z_A, std::vector<double> levels);

    double z_A() const { return z_A_; }
    double z_B() const { return levels_.back(); }
    const std::vector<double>& levels() const { return levels_; }
    std::size_t m() const { return levels_.size(); }
    /// Level i in 1..m.
    double z(std::size_t i) const { return levels_.at(i - 1); }

    bool in_A(const ReactionCoordinate& xi, const Point& x) const { return xi.eval(x) <= z_A_; }
    bool in_B(const ReactionCoordinate& xi, const Point& x, std::size_t i) const {
        return xi.eval(x) >= z(i);
    }

private:
    double z_A_;
    std::vector<double> levels_;
};

/// The box meets both barrier sets; the caller must refine first.
class AssumptionViolated : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

int classify_single(const Box& box, const ReactionCoordinate& xi, double z_D);
int classify_two_sided(const Box& box, const ReactionCoordinate& xi, double z_A, double z_B);

enum class BlockKind { negative, zero, positive };

struct BlockDecomposition {
    /// kappa[0] = 0, kappa.back() = K + 1; block j (1-based) covers
    /// indices [kappa[j-1], kappa[j]).
    std::vector<std::size_t> kappa;
    std::vector<BlockKind> kinds;

    std::size_t count() const { return kinds.size(); }
    std::size_t begin(std::size_t j) const { return kappa[j - 1]; }
    std::size_t end(std::size_t j) const { return kappa[j]; }
};

BlockDecomposition block_decompose(const std::vector<int>& n);

enum class RefineStrategy { first, largest_overlap };

struct CrossingOptions {
    RefineStrategy strategy = RefineStrategy::first;
    /// Count the inner extrema envelopes as evidence of a crossing when the
    /// reaction coordinate allows it.
    bool use_witness = true;
    long max_refinements = 1'000'000;
    long max_extensions = 1'000'000;
    /// Length of each fresh segment; 0 repeats the length of the last one.
    double extension_length = 0.0;
};

struct SingleCrossing {
    bool crossed = false;
    Skeleton skeleton;
    /// Index of the cell that settled a crossing (size() when none).
    std::size_t decisive = 0;
};

/// Exact indicator that the path enters {xi >= z_D} within the span of sk.
SingleCrossing single_barrier_crossing(RngStream& rng, const BrownianSampler& sampler,
                                       const Skeleton& sk, const ReactionCoordinate& xi,
                                       double z_D, const CrossingOptions& opts = {},
                                       SamplerStats* stats = nullptr);

/// Same for {xi <= z_D}.
SingleCrossing single_barrier_crossing_below(RngStream& rng, const BrownianSampler& sampler,
                                             const Skeleton& sk, const ReactionCoordinate& xi,
                                             double z_D, const CrossingOptions& opts = {},
                                             SamplerStats* stats = nullptr);

struct CrossingVerdict {
    int D = 0;  // +1: B hit before A, -1: A first
    Skeleton full;
    /// Span end of the segment in which the decision was made.
    double sigma_tilde = 0.0;
    /// Cell of `full` that settled the decision.
    std::size_t decisive = 0;
};

/// Decides whether the path hits {xi >= z_B} before {xi <= z_A}, extending
/// the horizon with fresh segments at ladder level `extension_level`.
CrossingVerdict two_sided_crossing(RngStream& rng, const BrownianSampler& sampler,
                                   const Skeleton& sk, const ReactionCoordinate& xi, double z_A,
                                   double z_B, int extension_level,
                                   const CrossingOptions& opts = {},
                                   SamplerStats* stats = nullptr);

}  // namespace esplit
