#pragma once

// Random primitives used by the epsilon-strong sampler: reproducible
// per-particle streams, Gaussian and Brownian-bridge draws, and exact
// Bernoulli sampling from probabilities that are only known through
// converging bound sequences.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace esplit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval of reals used for probability bounds.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double v) const { return lo <= v && v <= hi; }
};

inline Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Interval operator-(Interval a, Interval b) { return {a.lo - b.hi, a.hi - b.lo}; }

/// Product of two intervals that both lie in [0, 1].
inline Interval unit_product(Interval a, Interval b) { return {a.lo * b.lo, a.hi * b.hi}; }

Interval clamp_unit(Interval v);

/// Thrown when a retrospective draw cannot be resolved within its budget.
class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, Interval last_bounds, int refinements)
        : std::runtime_error(what), last_bounds_(last_bounds), refinements_(refinements) {}

    Interval last_bounds() const { return last_bounds_; }
    int refinements() const { return refinements_; }

private:
    Interval last_bounds_;
    int refinements_;
};

/// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t z);

/// xoshiro256++ generator keyed by (seed, stream_id).
///
/// Streams are cheap to create: the state is obtained by hashing the key,
/// so independent particles can each own a stream identified by an integer
/// derived from their genealogy (see child()).
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    /// Stream keyed by this stream's key and an ordered list of indices.
    RngStream child(std::initializer_list<std::uint64_t> path) const;

    std::uint64_t next_u64();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Standard normal via Box-Muller; the spare variate is cached.
    double standard_normal();

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Normal(mean, sd^2). sd = 0 returns mean without consuming randomness.
double gaussian(RngStream& rng, double mean, double sd);

/// Brownian-bridge marginal at time u given X(s) = x_s and X(t) = x_t.
double bridge_point(RngStream& rng, double x_s, double x_t, double s, double u, double t);

/// Probability known through bounds that tighten with a refinement index n >= 0.
///
/// Implementations must satisfy lower_at(n) <= p <= upper_at(n), lower
/// non-decreasing and upper non-increasing in n, with the gap tending to 0.
class ProbabilityBounds {
public:
    using Fn = std::function<Interval(int)>;

    explicit ProbabilityBounds(Fn fn) : fn_(std::move(fn)) {}
    static ProbabilityBounds constant(double p);

    Interval at(int n) const { return fn_(n); }
    double lower_at(int n) const { return fn_(n).lo; }
    double upper_at(int n) const { return fn_(n).hi; }

private:
    Fn fn_;
};

inline constexpr int kDefaultRefinementCap = 10000;

/// Bookkeeping for retrospective draws.
struct BernoulliStats {
    std::uint64_t draws = 0;
    std::uint64_t refinements = 0;
};

/// Exact Bernoulli(p) where p is only accessible through converging bounds.
///
/// Draws a single uniform U and refines until U < lower (returns true) or
/// U >= upper (returns false). `bounds_at(n)` is called with n = 0, 1, ...
template <class BoundsFn>
    requires std::is_invocable_r_v<Interval, BoundsFn&, int>
bool retrospective_bernoulli(RngStream& rng, BoundsFn&& bounds_at,
                             int cap = kDefaultRefinementCap,
                             BernoulliStats* stats = nullptr) {
    const double u = rng.uniform();
    Interval b{0.0, 1.0};
    for (int n = 0; n <= cap; ++n) {
        b = bounds_at(n);
        if (u < b.lo || u >= b.hi) {
            if (stats) {
                ++stats->draws;
                stats->refinements += static_cast<std::uint64_t>(n);
            }
            return u < b.lo;
        }
    }
    throw NonConvergenceError("retrospective Bernoulli did not resolve within refinement cap", b,
                              cap);
}

bool retrospective_bernoulli(RngStream& rng, const ProbabilityBounds& p,
                             int cap = kDefaultRefinementCap, BernoulliStats* stats = nullptr);

/// P(l < X(r) < u for all r in [0, h] | X(0) = x, X(h) = y) for a Brownian
/// bridge, evaluated from the method-of-images series with a rigorous tail
/// bound. l may be -inf and u may be +inf; the one-sided cases use the
/// closed form and are exact from the start.
class BridgeStaySeries {
public:
    BridgeStaySeries(double x, double y, double h, double l, double u);

    Interval bounds() const { return bounds_; }
    bool exact() const { return bounds_.lo == bounds_.hi; }
    /// Adds the next pair of image terms and tightens bounds.
    void refine();
    int terms() const { return j_; }

private:
    void update_bounds();

    double x_, y_, h_, l_, u_, w_;
    double partial_ = 1.0;
    int j_ = 0;
    Interval bounds_{0.0, 1.0};
};

/// Bounds on P(sup_{[s,t]} X >= c | X(s) = x_s, X(t) = x_t).
ProbabilityBounds bridge_exceedance_bounds(double x_s, double x_t, double s, double t, double c);

/// Bounds on P(l < X < u on [s,t] | endpoints), refinement index n = number of
/// extra series terms.
ProbabilityBounds bridge_stay_bounds(double x_s, double x_t, double s, double t, double l, double u);

}  // namespace esplit
