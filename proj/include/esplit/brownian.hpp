#pragma once

// Epsilon-strong sampler for Brownian motion.
//
// Each coordinate of a cell is a Brownian bridge between exact endpoint
// values, conditioned on a layer
//   min in [lower, inner_lower],  max in [inner_upper, upper].
// Layers are tightened by exact Bernoulli draws and intervals are bisected
// (sampling the exact midpoint from the layer-conditioned bridge law) until
// every box has sup-norm width at most 2 eps. Refinement reruns the same
// procedure on one cell at the next tolerance, so children are nested in
// the parent box by construction.

#include "esplit/sampling.hpp"
#include "esplit/skeleton.hpp"

#include <cstdint>
#include <utility>

namespace esplit {

struct EsSamplerConfig {
    ToleranceLadder ladder{0.5, 0.5};
    double segment_length = 1.0;
    double layer_grid_ratio = 2.0;
    int refinement_cap = kDefaultRefinementCap;

    void validate() const;
};

struct SamplerStats {
    std::uint64_t cells_sampled = 0;
    std::uint64_t refinements = 0;
    std::uint64_t bisections = 0;
    std::uint64_t proposals = 0;
    BernoulliStats bernoulli;

    SamplerStats& operator+=(const SamplerStats& o);
};

namespace layered {

/// Exact probability bounds for the layer event of one coordinate given its
/// endpoints, over a duration h.
class LayerProbability {
public:
    LayerProbability(const CoordTrack& track, double h);

    Interval bounds() const;
    void refine();
    bool exact() const;

private:
    struct Term {
        double sign;
        BridgeStaySeries series;
    };
    boost::container::small_vector<Term, 4> terms_;
};

/// Normalises inner envelopes so that they are implied by the endpoints.
CoordTrack normalized(CoordTrack t);

/// Draws the event {max <= c} under the track's conditional law and
/// records the outcome in the track's envelopes.
bool sample_max_below(RngStream& rng, CoordTrack& track, double h, double c, int cap,
                      SamplerStats* stats);

/// Draws the event {min >= c} and records the outcome.
bool sample_min_above(RngStream& rng, CoordTrack& track, double h, double c, int cap,
                      SamplerStats* stats);

/// Samples the exact value at time u in (a, b) and the layers of the two
/// halves, jointly from the conditional law of the track.
std::pair<CoordTrack, CoordTrack> split_track(RngStream& rng, const CoordTrack& track, double a,
                                              double u, double b, int cap, SamplerStats* stats);

/// Tightens the layer towards a box of width 2 eps. Returns false when the
/// interval must be bisected first.
bool tighten(RngStream& rng, CoordTrack& track, double h, double eps, double grid_ratio, int cap,
             SamplerStats* stats);

}  // namespace layered

class BrownianSampler {
public:
    explicit BrownianSampler(EsSamplerConfig config);

    const EsSamplerConfig& config() const { return config_; }
    const ToleranceLadder& ladder() const { return config_.ladder; }

    /// Fresh skeleton over [s, t] started at x_start, at ladder level `level`.
    Skeleton sample_segment(RngStream& rng, const Point& x_start, double s, double t, int level,
                            SamplerStats* stats = nullptr) const;

    /// Replaces cell k by its conditional refinement at level + 1.
    Skeleton refine_cell(RngStream& rng, const Skeleton& sk, std::size_t k,
                         SamplerStats* stats = nullptr) const;

    /// Conditional refinement of a single cell at level + 1.
    Skeleton refine(RngStream& rng, const Cell& cell, SamplerStats* stats = nullptr) const;

    /// Appends an independent segment of the same length as sk's span.
    Skeleton extend(RngStream& rng, const Skeleton& sk, int level,
                    SamplerStats* stats = nullptr) const;

    /// Splits a cell at time u, sampling the exact value there; both halves
    /// keep the cell's level.
    std::pair<Cell, Cell> split_cell(RngStream& rng, const Cell& cell, double u,
                                     SamplerStats* stats = nullptr) const;

private:
    Skeleton resolve(RngStream& rng, const Cell& root, double eps, int level,
                     SamplerStats* stats) const;

    EsSamplerConfig config_;
};

}  // namespace esplit
