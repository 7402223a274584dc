#include "esplit/brownian.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace esplit {

void EsSamplerConfig::validate() const {
    if (!(segment_length > 0.0))
        throw std::invalid_argument("EsSamplerConfig: segment length must be positive");
    if (!(layer_grid_ratio > 1.0))
        throw std::invalid_argument("EsSamplerConfig: layer grid ratio must exceed 1");
    if (refinement_cap < 1) throw std::invalid_argument("EsSamplerConfig: refinement cap < 1");
}

SamplerStats& SamplerStats::operator+=(const SamplerStats& o) {
    cells_sampled += o.cells_sampled;
    refinements += o.refinements;
    bisections += o.bisections;
    proposals += o.proposals;
    bernoulli.draws += o.bernoulli.draws;
    bernoulli.refinements += o.bernoulli.refinements;
    return *this;
}

namespace layered {

namespace {

constexpr long kMaxProposals = 10'000'000;

Interval ratio_bounds(Interval num, Interval den) {
    const double lo = den.hi > 0.0 ? num.lo / den.hi : 0.0;
    const double hi = den.lo > 0.0 ? num.hi / den.lo : 1.0;
    return clamp_unit({lo, hi});
}

void note_draw(SamplerStats* stats, int n) {
    if (!stats) return;
    ++stats->bernoulli.draws;
    stats->bernoulli.refinements += static_cast<std::uint64_t>(n);
}

}  // namespace

CoordTrack normalized(CoordTrack t) {
    t.inner_lower = std::min(t.inner_lower, std::min(t.x_start, t.x_end));
    t.inner_upper = std::max(t.inner_upper, std::max(t.x_start, t.x_end));
    return t;
}

LayerProbability::LayerProbability(const CoordTrack& track, double h) {
    const double lo_end = std::min(track.x_start, track.x_end);
    const double hi_end = std::max(track.x_start, track.x_end);
    const bool lower_active = track.inner_lower < lo_end;
    const bool upper_active = track.inner_upper > hi_end;
    const double x = track.x_start;
    const double y = track.x_end;
    // Inclusion-exclusion over {min >= l, max <= u} events.
    terms_.push_back({1.0, BridgeStaySeries(x, y, h, track.lower, track.upper)});
    if (lower_active)
        terms_.push_back({-1.0, BridgeStaySeries(x, y, h, track.inner_lower, track.upper)});
    if (upper_active)
        terms_.push_back({-1.0, BridgeStaySeries(x, y, h, track.lower, track.inner_upper)});
    if (lower_active && upper_active)
        terms_.push_back({1.0, BridgeStaySeries(x, y, h, track.inner_lower, track.inner_upper)});
}

Interval LayerProbability::bounds() const {
    Interval total{0.0, 0.0};
    for (const auto& t : terms_) {
        const Interval b = t.series.bounds();
        if (t.sign > 0.0)
            total = total + b;
        else
            total = total - b;
    }
    return clamp_unit(total);
}

void LayerProbability::refine() {
    for (auto& t : terms_) t.series.refine();
}

bool LayerProbability::exact() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const Term& t) { return t.series.exact(); });
}

namespace {

bool sample_side(RngStream& rng, CoordTrack& track, double h, double c, bool upper_side, int cap,
                 SamplerStats* stats) {
    CoordTrack candidate = track;
    if (upper_side)
        candidate.upper = c;
    else
        candidate.lower = c;
    LayerProbability num(candidate, h);
    LayerProbability den(track, h);
    const double v = rng.uniform();
    Interval b{0.0, 1.0};
    for (int n = 0; n <= cap; ++n) {
        if (n > 0) {
            num.refine();
            den.refine();
        }
        b = ratio_bounds(num.bounds(), den.bounds());
        if (v < b.lo || v >= b.hi) {
            note_draw(stats, n);
            const bool yes = v < b.lo;
            if (upper_side) {
                if (yes)
                    track.upper = c;
                else
                    track.inner_upper = c;
            } else {
                if (yes)
                    track.lower = c;
                else
                    track.inner_lower = c;
            }
            return yes;
        }
    }
    throw NonConvergenceError("layer Bernoulli did not resolve within refinement cap", b, cap);
}

}  // namespace

bool sample_max_below(RngStream& rng, CoordTrack& track, double h, double c, int cap,
                      SamplerStats* stats) {
    track = normalized(track);
    if (c >= track.upper) return true;
    if (c <= track.inner_upper) return false;
    return sample_side(rng, track, h, c, true, cap, stats);
}

bool sample_min_above(RngStream& rng, CoordTrack& track, double h, double c, int cap,
                      SamplerStats* stats) {
    track = normalized(track);
    if (c <= track.lower) return true;
    if (c >= track.inner_lower) return false;
    return sample_side(rng, track, h, c, false, cap, stats);
}

std::pair<CoordTrack, CoordTrack> split_track(RngStream& rng, const CoordTrack& in, double a,
                                              double u, double b, int cap, SamplerStats* stats) {
    if (!(a < u && u < b)) throw std::invalid_argument("split_track: u must lie in (a, b)");
    const CoordTrack track = normalized(in);
    const double hl = u - a;
    const double hr = b - u;
    const double mean = track.x_start + hl / (b - a) * (track.x_end - track.x_start);
    const double sd = std::sqrt(hl * hr / (b - a));
    const double lo_end = std::min(track.x_start, track.x_end);
    const double hi_end = std::max(track.x_start, track.x_end);
    const bool lower_active = track.inner_lower < lo_end;
    const bool upper_active = track.inner_upper > hi_end;

    struct SideOption {
        double left_outer, left_inner, right_outer, right_inner;
    };
    // "Unconstrained" inner envelopes are filled in from the endpoints by normalized().
    boost::container::small_vector<SideOption, 2> upper_opts;
    boost::container::small_vector<SideOption, 2> lower_opts;
    if (upper_active) {
        upper_opts.push_back({track.upper, track.inner_upper, track.upper, -kInf});
        upper_opts.push_back({track.inner_upper, -kInf, track.upper, track.inner_upper});
    } else {
        upper_opts.push_back({track.upper, -kInf, track.upper, -kInf});
    }
    if (lower_active) {
        lower_opts.push_back({track.lower, track.inner_lower, track.lower, kInf});
        lower_opts.push_back({track.inner_lower, kInf, track.lower, track.inner_lower});
    } else {
        lower_opts.push_back({track.lower, kInf, track.lower, kInf});
    }

    struct Category {
        CoordTrack left, right;
        LayerProbability pl, pr;
    };

    // The layer forces the path past U_down (or below L_up). When that is
    // unlikely for the plain bridge, propose z from phi(z) K(z) instead, where
    // K(z) = e_l(z) + e_r(z) bounds the excursion probability of either half
    // and each term is exp(linear in z). Acceptance is then P(layer | z) / K(z).
    struct Tilt {
        double a, b;
    };
    const double var = sd * sd;
    auto log_mass = [&](const Tilt& t) { return t.a + t.b * mean + 0.5 * t.b * t.b * var; };
    std::array<Tilt, 2> tilt{};
    double best = 0.0;
    bool tilted = false;
    auto consider = [&](const std::array<Tilt, 2>& t) {
        const double m0 = log_mass(t[0]);
        const double m1 = log_mass(t[1]);
        const double hi = std::max(m0, m1);
        const double total = hi + std::log1p(std::exp(std::min(m0, m1) - hi));
        if (total < best) {
            best = total;
            tilt = t;
            tilted = true;
        }
    };
    if (upper_active) {
        const double U = track.inner_upper;
        const double bl = 2.0 * (U - track.x_start) / hl;
        const double br = 2.0 * (U - track.x_end) / hr;
        consider({Tilt{-bl * U, bl}, Tilt{-br * U, br}});
    }
    if (lower_active) {
        const double L = track.inner_lower;
        const double bl = -2.0 * (track.x_start - L) / hl;
        const double br = -2.0 * (track.x_end - L) / hr;
        consider({Tilt{-bl * L, bl}, Tilt{-br * L, br}});
    }
    const double first_share =
        tilted ? 1.0 / (1.0 + std::exp(log_mass(tilt[1]) - log_mass(tilt[0]))) : 1.0;

    for (long attempt = 0; attempt < kMaxProposals; ++attempt) {
        if (stats) ++stats->proposals;
        double z;
        double envelope = 1.0;
        if (tilted) {
            const Tilt& t = rng.uniform() < first_share ? tilt[0] : tilt[1];
            z = gaussian(rng, mean + t.b * var, sd);
            envelope = std::exp(tilt[0].a + tilt[0].b * z) + std::exp(tilt[1].a + tilt[1].b * z);
        } else {
            z = gaussian(rng, mean, sd);
        }
        if (!(z > track.lower && z < track.upper)) continue;

        boost::container::small_vector<Category, 4> cats;
        for (const auto& up : upper_opts) {
            for (const auto& lo : lower_opts) {
                CoordTrack l{track.x_start, z, lo.left_outer, lo.left_inner, up.left_inner,
                             up.left_outer};
                CoordTrack r{z, track.x_end, lo.right_outer, lo.right_inner, up.right_inner,
                             up.right_outer};
                l = normalized(l);
                r = normalized(r);
                cats.push_back({l, r, LayerProbability(l, hl), LayerProbability(r, hr)});
            }
        }

        const double v = rng.uniform() * envelope;
        if (!(v < 1.0)) continue;
        Interval last{0.0, 1.0};
        for (int n = 0; n <= cap; ++n) {
            if (n > 0)
                for (auto& c : cats) {
                    c.pl.refine();
                    c.pr.refine();
                }
            Interval prev{0.0, 0.0};
            int chosen = -2;  // -2 unresolved, -1 reject
            bool blocked = false;
            for (std::size_t c = 0; c < cats.size(); ++c) {
                const Interval next = prev + unit_product(cats[c].pl.bounds(), cats[c].pr.bounds());
                if (v < prev.hi) {
                    blocked = true;
                    break;
                }
                if (v < next.lo) {
                    chosen = static_cast<int>(c);
                    break;
                }
                prev = next;
            }
            last = prev;
            if (!blocked && chosen == -2 && v >= prev.hi) chosen = -1;
            if (chosen != -2) {
                note_draw(stats, n);
                if (chosen >= 0)
                    return {cats[static_cast<std::size_t>(chosen)].left,
                            cats[static_cast<std::size_t>(chosen)].right};
                break;
            }
            if (n == cap)
                throw NonConvergenceError("bridge split did not resolve within refinement cap",
                                          last, cap);
        }
    }
    throw NonConvergenceError("bridge split exceeded proposal budget", {0.0, 1.0}, 0);
}

bool tighten(RngStream& rng, CoordTrack& track, double h, double eps, double grid_ratio, int cap,
             SamplerStats* stats) {
    track = normalized(track);
    if (track.upper - track.lower <= 2.0 * eps) return true;
    // Aim slightly inside 2 eps so that candidates stay distinct from the
    // current bounds after rounding.
    const double target = 2.0 * eps * (1.0 - 1e-6);
    const double base_lo = track.inner_lower;
    const double base_hi = track.inner_upper;
    if (base_hi - base_lo >= target) return false;

    const double slack = target - (base_hi - base_lo);
    double c_hi = base_hi + 0.5 * slack;
    double c_lo = base_lo - 0.5 * slack;
    if (c_hi > track.upper) {
        c_lo -= c_hi - track.upper;
        c_hi = track.upper;
    }
    if (c_lo < track.lower) {
        c_hi = std::min(track.upper, c_hi + (track.lower - c_lo));
        c_lo = track.lower;
    }

    if (c_hi < track.upper) {
        const bool open = std::isinf(track.upper);
        if (!sample_max_below(rng, track, h, c_hi, cap, stats)) {
            // Bound the excursion on a geometric grid so the interval keeps a
            // finite envelope while it is bisected.
            double gap = c_hi - base_hi;
            while (open && std::isinf(track.upper)) {
                gap *= grid_ratio;
                sample_max_below(rng, track, h, base_hi + gap, cap, stats);
            }
            return false;
        }
    }
    if (c_lo > track.lower) {
        const bool open = std::isinf(track.lower);
        if (!sample_min_above(rng, track, h, c_lo, cap, stats)) {
            double gap = base_lo - c_lo;
            while (open && std::isinf(track.lower)) {
                gap *= grid_ratio;
                sample_min_above(rng, track, h, base_lo - gap, cap, stats);
            }
            return false;
        }
    }
    return track.upper - track.lower <= 2.0 * eps;
}

}  // namespace layered

BrownianSampler::BrownianSampler(EsSamplerConfig config) : config_(std::move(config)) {
    config_.validate();
}

std::pair<Cell, Cell> BrownianSampler::split_cell(RngStream& rng, const Cell& cell, double u,
                                                  SamplerStats* stats) const {
    if (!(cell.t_start < u && u < cell.t_end))
        throw std::invalid_argument("split_cell: time outside the cell interior");
    Cell left{cell.t_start, u, cell.level, {}};
    Cell right{u, cell.t_end, cell.level, {}};
    for (const auto& t : cell.coords) {
        auto [l, r] = layered::split_track(rng, t, cell.t_start, u, cell.t_end,
                                           config_.refinement_cap, stats);
        left.coords.push_back(l);
        right.coords.push_back(r);
    }
    return {std::move(left), std::move(right)};
}

Skeleton BrownianSampler::resolve(RngStream& rng, const Cell& root, double eps, int level,
                                  SamplerStats* stats) const {
    constexpr std::size_t kMaxItems = 50'000'000;
    std::vector<Cell> out;
    std::vector<Cell> stack{root};
    std::size_t processed = 0;
    while (!stack.empty()) {
        Cell item = std::move(stack.back());
        stack.pop_back();
        if (++processed > kMaxItems)
            throw NonConvergenceError("epsilon-strong construction exceeded its work budget",
                                      {0.0, 1.0}, 0);
        const double h = item.t_end - item.t_start;
        bool done = true;
        for (auto& t : item.coords) {
            if (!layered::tighten(rng, t, h, eps, config_.layer_grid_ratio, config_.refinement_cap,
                                  stats)) {
                done = false;
                break;
            }
        }
        if (done) {
            item.level = level;
            out.push_back(std::move(item));
            continue;
        }
        const double mid = item.t_start + 0.5 * h;
        if (!(item.t_start < mid && mid < item.t_end)) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "epsilon-strong construction reached time resolution limit at t=" << item.t_start
                << " level=" << level << " eps=" << eps;
            for (const auto& t : item.coords)
                msg << " [" << t.lower << ' ' << t.inner_lower << ' ' << t.x_start << ' ' << t.x_end
                    << ' ' << t.inner_upper << ' ' << t.upper << ']';
            throw NonConvergenceError(msg.str(), {0.0, 1.0}, 0);
        }
        if (stats) ++stats->bisections;
        auto [left, right] = split_cell(rng, item, mid, stats);
        stack.push_back(std::move(right));
        stack.push_back(std::move(left));
    }
    if (stats) stats->cells_sampled += out.size();
    return Skeleton(std::move(out));
}

Skeleton BrownianSampler::sample_segment(RngStream& rng, const Point& x_start, double s, double t,
                                         int level, SamplerStats* stats) const {
    if (!(s < t)) throw std::invalid_argument("sample_segment: empty interval");
    if (x_start.empty()) throw std::invalid_argument("sample_segment: zero-dimensional start");
    Cell root{s, t, level, {}};
    const double sd = std::sqrt(t - s);
    for (double x : x_start) {
        const double y = gaussian(rng, x, sd);
        root.coords.push_back(layered::normalized({x, y, -kInf, kInf, -kInf, kInf}));
    }
    return resolve(rng, root, ladder().eps(level), level, stats);
}

Skeleton BrownianSampler::refine(RngStream& rng, const Cell& cell, SamplerStats* stats) const {
    if (stats) ++stats->refinements;
    return resolve(rng, cell, ladder().eps(cell.level + 1), cell.level + 1, stats);
}

Skeleton BrownianSampler::refine_cell(RngStream& rng, const Skeleton& sk, std::size_t k,
                                      SamplerStats* stats) const {
    if (k >= sk.size()) throw std::out_of_range("refine_cell: cell index out of range");
    return sk.splice(k, k + 1, refine(rng, sk[k], stats));
}

Skeleton BrownianSampler::extend(RngStream& rng, const Skeleton& sk, int level,
                                 SamplerStats* stats) const {
    if (sk.empty()) throw std::invalid_argument("extend: empty skeleton");
    const double s = sk.span_start();
    const double t = sk.span_end();
    return concat(sk, sample_segment(rng, sk.terminal(), t, 2.0 * t - s, level, stats));
}

}  // namespace esplit
