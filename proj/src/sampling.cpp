#include "esplit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

namespace esplit {

Interval clamp_unit(Interval v) {
    return {std::clamp(v.lo, 0.0, 1.0), std::clamp(v.hi, 0.0, 1.0)};
}

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
    std::uint64_t key = mix64(seed ^ 0xD1B54A32D192ED03ULL) ^ mix64(stream_id + 0x8CB92BA72F3D8DD7ULL);
    for (auto& word : s_) {
        key += 0x9E3779B97F4A7C15ULL;
        word = mix64(key);
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

RngStream RngStream::child(std::initializer_list<std::uint64_t> path) const {
    std::uint64_t id = mix64(stream_id_ ^ 0xA0761D6478BD642FULL);
    for (auto p : path) id = mix64(id ^ mix64(p + 0xE7037ED1A0B428DBULL));
    return RngStream(seed_, id);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::standard_normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::below: empty range");
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double gaussian(RngStream& rng, double mean, double sd) {
    if (!(sd >= 0.0)) throw std::invalid_argument("gaussian: negative standard deviation");
    if (sd == 0.0) return mean;
    return mean + sd * rng.standard_normal();
}

double bridge_point(RngStream& rng, double x_s, double x_t, double s, double u, double t) {
    if (!(s < u && u < t)) throw std::invalid_argument("bridge_point: u must lie in (s, t)");
    const double frac = (u - s) / (t - s);
    const double mean = x_s + frac * (x_t - x_s);
    const double var = (u - s) * (t - u) / (t - s);
    return gaussian(rng, mean, std::sqrt(var));
}

ProbabilityBounds ProbabilityBounds::constant(double p) {
    return ProbabilityBounds([p](int) { return Interval{p, p}; });
}

bool retrospective_bernoulli(RngStream& rng, const ProbabilityBounds& p, int cap,
                             BernoulliStats* stats) {
    return retrospective_bernoulli(rng, [&](int n) { return p.at(n); }, cap, stats);
}

BridgeStaySeries::BridgeStaySeries(double x, double y, double h, double l, double u)
    : x_(x), y_(y), h_(h), l_(l), u_(u), w_(u - l) {
    if (!(h > 0.0)) throw std::invalid_argument("BridgeStaySeries: non-positive duration");
    const double lo_end = std::min(x, y);
    const double hi_end = std::max(x, y);
    if (!(l < lo_end) || !(u > hi_end)) {
        bounds_ = {0.0, 0.0};
        return;
    }
    const bool lower_open = std::isinf(l);
    const bool upper_open = std::isinf(u);
    if (lower_open && upper_open) {
        bounds_ = {1.0, 1.0};
    } else if (lower_open) {
        const double p = -std::expm1(-2.0 * (u - x) * (u - y) / h);
        bounds_ = {p, p};
    } else if (upper_open) {
        const double p = -std::expm1(-2.0 * (x - l) * (y - l) / h);
        bounds_ = {p, p};
    } else {
        refine();
    }
}

void BridgeStaySeries::refine() {
    if (exact()) return;
    ++j_;
    const double j = static_cast<double>(j_);
    const double jm1w = (j - 1.0) * w_;
    const double jw = j * w_;
    const double d = y_ - x_;
    const double sigma = std::exp(-2.0 * (u_ - x_ + jm1w) * (u_ - y_ + jm1w) / h_) +
                         std::exp(-2.0 * (x_ - l_ + jm1w) * (y_ - l_ + jm1w) / h_);
    const double tau = std::exp(-2.0 * jw * (jw + d) / h_) + std::exp(-2.0 * jw * (jw - d) / h_);
    partial_ -= sigma - tau;
    update_bounds();
}

void BridgeStaySeries::update_bounds() {
    // Every image term beyond index n is at most exp(-2 (j-1)^2 w^2 / h), four
    // terms per index, so the tail is dominated by a geometric series.
    const double c = w_ * w_ / h_;
    const double n = static_cast<double>(j_);
    const double denom = -std::expm1(-4.0 * c * n);
    double tail = denom > 0.0 ? 4.0 * std::exp(-2.0 * c * n * n) / denom : kInf;
    if (!(tail >= 0.0)) tail = kInf;
    Interval fresh = clamp_unit({partial_ - tail, partial_ + tail});
    if (j_ == 1) {
        bounds_ = fresh;
    } else {
        bounds_ = {std::max(bounds_.lo, fresh.lo), std::min(bounds_.hi, fresh.hi)};
        if (bounds_.lo > bounds_.hi) bounds_.lo = bounds_.hi = partial_;
    }
    if (tail == 0.0) bounds_ = clamp_unit({partial_, partial_});
}

ProbabilityBounds bridge_exceedance_bounds(double x_s, double x_t, double s, double t, double c) {
    if (!(s < t)) throw std::invalid_argument("bridge_exceedance_bounds: empty interval");
    double p;
    if (c <= std::max(x_s, x_t)) {
        p = 1.0;
    } else if (std::isinf(c)) {
        p = 0.0;
    } else {
        p = std::exp(-2.0 * (c - x_s) * (c - x_t) / (t - s));
    }
    return ProbabilityBounds::constant(p);
}

ProbabilityBounds bridge_stay_bounds(double x_s, double x_t, double s, double t, double l, double u) {
    if (!(s < t)) throw std::invalid_argument("bridge_stay_bounds: empty interval");
    // Memoised per draw: the series object is shared by the returned closure
    // and advanced lazily up to the requested index.
    auto series = std::make_shared<BridgeStaySeries>(x_s, x_t, t - s, l, u);
    auto cache = std::make_shared<std::vector<Interval>>();
    cache->push_back(series->bounds());
    return ProbabilityBounds([series, cache](int n) {
        if (n < 0) n = 0;
        while (static_cast<int>(cache->size()) <= n) {
            series->refine();
            cache->push_back(series->bounds());
        }
        return (*cache)[static_cast<std::size_t>(n)];
    });
}

}  // namespace esplit
