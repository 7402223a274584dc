#pragma once

// Small statistics helpers shared by the test suites.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace testutil {

// Asymptotic Kolmogorov tail with Stephens' small-sample correction.
inline double kolmogorov_pvalue(double d, double n_eff) {
    const double s = std::sqrt(n_eff);
    const double lambda = (s + 0.12 + 0.11 / s) * d;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

inline double ks_pvalue(const std::vector<double>& xs, const std::function<double(double)>& cdf) {
    return kolmogorov_pvalue(ks_statistic(xs, cdf), static_cast<double>(xs.size()));
}

inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return kolmogorov_pvalue(d, na * nb / (na + nb));
}

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
    return boost::math::cdf(boost::math::normal(mean, sd), x);
}

struct MeanSe {
    double mean = 0.0;
    double variance = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    const double n = static_cast<double>(xs.size());
    r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.variance = xs.size() > 1 ? ss / (n - 1.0) : 0.0;
    r.se = std::sqrt(r.variance / n);
    return r;
}

// Two-sided one-sample t-test p-value against mu.
inline double t_test_pvalue(const std::vector<double>& xs, double mu) {
    const MeanSe m = mean_se(xs);
    if (m.se == 0.0) return m.mean == mu ? 1.0 : 0.0;
    const double t = (m.mean - mu) / m.se;
    boost::math::students_t dist(static_cast<double>(xs.size() - 1));
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// Half-width of a 4-sigma band for a frequency estimate.
inline double four_sigma(double p, double n) { return 4.0 * std::sqrt(p * (1.0 - p) / n); }

}  // namespace testutil
