#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace fragstop {

/// Monte Carlo estimate of one scalar.
/// `order_s` and `shift_a` are meaningful for tilted moments E[(a + I)^s];
/// other estimators leave them at zero.
struct MomentEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    double order_s = 0.0;
    double shift_a = 0.0;
};

/// Sample mean with standard error sd/√n (sd uses n − 1).
inline MomentEstimate mean_estimate(std::span<const double> xs) {
    MomentEstimate est;
    est.n_samples = xs.size();
    if (xs.empty()) return est;
    // Welford
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t k = 0;
    for (double x : xs) {
        ++k;
        const double d = x - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (x - mean);
    }
    est.value = mean;
    if (k > 1) {
        const double var = m2 / static_cast<double>(k - 1);
        est.std_error = std::sqrt(var / static_cast<double>(k));
    }
    return est;
}

/// Mean of the elementwise difference a − b, for paired comparisons.
inline MomentEstimate paired_difference(std::span<const double> a, std::span<const double> b) {
    MomentEstimate est;
    const std::size_t n = a.size() < b.size() ? a.size() : b.size();
    est.n_samples = n;
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i] - b[i];
        const double d = x - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (x - mean);
    }
    est.value = mean;
    if (n > 1) est.std_error = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
    return est;
}

/// Delta-method standard error of mean(x)/mean(y) over the same draws.
inline double ratio_std_error(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    const double r = mx / my;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = (x[i] - r * y[i]) / my;
        ss += z * z;
    }
    return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

/// |a − b| ≤ k·√(se_a² + se_b²) + slack.
inline bool within_sigma(double a, double b, double combined_se, double k = 3.0, double slack = 0.0) {
    return std::abs(a - b) <= k * combined_se + slack;
}

inline double combine_se(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace fragstop
