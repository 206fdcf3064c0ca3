#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fragstop/errors.hpp"
#include "fragstop/levy.hpp"
#include "fragstop/parallel.hpp"
#include "fragstop/pathsim.hpp"
#include "fragstop/rng.hpp"
#include "fragstop/stats.hpp"

namespace fragstop {

inline constexpr std::size_t kDefaultSampleSize = 100'000;
inline constexpr double kDefaultRelTol = 1e-6;
inline constexpr double kOrderSlack = 1e-12;

/// Mₙ = E^{κ}[I∞ⁿ] via Mₙ = n·Mₙ₋₁ / (λ − ψ(κ − nγ)), M₀ = 1.
/// Valid for n ≤ ⌊κ/γ⌋.
inline double moment_recursion(const ModelParams& params, const DislocationModel& model, int n) {
    if (n < 0) throw DomainError("moment_recursion: n must be nonnegative");
    if (static_cast<double>(n) > params.kappa / params.gamma + kOrderSlack)
        throw DomainError("moment_recursion: n = " + std::to_string(n) + " exceeds floor(kappa/gamma)");
    double m = 1.0;
    for (int j = 1; j <= n; ++j) {
        const double u = std::max(0.0, params.kappa - j * params.gamma);
        const double denom = params.lambda - psi(params, model, u);
        if (!(denom > 0.0)) throw DomainError("moment_recursion: non-positive denominator");
        m = j * m / denom;
    }
    return m;
}

/// I∞ draws under P^{κ(λ)}, shared by every f(b) and Ṽ evaluation of a solve.
struct SharedSample {
    std::vector<double> draws;
    std::uint64_t seed = 0;
    double rel_tol = kDefaultRelTol;
    ModelParams params;

    std::size_t size() const noexcept { return draws.size(); }
    double order() const noexcept { return params.order(); }
};

/// Draw n realizations of I∞ on independent substreams ("iinfty", i).
inline SharedSample build_shared_sample(const ModelParams& params, const DislocationModel& model, std::size_t n,
                                        std::uint64_t seed, double rel_tol = kDefaultRelTol, unsigned workers = 0) {
    if (n == 0) throw DomainError("build_shared_sample: n must be positive");
    SharedSample s;
    s.seed = seed;
    s.rel_tol = rel_tol;
    s.params = params;
    const TiltedDynamics dyn = tilt_at(model, params.theta, params.kappa);
    const double tail_mean = params.kappa >= params.gamma ? moment_recursion(params, model, 1) : 0.0;
    const StreamPlan plan(seed);
    s.draws = parallel_map(n, workers, [&](std::size_t i) {
        Rng g = plan.stream("iinfty", i);
        return simulate_I_infty(dyn, params, g, rel_tol, tail_mean).value;
    });
    return s;
}

/// Sample mean and standard error of (a + I∞)^s.
inline MomentEstimate estimate_moment(const SharedSample& sample, double a, double s) {
    if (!(a >= 0.0)) throw DomainError("estimate_moment: shift a must be nonnegative");
    if (s > sample.order() + kOrderSlack)
        throw DomainError("estimate_moment: order s = " + std::to_string(s) + " exceeds kappa/gamma");
    MomentEstimate est;
    if (s == 0.0) {
        est.value = 1.0;
        est.n_samples = sample.size();
    } else {
        std::vector<double> v(sample.size());
        std::transform(sample.draws.begin(), sample.draws.end(), v.begin(),
                       [&](double x) { return std::pow(a + x, s); });
        est = mean_estimate(v);
    }
    est.order_s = s;
    est.shift_a = a;
    return est;
}

/// log mean((a + I)^s), stable for large orders.
inline double log_mean_pow(const SharedSample& sample, double a, double s) {
    const auto& d = sample.draws;
    double top = -kInf;
    for (double x : d) top = std::max(top, s * std::log(a + x));
    double acc = 0.0;
    for (double x : d) acc += std::exp(s * std::log(a + x) - top);
    return top + std::log(acc / static_cast<double>(d.size()));
}

/// f(b) = (1/b)·E[(b+I)^{κ/γ}] / E[(b+I)^{κ/γ−1}] on the shared draws.
/// Strictly decreasing in b for any fixed sample when κ/γ > 1.
inline double f_of_b(const SharedSample& sample, double b) {
    if (!(b > 0.0)) throw DomainError("f_of_b: b must be positive");
    const double k = sample.order();
    const double top = b + *std::max_element(sample.draws.begin(), sample.draws.end());
    double num = 0.0;
    double den = 0.0;
    for (double x : sample.draws) {
        const double r = (b + x) / top;
        const double p = std::pow(r, k - 1.0);
        num += p * r;
        den += p;
    }
    return (top / b) * (num / den);
}

/// Flags a top-order (s = κ/γ) variance estimate that is not settled:
/// the half-sample standard error, rescaled to the full size, differs from
/// the full-sample one by more than 25%.
inline bool top_order_variance_unstable(const SharedSample& sample, double a) {
    if (sample.size() < 4) return true;
    const double k = sample.order();
    std::vector<double> v(sample.size());
    std::transform(sample.draws.begin(), sample.draws.end(), v.begin(), [&](double x) { return std::pow(a + x, k); });
    const auto full = mean_estimate(v);
    const auto half = mean_estimate(std::span<const double>(v).first(v.size() / 2));
    if (full.std_error == 0.0) return false;
    const double rescaled = half.std_error * std::sqrt(static_cast<double>(v.size() / 2) / static_cast<double>(v.size()));
    return std::abs(rescaled - full.std_error) > 0.25 * full.std_error;
}

}  // namespace fragstop
