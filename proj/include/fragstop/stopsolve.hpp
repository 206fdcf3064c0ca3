#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fragstop/errors.hpp"
#include "fragstop/expfun.hpp"
#include "fragstop/levy.hpp"
#include "fragstop/parallel.hpp"
#include "fragstop/pathsim.hpp"
#include "fragstop/rng.hpp"
#include "fragstop/stats.hpp"

namespace fragstop {

inline constexpr double kSigmaLevel = 3.0;
inline constexpr double kBStarRelTol = 1e-12;
inline constexpr int kBracketSteps = 60;
/// Relative slack for checks that read Ṽ from a ValueTable (interpolation
/// error is near 1e-9).
inline constexpr double kTableRelSlack = 1e-7;
inline constexpr double kGeneratorQuadTol = 1e-9;

// ---------------------------------------------------------------------------
// Value functions

/// Ṽ(x) = b*·E[(x+I)^{κ/γ}] / E[(b*+I)^{κ/γ}] on a shared sample.
class ValueTilde {
public:
    ValueTilde(const SharedSample& sample, double b_star)
        : sample_(&sample), b_star_(b_star), order_(sample.order()),
          log_den_(log_mean_pow(sample, b_star, sample.order())) {}

    double b_star() const noexcept { return b_star_; }
    double order() const noexcept { return order_; }

    /// log(b*/E[(b*+I)^k]); multiplies (x+I)^k terms.
    double log_scale() const noexcept { return std::log(b_star_) - log_den_; }

    double operator()(double x) const {
        if (x == b_star_) return b_star_;
        return b_star_ * std::exp(log_mean_pow(*sample_, x, order_) - log_den_);
    }

    /// Samplewise derivative k·b*·E[(x+I)^{k−1}] / E[(b*+I)^k].
    double derivative(double x) const {
        return order_ * b_star_ * std::exp(log_mean_pow(*sample_, x, order_ - 1.0) - log_den_);
    }

    const SharedSample& sample() const noexcept { return *sample_; }

private:
    const SharedSample* sample_;
    double b_star_;
    double order_;
    double log_den_;
};

inline double value_tilde(const ModelParams&, const SharedSample& sample, double b_star, double c_query) {
    if (!(c_query > 0.0)) throw DomainError("value_tilde: c must be positive");
    return ValueTilde(sample, b_star)(c_query);
}

/// Delta-method standard error of Ṽ(c) = b·E[(c+I)^k]/E[(b+I)^k] from the
/// shared sample, with the threshold b held fixed.
inline double value_tilde_std_error(const SharedSample& sample, double b_star, double c_query) {
    const double k = sample.order();
    const double top = std::max(b_star, c_query) + *std::max_element(sample.draws.begin(), sample.draws.end());
    std::vector<double> num(sample.size());
    std::vector<double> den(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        num[i] = std::pow((c_query + sample.draws[i]) / top, k);
        den[i] = std::pow((b_star + sample.draws[i]) / top, k);
    }
    return b_star * ratio_std_error(num, den);
}

/// V*(c) = Ṽ(c) for c ≤ b*, c otherwise.
inline double value_star(const ModelParams& params, const SharedSample& sample, double b_star, double c_query) {
    if (c_query > b_star) return c_query;
    return value_tilde(params, sample, b_star, c_query);
}

/// Cubic Hermite interpolant of log E[(x+I)^k] on a log-x grid, for bulk
/// evaluation of Ṽ along many simulated paths. Falls back to the exact
/// sample average outside the tabulated range.
class ValueTable {
public:
    ValueTable(const ValueTilde& v, double x_lo, double x_hi, std::size_t nodes = 512)
        : v_(&v), u_lo_(std::log(x_lo)), u_hi_(std::log(x_hi)), g_(nodes), dg_(nodes) {
        if (nodes < 2 || !(x_hi > x_lo)) throw DomainError("ValueTable: bad range");
        du_ = (u_hi_ - u_lo_) / static_cast<double>(nodes - 1);
        const auto& d = v.sample().draws;
        const double max_i = *std::max_element(d.begin(), d.end());
        const double k = v.order();
        for (std::size_t j = 0; j < nodes; ++j) {
            const double x = std::exp(u_lo_ + du_ * static_cast<double>(j));
            const double top = x + max_i;
            double s1 = 0.0;  // Σ r^{k-1}
            double s2 = 0.0;  // Σ r^k
            for (double i : d) {
                const double r = (x + i) / top;
                const double p = std::pow(r, k - 1.0);
                s1 += p;
                s2 += p * r;
            }
            g_[j] = k * std::log(top) + std::log(s2 / static_cast<double>(d.size()));
            dg_[j] = k * (x / top) * (s1 / s2);
        }
        log_den_ = std::log(v.b_star()) - v.log_scale();
    }

    /// Ṽ(x).
    double operator()(double x) const {
        const double u = std::log(x);
        if (!(u >= u_lo_ && u <= u_hi_)) return (*v_)(x);
        const double pos = (u - u_lo_) / du_;
        std::size_t j = static_cast<std::size_t>(pos);
        if (j >= g_.size() - 1) j = g_.size() - 2;
        const double t = pos - static_cast<double>(j);
        const double t2 = t * t;
        const double t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = t3 - t2;
        const double g = h00 * g_[j] + h10 * du_ * dg_[j] + h01 * g_[j + 1] + h11 * du_ * dg_[j + 1];
        return v_->b_star() * std::exp(g - log_den_);
    }

private:
    const ValueTilde* v_;
    double u_lo_;
    double u_hi_;
    double du_ = 0.0;
    double log_den_ = 0.0;
    std::vector<double> g_;
    std::vector<double> dg_;
};

// ---------------------------------------------------------------------------
// Smooth pasting

struct PastingCheck {
    double value_gap = 0.0;        ///< Ṽ(b*) − b*
    double slope_gap = 0.0;        ///< Ṽ′(b*) − 1, central difference
    double slope_std_error = 0.0;  ///< delta-method standard error of Ṽ′(b*)
};

inline PastingCheck pasting_check(const ModelParams&, const SharedSample& sample, double b_star) {
    const ValueTilde v(sample, b_star);
    PastingCheck out;
    out.value_gap = v(b_star) - b_star;
    const double h = 1e-4 * b_star;
    out.slope_gap = (v(b_star + h) - v(b_star - h)) / (2.0 * h) - 1.0;

    const double k = sample.order();
    const double top = b_star + *std::max_element(sample.draws.begin(), sample.draws.end());
    std::vector<double> x(sample.size());
    std::vector<double> y(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double r = (b_star + sample.draws[i]) / top;
        const double p = std::pow(r, k - 1.0);
        x[i] = k * (b_star / top) * p;
        y[i] = p * r;
    }
    out.slope_std_error = ratio_std_error(x, y);
    return out;
}

// ---------------------------------------------------------------------------
// Solver

struct SampleMeta {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    double rel_tol = 0.0;
};

struct GeneratorPoint {
    double x = 0.0;
    MomentEstimate residual;
    double tolerance = 0.0;
    bool stopping_region = false;
    bool pass = false;
};

struct SolverDiagnostics {
    double value_gap = 0.0;
    double slope_gap = 0.0;
    double slope_std_error = 0.0;
    bool top_order_unstable = false;
    std::vector<GeneratorPoint> generator;
    std::vector<std::string> warnings;
};

struct SolverResult {
    double b_star = 0.0;
    double kappa = 0.0;
    double order = 0.0;  ///< κ/γ
    double value_at_c = 0.0;
    double f_at_b_star = 0.0;
    SampleMeta sample_meta;
    SolverDiagnostics diagnostics;
};

/// Root of f(b) = κ/γ by bracketing from `start` (doubling or halving, at
/// most 60 times) and geometric bisection to relative tolerance `rel_tol`.
inline double solve_threshold(const SharedSample& sample, double start, double rel_tol = kBStarRelTol) {
    const double target = sample.order();
    if (!(target > 1.0))
        throw AssumptionViolation({"kappa/gamma > 1 required (kappa/gamma = " + std::to_string(target) + ")"});
    double lo = start;
    double hi = start;
    if (f_of_b(sample, start) > target) {
        int steps = 0;
        while (f_of_b(sample, hi) > target) {
            lo = hi;
            hi *= 2.0;
            if (++steps > kBracketSteps) throw ResourceCapExceeded("solve_b_star: no bracket within 60 doublings");
        }
    } else {
        int steps = 0;
        while (f_of_b(sample, lo) <= target) {
            hi = lo;
            lo *= 0.5;
            if (++steps > kBracketSteps) throw ResourceCapExceeded("solve_b_star: no bracket within 60 halvings");
        }
    }
    while (hi / lo - 1.0 > rel_tol) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        if (f_of_b(sample, mid) > target) lo = mid;
        else hi = mid;
    }
    return std::sqrt(lo * hi);
}

inline GeneratorPoint generator_point(const ModelParams& params, const DislocationModel& model,
                                      const SharedSample& sample, double b_star, double x);

struct SolveOptions {
    double rel_tol = kBStarRelTol;
    /// Corrupts the returned threshold by this factor (negative-control hook).
    double b_star_factor = 1.0;
    /// Generator residuals at these multiples of b* are added to diagnostics.
    std::vector<double> generator_multiples;
};

inline SolverResult solve_b_star(const ModelParams& params, const DislocationModel& model, const SharedSample& sample,
                                 const SolveOptions& opt = {}) {
    SolverResult r;
    r.kappa = sample.params.kappa;
    r.order = sample.order();
    r.b_star = solve_threshold(sample, params.c, opt.rel_tol) * opt.b_star_factor;
    r.f_at_b_star = f_of_b(sample, r.b_star);
    r.value_at_c = value_star(params, sample, r.b_star, params.c);
    r.sample_meta = {sample.seed, sample.size(), sample.rel_tol};
    const PastingCheck pc = pasting_check(params, sample, r.b_star);
    r.diagnostics.value_gap = pc.value_gap;
    r.diagnostics.slope_gap = pc.slope_gap;
    r.diagnostics.slope_std_error = pc.slope_std_error;
    r.diagnostics.top_order_unstable = top_order_variance_unstable(sample, params.c);
    if (!model.degenerate() && !std::holds_alternative<BinaryPoint>(model.family())) {
        const TiltedDynamics dyn = tilt_at(model, params.theta, r.kappa);
        if (dyn.acceptance < 0.01)
            r.diagnostics.warnings.push_back("tilted jump rejection acceptance below 1%: " +
                                             std::to_string(dyn.acceptance));
    }
    if (r.diagnostics.top_order_unstable)
        r.diagnostics.warnings.push_back("top-order moment standard error unstable under sample halving");
    for (double m : opt.generator_multiples)
        r.diagnostics.generator.push_back(generator_point(params, model, sample, r.b_star, m * r.b_star));
    return r;
}

// ---------------------------------------------------------------------------
// Generator (L − λ)

/// (L − λ)f(x) with Lf(x) = (1+γθx)f′(x) + ∫(f(e^{−γy}x) − f(x)) m(dy).
/// f′ by central difference with step 1e−4·x.
inline double generator_residual(const ModelParams& params, const DislocationModel& model,
                                 const std::function<double(double)>& value_fn, double x) {
    const double h = 1e-4 * x;
    const double fx = value_fn(x);
    const double d = (value_fn(x + h) - value_fn(x - h)) / (2.0 * h);
    const double jump = model.integrate_jump_measure(
        [&](double y) { return value_fn(std::exp(-params.gamma * y) * x) - fx; }, kGeneratorQuadTol);
    return (1.0 + params.gamma * params.theta * x) * d + jump - params.lambda * fx;
}

/// Per-draw decomposition of (L − λ)V*(x) on the shared sample. The mean is
/// the residual; the spread gives its standard error. For x ≤ b* this is
/// (L − λ)Ṽ(x).
inline MomentEstimate generator_residual_estimate(const ModelParams& params, const DislocationModel& model,
                                                  const SharedSample& sample, double b_star, double x) {
    const ValueTilde v(sample, b_star);
    const double k = sample.order();
    const double ls = v.log_scale();
    const double g = params.gamma;
    const double gt = g * params.theta;
    const bool above = x > b_star;
    std::vector<double> terms(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double in = sample.draws[i];
        auto vstar = [&](double w) { return w > b_star ? w : std::exp(ls + k * std::log(w + in)); };
        const double fx = above ? x : std::exp(ls + k * std::log(x + in));
        const double dfx = above ? 1.0 : k * std::exp(ls + (k - 1.0) * std::log(x + in));
        const double jump = model.integrate_jump_measure(
            [&](double y) { return vstar(std::exp(-g * y) * x) - fx; }, kGeneratorQuadTol);
        terms[i] = (1.0 + gt * x) * dfx + jump - params.lambda * fx;
    }
    return mean_estimate(terms);
}

/// Residual with its pass/fail: |r| ≤ 3σ + tol below b*, r ≤ 3σ + tol above.
inline GeneratorPoint generator_point(const ModelParams& params, const DislocationModel& model,
                                      const SharedSample& sample, double b_star, double x) {
    GeneratorPoint p;
    p.x = x;
    p.stopping_region = x > b_star;
    p.residual = generator_residual_estimate(params, model, sample, b_star, x);
    const double scale = std::max(1.0, std::abs(x) * params.lambda);
    p.tolerance = kSigmaLevel * p.residual.std_error + 1e-7 * scale;
    p.pass = p.stopping_region ? p.residual.value <= p.tolerance : std::abs(p.residual.value) <= p.tolerance;
    return p;
}

// ---------------------------------------------------------------------------
// First-passage Laplace transform

struct LaplaceCheck {
    double b = 0.0;
    MomentEstimate mc;        ///< mean of e^{−λτ} over exact passages
    MomentEstimate analytic;  ///< E[(c+I)^{κ/γ}] / E[(b+I)^{κ/γ}], delta-method error
    double combined_std_error = 0.0;
    std::size_t missed = 0;  ///< paths that hit the safety horizon
    bool pass = false;
};

/// Compares Monte Carlo E[e^{−λτ_b}] against the moment ratio. `params` may
/// carry any λ > 0 (see ModelParams::with_discount) as long as `sample` was
/// drawn under the matching κ(λ).
inline LaplaceCheck first_passage_laplace_check(const ModelParams& params, const DislocationModel& model,
                                                const SharedSample& sample, double b, std::size_t n_paths,
                                                std::uint64_t seed, unsigned workers = 0) {
    if (!(b >= params.c)) throw DomainError("first_passage_laplace_check: b must be >= c");
    if (sample.params.kappa != params.kappa) throw DomainError("first_passage_laplace_check: sample kappa mismatch");
    LaplaceCheck out;
    out.b = b;
    const double k = params.kappa / params.gamma;
    const double top = b + *std::max_element(sample.draws.begin(), sample.draws.end());
    std::vector<double> num(sample.size());
    std::vector<double> den(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        num[i] = std::pow((params.c + sample.draws[i]) / top, k);
        den[i] = std::pow((b + sample.draws[i]) / top, k);
    }
    out.analytic.value = mean_estimate(num).value / mean_estimate(den).value;
    out.analytic.std_error = ratio_std_error(num, den);
    out.analytic.n_samples = sample.size();
    out.analytic.order_s = k;

    const TiltedDynamics dyn = untilted(model, params.theta);
    const StreamPlan plan(seed);
    struct Draw {
        double discount = 0.0;
        bool hit = true;
    };
    const auto draws = parallel_map(n_paths, workers, [&](std::size_t j) {
        Rng g = plan.stream("laplace", j);
        LevyEvents<Rng> ev(dyn, g);
        const FirstPassage fp = first_passage(params, params.c, b, ev);
        return Draw{fp.hit ? std::exp(-params.lambda * fp.tau) : 0.0, fp.hit};
    });
    std::vector<double> disc(n_paths);
    for (std::size_t j = 0; j < n_paths; ++j) {
        disc[j] = draws[j].discount;
        if (!draws[j].hit) ++out.missed;
    }
    out.mc = mean_estimate(disc);
    out.combined_std_error = combine_se(out.mc.std_error, out.analytic.std_error);
    out.pass = within_sigma(out.mc.value, out.analytic.value, out.combined_std_error, kSigmaLevel,
                            1e-9 * std::abs(out.analytic.value));
    return out;
}

// ---------------------------------------------------------------------------
// Martingale / supermartingale

/// Z^c at fixed times for many independent paths; z[time index][path].
struct PathEnsemble {
    std::vector<double> times;
    std::vector<std::vector<double>> z;
};

inline PathEnsemble simulate_ensemble(const ModelParams& params, const DislocationModel& model,
                                      std::span<const double> times, std::size_t n_paths, std::uint64_t seed,
                                      unsigned workers = 0) {
    if (!std::is_sorted(times.begin(), times.end())) throw DomainError("simulate_ensemble: times must ascend");
    const TiltedDynamics dyn = untilted(model, params.theta);
    const StreamPlan plan(seed);
    const auto rows = parallel_map(n_paths, workers, [&](std::size_t j) {
        Rng g = plan.stream("zpaths", j);
        LevyEvents<Rng> ev(dyn, g);
        return z_at_times(params, params.c, times, ev);
    });
    PathEnsemble e;
    e.times.assign(times.begin(), times.end());
    e.z.assign(times.size(), std::vector<double>(n_paths));
    for (std::size_t j = 0; j < n_paths; ++j)
        for (std::size_t t = 0; t < times.size(); ++t) e.z[t][j] = rows[j][t];
    return e;
}

struct TimeCheck {
    double t = 0.0;
    MomentEstimate estimate;  ///< mean of e^{−λt}·value(Z_t); std_error combines path and sample error
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct SupermartingaleReport {
    std::vector<TimeCheck> points;         ///< each mean ≤ V*(c) + 3σ
    std::vector<MomentEstimate> increments;  ///< mean(t_{j+1}) − mean(t_j), paired
    std::vector<bool> increment_pass;        ///< increment ≤ 3σ
    bool pass = false;
};

namespace detail {

inline constexpr std::size_t kInfluenceGrid = 256;
inline constexpr std::size_t kInfluencePaths = 20000;

/// Standard error contributed by the shared sample to a path average of
/// e^{−λt}·Ṽ-part(Z), which is linear in the empirical law of I through
/// C·(z+I)^k with C = b*/E[(b*+I)^k]. `slots` pairs a time index with a
/// sign so increments can be handled; `c_weight` subtracts the starting
/// value's Ṽ-part. Every draw enters; the path average uses at most
/// kInfluencePaths paths.
struct InfluenceSpec {
    std::vector<std::pair<std::size_t, double>> slots;  // (time index, sign)
    double c_weight = 0.0;                              // coefficient on C·(c+I)^k
};

inline double sample_induced_se(const ModelParams& params, const ValueTilde& v, const PathEnsemble& e,
                                const InfluenceSpec& spec, bool star) {
    const auto& d = v.sample().draws;
    const std::size_t n = d.size();
    if (n < 2) return 0.0;
    const std::size_t np = e.z.empty() ? 0 : std::min(kInfluencePaths, e.z.front().size());
    const double k = v.order();
    const double ls = v.log_scale();
    const double bs = v.b_star();

    // Path part as a function of the draw: H(I) = Σ sign·e^{−λt}·mean_j C(z_j + I)^k.
    // Smooth in I, so it is tabulated on a log grid and interpolated.
    auto path_part = [&](double in) {
        double acc = 0.0;
        for (const auto& [slot, sign] : spec.slots) {
            const double disc = std::exp(-params.lambda * e.times[slot]);
            double s = 0.0;
            for (std::size_t j = 0; j < np; ++j) {
                const double z = e.z[slot][j];
                if (star && z > bs) continue;
                s += std::exp(ls + k * std::log(z + in));
            }
            acc += sign * disc * s / static_cast<double>(np);
        }
        return acc;
    };
    const auto [lo_it, hi_it] = std::minmax_element(d.begin(), d.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::function<double(double)> h;
    std::vector<double> grid_u;
    std::vector<double> grid_h;
    if (spec.slots.empty()) {
        h = [](double) { return 0.0; };
    } else if (!(lo > 0.0) || hi / lo < 1.0 + 1e-9) {
        const double h0 = path_part(lo);
        h = [h0](double) { return h0; };
    } else {
        const double u0 = std::log(lo);
        const double du = (std::log(hi) - u0) / static_cast<double>(kInfluenceGrid - 1);
        for (std::size_t g = 0; g < kInfluenceGrid; ++g) {
            grid_u.push_back(u0 + du * static_cast<double>(g));
            grid_h.push_back(path_part(std::exp(grid_u.back())));
        }
        h = [&, u0, du](double in) {
            const double pos = std::clamp((std::log(in) - u0) / du, 0.0, static_cast<double>(kInfluenceGrid - 1));
            const std::size_t j = std::min(static_cast<std::size_t>(pos), kInfluenceGrid - 2);
            const double t = pos - static_cast<double>(j);
            return (1.0 - t) * grid_h[j] + t * grid_h[j + 1];
        };
    }

    // g_i: draw i's contribution; a_i: its share of the normalizer, mean 1
    std::vector<double> g(n);
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double in = d[i];
        double acc = h(in);
        if (spec.c_weight != 0.0) acc -= spec.c_weight * std::exp(ls + k * std::log(params.c + in));
        g[i] = acc;
        a[i] = std::exp(ls + k * std::log(bs + in)) / bs;
    }
    double gbar = 0.0;
    for (double x : g) gbar += x;
    gbar /= static_cast<double>(n);
    std::vector<double> infl(n);
    for (std::size_t i = 0; i < n; ++i) infl[i] = g[i] - gbar * a[i];
    return mean_estimate(infl).std_error;
}

}  // namespace detail

/// Mean of e^{−λt}Ṽ(Z^c_t) at each time, compared to Ṽ(c) at 3σ. The error
/// combines path noise with the shared sample's own noise in Ṽ.
inline std::vector<TimeCheck> martingale_check(const ModelParams& params, const DislocationModel& model,
                                               const SharedSample& sample, double b_star,
                                               std::span<const double> times, std::size_t n_paths,
                                               std::uint64_t seed, unsigned workers = 0) {
    const ValueTilde v(sample, b_star);
    const double target = v(params.c);
    std::vector<double> positive;
    for (double t : times)
        if (t > 0.0) positive.push_back(t);
    std::sort(positive.begin(), positive.end());
    const PathEnsemble e = simulate_ensemble(params, model, positive, n_paths, seed, workers);
    const ValueTable table(v, 1e-8 * b_star, 1e4 * b_star);

    std::vector<TimeCheck> out;
    for (double t : times) {
        TimeCheck tc;
        tc.t = t;
        tc.target = target;
        if (t <= 0.0) {
            tc.estimate.value = target;
            tc.estimate.n_samples = n_paths;
            tc.pass = true;
            out.push_back(tc);
            continue;
        }
        const std::size_t slot = static_cast<std::size_t>(std::find(positive.begin(), positive.end(), t) - positive.begin());
        const double disc = std::exp(-params.lambda * t);
        std::vector<double> vals(n_paths);
        for (std::size_t j = 0; j < n_paths; ++j) vals[j] = disc * table(e.z[slot][j]);
        tc.estimate = mean_estimate(vals);
        const double s_se = detail::sample_induced_se(params, v, e, {{{slot, 1.0}}, 1.0}, false);
        tc.estimate.std_error = combine_se(tc.estimate.std_error, s_se);
        tc.tolerance = kSigmaLevel * tc.estimate.std_error + kTableRelSlack * std::abs(target);
        tc.pass = std::abs(tc.estimate.value - target) <= tc.tolerance;
        out.push_back(tc);
    }
    return out;
}

/// Means of e^{−λt}V*(Z^c_t) at ascending times (0 allowed). Each must be
/// ≤ V*(c) + 3σ and consecutive paired increments ≤ 3σ.
inline SupermartingaleReport supermartingale_check(const ModelParams& params, const DislocationModel& model,
                                                   const SharedSample& sample, double b_star,
                                                   std::span<const double> times, std::size_t n_paths,
                                                   std::uint64_t seed, unsigned workers = 0) {
    if (!std::is_sorted(times.begin(), times.end())) throw DomainError("supermartingale_check: times must ascend");
    const ValueTilde v(sample, b_star);
    const ValueTable table(v, 1e-8 * b_star, 1e4 * b_star);
    const double target = params.c > b_star ? params.c : v(params.c);
    const double c_weight = params.c > b_star ? 0.0 : 1.0;
    std::vector<double> positive;
    for (double t : times)
        if (t > 0.0) positive.push_back(t);
    const PathEnsemble e = simulate_ensemble(params, model, positive, n_paths, seed, workers);
    auto vstar = [&](double z) { return z > b_star ? z : table(z); };

    // per-time path values; t = 0 rows are the constant V*(c)
    std::vector<std::vector<double>> vals;
    std::vector<long> slot_of;
    for (double t : times) {
        std::vector<double> row(n_paths, target);
        long slot = -1;
        if (t > 0.0) {
            slot = static_cast<long>(std::find(positive.begin(), positive.end(), t) - positive.begin());
            const double disc = std::exp(-params.lambda * t);
            for (std::size_t j = 0; j < n_paths; ++j) row[j] = disc * vstar(e.z[static_cast<std::size_t>(slot)][j]);
        }
        vals.push_back(std::move(row));
        slot_of.push_back(slot);
    }

    SupermartingaleReport rep;
    rep.pass = true;
    for (std::size_t w = 0; w < times.size(); ++w) {
        TimeCheck tc;
        tc.t = times[w];
        tc.target = target;
        tc.estimate = mean_estimate(vals[w]);
        detail::InfluenceSpec spec;
        if (slot_of[w] >= 0) spec.slots.push_back({static_cast<std::size_t>(slot_of[w]), 1.0});
        spec.c_weight = slot_of[w] >= 0 ? c_weight : 0.0;
        const double s_se = slot_of[w] >= 0 ? detail::sample_induced_se(params, v, e, spec, true) : 0.0;
        tc.estimate.std_error = combine_se(tc.estimate.std_error, s_se);
        tc.tolerance = kSigmaLevel * tc.estimate.std_error + kTableRelSlack * std::abs(target);
        tc.pass = tc.estimate.value <= target + tc.tolerance;
        rep.pass = rep.pass && tc.pass;
        rep.points.push_back(tc);
    }
    for (std::size_t w = 0; w + 1 < times.size(); ++w) {
        MomentEstimate inc = paired_difference(vals[w + 1], vals[w]);
        detail::InfluenceSpec spec;
        if (slot_of[w + 1] >= 0) spec.slots.push_back({static_cast<std::size_t>(slot_of[w + 1]), 1.0});
        if (slot_of[w] >= 0) spec.slots.push_back({static_cast<std::size_t>(slot_of[w]), -1.0});
        if (slot_of[w] < 0 && slot_of[w + 1] >= 0) spec.c_weight = c_weight;
        const double s_se = spec.slots.empty() ? 0.0 : detail::sample_induced_se(params, v, e, spec, true);
        inc.std_error = combine_se(inc.std_error, s_se);
        const bool ok = inc.value <= kSigmaLevel * inc.std_error + kTableRelSlack * std::abs(target);
        rep.increments.push_back(inc);
        rep.increment_pass.push_back(ok);
        rep.pass = rep.pass && ok;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Threshold sweep (brute-force optimality oracle)

struct SweepResult {
    std::vector<double> thresholds;
    std::vector<MomentEstimate> payoff;  ///< E[e^{−λτ_b} Z_{τ_b}]
    std::size_t argmax = 0;
    /// payoff(argmax) − payoff(j) with paired standard errors
    std::vector<MomentEstimate> gap_to_max;
};

/// Payoff of every threshold along the same paths (common random numbers).
inline SweepResult threshold_sweep(const ModelParams& params, const DislocationModel& model,
                                   std::span<const double> thresholds, std::size_t n_paths, std::uint64_t seed,
                                   unsigned workers = 0) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw DomainError("threshold_sweep: grid must ascend");
    const TiltedDynamics dyn = untilted(model, params.theta);
    const StreamPlan plan(seed);
    const auto rows = parallel_map(n_paths, workers, [&](std::size_t j) {
        Rng g = plan.stream("sweep", j);
        LevyEvents<Rng> ev(dyn, g);
        const auto fps = first_passages(params, params.c, thresholds, ev);
        std::vector<double> pay(thresholds.size());
        for (std::size_t i = 0; i < thresholds.size(); ++i)
            pay[i] = fps[i].hit ? std::exp(-params.lambda * fps[i].tau) * std::max(thresholds[i], params.c) : 0.0;
        return pay;
    });
    SweepResult r;
    r.thresholds.assign(thresholds.begin(), thresholds.end());
    std::vector<std::vector<double>> cols(thresholds.size(), std::vector<double>(n_paths));
    for (std::size_t j = 0; j < n_paths; ++j)
        for (std::size_t i = 0; i < thresholds.size(); ++i) cols[i][j] = rows[j][i];
    for (const auto& col : cols) r.payoff.push_back(mean_estimate(col));
    for (std::size_t i = 1; i < r.payoff.size(); ++i)
        if (r.payoff[i].value > r.payoff[r.argmax].value) r.argmax = i;
    for (const auto& col : cols) r.gap_to_max.push_back(paired_difference(cols[r.argmax], col));
    return r;
}

}  // namespace fragstop
