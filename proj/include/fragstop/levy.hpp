#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include "fragstop/errors.hpp"
#include "fragstop/rng.hpp"

namespace fragstop {

// Finite binary dislocation families. `split` / the sampled value is always
// the larger fragment s in [1/2, 1); the other fragment has mass 1 − s.

/// ν ≡ 0. Accepted everywhere except fragsim, as a deterministic oracle.
struct NoFragmentation {};

/// s uniform on [1/2, 1).
struct BinaryUniform {
    double rate;
};

/// s = split with probability one.
struct BinaryPoint {
    double rate;
    double split;
};

/// s = max(B, 1 − B) with B ~ Beta(shape, shape). shape = 1 is BinaryUniform.
struct BinaryBeta {
    double rate;
    double shape;
};

class DislocationModel {
public:
    using Family = std::variant<NoFragmentation, BinaryUniform, BinaryPoint, BinaryBeta>;

    static DislocationModel none() { return DislocationModel(NoFragmentation{}); }

    static DislocationModel uniform(double rate) {
        require_rate(rate);
        return DislocationModel(BinaryUniform{rate});
    }

    static DislocationModel point(double rate, double split) {
        require_rate(rate);
        if (!(split >= 0.5 && split < 1.0))
            throw InvalidModel("BinaryPoint split must lie in [1/2, 1), got " + std::to_string(split));
        return DislocationModel(BinaryPoint{rate, split});
    }

    static DislocationModel beta(double rate, double shape) {
        require_rate(rate);
        if (!(shape > 0.0 && std::isfinite(shape)))
            throw InvalidModel("BinaryBeta shape must be positive, got " + std::to_string(shape));
        return DislocationModel(BinaryBeta{rate, shape});
    }

    const Family& family() const noexcept { return family_; }

    std::string_view family_name() const noexcept {
        return std::visit(
            [](const auto& f) -> std::string_view {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, NoFragmentation>) return "none";
                else if constexpr (std::is_same_v<T, BinaryUniform>) return "uniform";
                else if constexpr (std::is_same_v<T, BinaryPoint>) return "point";
                else return "beta";
            },
            family_);
    }

    bool degenerate() const noexcept { return std::holds_alternative<NoFragmentation>(family_); }

    /// Total rate ν(S): dislocation events per unit time per block.
    double rate() const noexcept {
        return std::visit(
            [](const auto& f) -> double {
                if constexpr (std::is_same_v<std::decay_t<decltype(f)>, NoFragmentation>) return 0.0;
                else return f.rate;
            },
            family_);
    }

    /// Infimum of p for which ∫|1 − Σ s_i^{1+p}| ν(ds) converges.
    double p_lower() const noexcept {
        constexpr double ninf = -std::numeric_limits<double>::infinity();
        return std::visit(
            [](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, BinaryUniform>) return -2.0;
                else if constexpr (std::is_same_v<T, BinaryBeta>) return -1.0 - f.shape;
                else return ninf;
            },
            family_);
    }

    /// Draw the larger fragment fraction s ∈ [1/2, 1) from the normalized split law.
    template <class G>
    double sample_split(G& g) const {
        return std::visit(
            [&g](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, NoFragmentation>) {
                    throw InvalidModel("ν ≡ 0 has no split law");
                } else if constexpr (std::is_same_v<T, BinaryUniform>) {
                    return 0.5 + 0.5 * uniform01(g);
                } else if constexpr (std::is_same_v<T, BinaryPoint>) {
                    return f.split;
                } else {
                    std::gamma_distribution<double> gd(f.shape, 1.0);
                    for (;;) {
                        const double x = gd(g);
                        const double y = gd(g);
                        const double b = x / (x + y);
                        const double s = b >= 0.5 ? b : 1.0 - b;
                        if (s < 1.0 && std::isfinite(s)) return s;
                    }
                }
            },
            family_);
    }

    /// ∫ h(s) ν(ds) over the larger-fragment fraction s ∈ [1/2, 1).
    /// Exact for ν ≡ 0 and BinaryPoint, adaptive quadrature otherwise.
    template <class H>
    double integrate(H&& h, double tol = 1e-10) const {
        using boost::math::quadrature::gauss_kronrod;
        return std::visit(
            [&](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, NoFragmentation>) {
                    return 0.0;
                } else if constexpr (std::is_same_v<T, BinaryPoint>) {
                    return f.rate * h(f.split);
                } else if constexpr (std::is_same_v<T, BinaryUniform>) {
                    return 2.0 * f.rate *
                           gauss_kronrod<double, 31>::integrate([&](double s) { return h(s); }, 0.5, 1.0, 15, tol);
                } else {
                    const double a = f.shape;
                    const double norm = 2.0 / boost::math::beta(a, a);
                    auto density = [&](double s) {
                        return norm * std::pow(s, a - 1.0) * std::pow(1.0 - s, a - 1.0) * h(s);
                    };
                    if (a >= 1.0)
                        return f.rate * gauss_kronrod<double, 31>::integrate(density, 0.5, 1.0, 15, tol);
                    static thread_local boost::math::quadrature::tanh_sinh<double> ts;
                    return f.rate * ts.integrate(density, 0.5, 1.0, tol);
                }
            },
            family_);
    }

    /// ∫ g(x) m(dx) for the tagged-fragment Lévy measure m, i.e.
    /// ∫ ν(ds) [s·g(−log s) + (1 − s)·g(−log(1 − s))].
    template <class G>
    double integrate_jump_measure(G&& g, double tol = 1e-10) const {
        return integrate([&](double s) { return s * g(-std::log(s)) + (1.0 - s) * g(-std::log1p(-s)); }, tol);
    }

private:
    explicit DislocationModel(Family f) : family_(f) {}

    static void require_rate(double rate) {
        if (!(rate > 0.0 && std::isfinite(rate)))
            throw InvalidModel("dislocation rate must be positive, got " + std::to_string(rate));
    }

    Family family_;
};

/// Laplace exponent of the tagged fragment, Φ(p) = ∫(1 − Σ s_i^{1+p}) ν(ds).
inline double phi(const DislocationModel& model, double p) {
    if (!(p > model.p_lower()))
        throw DomainError("phi: p = " + std::to_string(p) + " is not above p_lower");
    return std::visit(
        [p](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, NoFragmentation>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, BinaryUniform>) {
                return f.rate * p / (p + 2.0);
            } else if constexpr (std::is_same_v<T, BinaryPoint>) {
                const double s = f.split;
                return f.rate * (1.0 - std::pow(s, 1.0 + p) - std::pow(1.0 - s, 1.0 + p));
            } else {
                const double a = f.shape;
                // 2·E[B^{1+p}] for B ~ Beta(a, a) covers both fragments.
                const double ratio = boost::math::beta(a + 1.0 + p, a) / boost::math::beta(a, a);
                return f.rate * (1.0 - 2.0 * ratio);
            }
        },
        model.family());
}

/// Φ′(0+) = ∫ Σ s_i log(1/s_i) ν(ds), the mean jump rate of ξ.
inline double phi_prime0(const DislocationModel& model) {
    return std::visit(
        [](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, NoFragmentation>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, BinaryUniform>) {
                return 0.5 * f.rate;
            } else if constexpr (std::is_same_v<T, BinaryPoint>) {
                const double s = f.split;
                return f.rate * (-s * std::log(s) - (1.0 - s) * std::log1p(-s));
            } else {
                const double a = f.shape;
                return f.rate * (boost::math::digamma(2.0 * a + 1.0) - boost::math::digamma(a + 1.0));
            }
        },
        model.family());
}

/// ψ(u) = θu − Φ(u), the Laplace exponent of Y = ξ − θt.
inline double psi(double theta, const DislocationModel& model, double u) {
    if (!(u > model.p_lower()))
        throw DomainError("psi: u = " + std::to_string(u) + " is not above p_lower");
    return theta * u - phi(model, u);
}

inline constexpr double kKappaTolerance = 1e-12;

/// Unique positive root of ψ(u) = λ, by bisection on [0, (λ + ρ)/θ].
/// The bracket is valid because Φ ≤ ρ for a finite conservative ν.
inline double kappa_root(double theta, const DislocationModel& model, double lambda) {
    if (!(theta > 0.0)) throw InvalidModel("kappa: theta must be positive");
    if (!(lambda >= 0.0)) throw DomainError("kappa: lambda must be nonnegative");
    if (lambda == 0.0) return 0.0;
    double lo = 0.0;
    double hi = (lambda + model.rate()) / theta;
    if (psi(theta, model, hi) < lambda)
        throw AssumptionViolation({"kappa bracket failure: psi((lambda+rho)/theta) < lambda"});
    for (int it = 0; it < 400 && hi - lo > kKappaTolerance; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (psi(theta, model, mid) < lambda) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Problem constants and the quantities derived from them.
struct ModelParams {
    double gamma = 1.0;
    double theta = 1.0;
    double q = 1.0;
    double c = 1.0;
    double lambda = 2.0;  ///< discount rate of the reduced problem, q + θγ
    double kappa = 0.0;   ///< root of ψ(u) = λ
    double p_lower = 0.0;

    /// κ/γ, the moment order appearing in f(b) and Ṽ.
    double order() const noexcept { return kappa / gamma; }

    /// Copy with a different starting premium c. κ and λ do not depend on c.
    ModelParams with_start(double new_c) const {
        if (!(new_c > 0.0)) throw InvalidModel("c must be positive");
        ModelParams p = *this;
        p.c = new_c;
        return p;
    }

    /// Copy with an arbitrary discount λ > 0 (q is reset to λ − θγ).
    /// Only first-passage Laplace checks accept λ ≠ q + θγ.
    ModelParams with_discount(const DislocationModel& model, double new_lambda) const {
        if (!(new_lambda > 0.0)) throw DomainError("lambda must be positive");
        ModelParams p = *this;
        p.lambda = new_lambda;
        p.q = new_lambda - theta * gamma;
        p.kappa = kappa_root(theta, model, new_lambda);
        return p;
    }
};

/// Every violated assumption for the given constants; empty when all hold.
/// Basic validity of the numbers (γ, θ, c > 0, q ≥ 0) is reported here too.
inline std::vector<std::string> assumption_violations(const DislocationModel& model, double gamma, double theta,
                                                      double q, double c, bool allow_q_zero = false) {
    std::vector<std::string> out;
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0 && std::isfinite(v))) out.push_back(std::string(name) + " must be positive and finite");
    };
    positive(gamma, "gamma");
    positive(theta, "theta");
    positive(c, "c");
    if (!(q >= 0.0 && std::isfinite(q))) out.push_back("q must be nonnegative and finite");
    else if (q == 0.0 && !allow_q_zero) out.push_back("q > 0 required (q = 0 needs allow_q_zero)");
    const double d0 = phi_prime0(model);
    if (!std::isfinite(d0)) out.push_back("A1: Phi'(0+) must be finite");
    if (std::isfinite(theta) && !(theta > d0))
        out.push_back("A2: theta > Phi'(0+) fails (theta = " + std::to_string(theta) +
                      ", Phi'(0+) = " + std::to_string(d0) + ")");
    if (out.empty()) {
        const double k = kappa_root(theta, model, q + theta * gamma);
        if (!(k > gamma))
            out.push_back("kappa(lambda) > gamma fails (kappa = " + std::to_string(k) +
                          ", gamma = " + std::to_string(gamma) + ")");
    }
    return out;
}

/// Validate and derive λ = q + θγ and κ(λ). Throws AssumptionViolation
/// listing every failure.
inline ModelParams make_params(const DislocationModel& model, double gamma, double theta, double q, double c,
                               bool allow_q_zero = false) {
    auto bad = assumption_violations(model, gamma, theta, q, c, allow_q_zero);
    if (!bad.empty()) throw AssumptionViolation(std::move(bad));
    ModelParams p;
    p.gamma = gamma;
    p.theta = theta;
    p.q = q;
    p.c = c;
    p.lambda = q + theta * gamma;
    p.kappa = kappa_root(theta, model, p.lambda);
    p.p_lower = model.p_lower();
    return p;
}

inline double psi(const ModelParams& params, const DislocationModel& model, double u) {
    return psi(params.theta, model, u);
}

inline double kappa(const ModelParams& params, const DislocationModel& model, double lambda) {
    return kappa_root(params.theta, model, lambda);
}

/// Law of Y under the Esscher measure P^κ: drift −θ, jumps at rate ρ − Φ(κ)
/// with law e^{−κx}·m(dx)/(ρ − Φ(κ)). κ = 0 is the untilted law.
struct TiltedDynamics {
    DislocationModel model = DislocationModel::none();
    double kappa = 0.0;
    double jump_rate = 0.0;
    double drift = 0.0;
    /// Expected acceptance of the rejection sampler, (ρ − Φ(κ))/ρ.
    double acceptance = 1.0;
};

inline TiltedDynamics tilt_at(const DislocationModel& model, double theta, double kappa_value) {
    TiltedDynamics d;
    d.model = model;
    d.kappa = kappa_value;
    d.drift = -theta;
    const double rho = model.rate();
    d.jump_rate = model.degenerate() ? 0.0 : rho - phi(model, kappa_value);
    d.acceptance = rho > 0.0 ? d.jump_rate / rho : 1.0;
    return d;
}

inline TiltedDynamics untilted(const DislocationModel& model, double theta) { return tilt_at(model, theta, 0.0); }

/// Dynamics under P^{κ(λ)}.
inline TiltedDynamics tilt(const DislocationModel& model, const ModelParams& params, double lambda) {
    const double k = lambda == params.lambda ? params.kappa : kappa(params, model, lambda);
    return tilt_at(model, params.theta, k);
}

}  // namespace fragstop
