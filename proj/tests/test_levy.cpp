#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fragstop/levy.hpp"
#include "fragstop/pathsim.hpp"
#include "fragstop/rng.hpp"
#include "fragstop/stats.hpp"

using namespace fragstop;

namespace {

// composite Simpson on [a, b]
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

std::vector<double> p_grid() {
    std::vector<double> g;
    for (double p = 0.1; p <= 5.0 + 1e-9; p += 0.1) g.push_back(p);
    return g;
}

}  // namespace

TEST(Phi, UniformClosedForm) {
    for (double rho : {0.5, 1.0, 3.0}) {
        const auto m = DislocationModel::uniform(rho);
        for (double p : p_grid()) EXPECT_NEAR(phi(m, p), rho * p / (p + 2.0), 1e-12) << p;
    }
    EXPECT_NEAR(phi(DislocationModel::uniform(1.0), 1.0), 1.0 / 3.0, 1e-15);
}

TEST(Phi, PointHalfClosedForm) {
    for (double rho : {1.0, 2.0}) {
        const auto m = DislocationModel::point(rho, 0.5);
        for (double p : p_grid()) EXPECT_NEAR(phi(m, p), rho * (1.0 - std::pow(2.0, -p)), 1e-12) << p;
    }
    EXPECT_NEAR(phi(DislocationModel::point(2.0, 0.5), 1.0), 1.0, 1e-15);
}

TEST(Phi, ZeroAtZeroForConservativeModels) {
    for (const auto& m : {DislocationModel::uniform(1), DislocationModel::point(2, 0.7), DislocationModel::beta(1, 0.4),
                          DislocationModel::none()})
        EXPECT_NEAR(phi(m, 0.0), 0.0, 1e-14);
}

TEST(Phi, BetaShapeOneIsUniform) {
    const auto b = DislocationModel::beta(1.5, 1.0);
    const auto u = DislocationModel::uniform(1.5);
    for (double p : p_grid()) EXPECT_NEAR(phi(b, p), phi(u, p), 1e-12);
    EXPECT_NEAR(phi_prime0(b), phi_prime0(u), 1e-12);
}

TEST(Phi, BetaAgainstQuadrature) {
    for (double a : {0.5, 2.0, 5.0}) {
        const auto m = DislocationModel::beta(1.0, a);
        const double norm = 1.0 / std::beta(a, a);
        for (double p : {0.3, 1.0, 2.5}) {
            // s = sin²φ removes the endpoint singularities of the Beta(a, a) density
            const double direct = simpson(
                [&](double ph) {
                    const double s = std::sin(ph) * std::sin(ph);
                    const double w = 2.0 * std::pow(std::sin(ph) * std::cos(ph), 2 * a - 1);
                    return norm * w * (1 - std::pow(s, 1 + p) - std::pow(1 - s, 1 + p));
                },
                0.0, M_PI / 2);
            EXPECT_NEAR(phi(m, p), direct, 1e-10) << a << " " << p;
        }
    }
}

TEST(Phi, ConcaveIncreasing) {
    for (const auto& m : {DislocationModel::uniform(1), DislocationModel::point(1, 0.8), DislocationModel::beta(2, 3)}) {
        const auto g = p_grid();
        for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GE(phi(m, g[i]) - phi(m, g[i - 1]), 0.0);
        for (std::size_t i = 1; i + 1 < g.size(); ++i)
            EXPECT_LE(phi(m, g[i + 1]) - 2 * phi(m, g[i]) + phi(m, g[i - 1]), 1e-14);
    }
}

TEST(Phi, DomainError) {
    EXPECT_THROW(phi(DislocationModel::uniform(1), -2.0), DomainError);
    EXPECT_NO_THROW(phi(DislocationModel::uniform(1), -1.5));
    EXPECT_THROW(phi(DislocationModel::beta(1, 0.5), -1.6), DomainError);
}

TEST(PhiPrime, ClosedForms) {
    EXPECT_NEAR(phi_prime0(DislocationModel::uniform(1)), 0.5, 1e-15);
    EXPECT_NEAR(phi_prime0(DislocationModel::point(1, 0.5)), std::log(2.0), 1e-15);
    EXPECT_EQ(phi_prime0(DislocationModel::none()), 0.0);
    // numeric derivative of the closed form Φ
    for (const auto& m : {DislocationModel::point(1.3, 0.7), DislocationModel::beta(1, 2.5)}) {
        const double h = 1e-5;
        EXPECT_NEAR(phi_prime0(m), (phi(m, h) - phi(m, -h)) / (2 * h), 1e-8);
    }
}

TEST(Model, InvalidParametersRejected) {
    EXPECT_THROW(DislocationModel::uniform(0.0), InvalidModel);
    EXPECT_THROW(DislocationModel::uniform(-1.0), InvalidModel);
    EXPECT_THROW(DislocationModel::point(1.0, 1.0), InvalidModel);
    EXPECT_THROW(DislocationModel::point(1.0, 0.4), InvalidModel);
    EXPECT_THROW(DislocationModel::beta(1.0, 0.0), InvalidModel);
}

TEST(Model, SplitsLieInUpperHalf) {
    Rng g(3);
    for (const auto& m : {DislocationModel::uniform(1), DislocationModel::beta(1, 0.3), DislocationModel::beta(1, 4)})
        for (int i = 0; i < 20000; ++i) {
            const double s = m.sample_split(g);
            ASSERT_GE(s, 0.5);
            ASSERT_LT(s, 1.0);
        }
}

TEST(Psi, Values) {
    EXPECT_NEAR(psi(1.0, DislocationModel::uniform(1), 1.0), 2.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(psi(1.7, DislocationModel::none(), 3.0), 1.7 * 3.0);
    EXPECT_EQ(psi(1.0, DislocationModel::uniform(2), 0.0), 0.0);
}

TEST(Kappa, ReferenceRoot) {
    const auto m = DislocationModel::uniform(1);
    // u − u/(u+2) = 2  ⇔  u² − u − 4 = 0
    EXPECT_NEAR(kappa_root(1.0, m, 2.0), (1.0 + std::sqrt(17.0)) / 2.0, 1e-10);
    EXPECT_NEAR(kappa_root(1.0, DislocationModel::none(), 2.0), 2.0, 1e-12);
    EXPECT_EQ(kappa_root(1.0, m, 0.0), 0.0);
    EXPECT_LT(kappa_root(1.0, m, 1e-9), 1e-6);
}

TEST(Kappa, RootPropertyOnGrid) {
    for (const auto& m : {DislocationModel::uniform(1), DislocationModel::point(1, 0.5), DislocationModel::beta(1, 0.5)}) {
        double prev = 0.0;
        for (double lambda = 0.25; lambda <= 8.0; lambda *= 1.5) {
            const double k = kappa_root(1.0, m, lambda);
            EXPECT_NEAR(psi(1.0, m, k), lambda, 1e-10);
            EXPECT_GT(k, prev);
            prev = k;
        }
    }
}

TEST(Params, AssumptionsReported) {
    const auto ok = make_params(DislocationModel::uniform(1), 1, 1, 1, 0.5);
    EXPECT_DOUBLE_EQ(ok.lambda, 2.0);
    EXPECT_GT(ok.kappa, ok.gamma);
    try {
        make_params(DislocationModel::uniform(4), 1, 1, 0, -1);
        FAIL();
    } catch (const AssumptionViolation& e) {
        const auto& v = e.violations();
        EXPECT_EQ(v.size(), 3u);  // c, q, A2
        bool a2 = false;
        for (const auto& s : v) a2 = a2 || s.find("A2") != std::string::npos;
        EXPECT_TRUE(a2);
    }
    // q = 0 only behind the flag; κ > γ still holds with fragmentation
    EXPECT_THROW(make_params(DislocationModel::uniform(1), 1, 1, 0, 0.5), AssumptionViolation);
    const auto z = make_params(DislocationModel::uniform(1), 1, 1, 0, 0.5, true);
    EXPECT_GT(z.kappa, z.gamma);
}

TEST(Tilt, RatesAndLaws) {
    const auto m = DislocationModel::uniform(1);
    const double k = (1.0 + std::sqrt(17.0)) / 2.0;
    const auto d = tilt_at(m, 1.0, k);
    EXPECT_NEAR(d.jump_rate, 2.0 / (k + 2.0), 1e-12);
    EXPECT_EQ(d.drift, -1.0);
    const auto u = tilt_at(m, 1.0, 0.0);
    EXPECT_EQ(u.jump_rate, 1.0);
    const auto n = untilted(DislocationModel::none(), 2.0);
    EXPECT_EQ(n.jump_rate, 0.0);
    EXPECT_EQ(n.drift, -2.0);
}

TEST(Tilt, RateMatchesQuadratureOfTiltedMeasure) {
    // ∫e^{−κx} m(dx) = ∫ ν(ds) [s^{1+κ} + (1−s)^{1+κ}]
    for (double a : {2.0, 3.0}) {
        const auto m = DislocationModel::beta(1.0, a);
        const double k = 1.7;
        const double norm = 2.0 / std::beta(a, a);
        const double direct = simpson(
            [&](double s) {
                return norm * std::pow(s, a - 1) * std::pow(1 - s, a - 1) *
                       (std::pow(s, 1 + k) + std::pow(1 - s, 1 + k));
            },
            0.5, 1.0);
        EXPECT_NEAR(tilt_at(m, 1.0, k).jump_rate, direct, 1e-10);
    }
    const auto u = DislocationModel::uniform(1.0);
    const double direct =
        simpson([&](double s) { return 2.0 * (std::pow(s, 2.7) + std::pow(1 - s, 2.7)); }, 0.5, 1.0);
    EXPECT_NEAR(tilt_at(u, 1.0, 1.7).jump_rate, direct, 1e-10);
}

TEST(Tilt, JumpMeasureIntegralMatchesPhi) {
    // ∫(1 − e^{−px}) m(dx) = Φ(p)
    for (const auto& m : {DislocationModel::uniform(1), DislocationModel::point(2, 0.6), DislocationModel::beta(1, 0.5),
                          DislocationModel::beta(1, 3)}) {
        for (double p : {0.5, 2.0}) {
            const double v = m.integrate_jump_measure([&](double x) { return 1.0 - std::exp(-p * x); }, 1e-12);
            EXPECT_NEAR(v, phi(m, p), 1e-9);
        }
    }
}
