#include <gtest/gtest.h>

#include <cmath>

#include "vfg/oracle.hpp"

using namespace vfg;
using namespace vfg::oracle;

TEST(Quadrature, HermiteAndLaguerreRules) {
    Rule h = gauss_hermite(20);
    double s = 0.0, x2 = 0.0;
    for (size_t k = 0; k < h.x.size(); ++k) {
        s += h.w[k];
        x2 += h.w[k] * h.x[k] * h.x[k];
    }
    EXPECT_NEAR(s, std::sqrt(M_PI), 1e-13);
    EXPECT_NEAR(x2, std::sqrt(M_PI) / 2.0, 1e-13);
    Rule l = gauss_laguerre(20, 1.5);
    double ls = 0.0, lx = 0.0;
    for (size_t k = 0; k < l.x.size(); ++k) {
        ls += l.w[k];
        lx += l.w[k] * l.x[k];
    }
    EXPECT_NEAR(ls, std::tgamma(2.5), 1e-12);
    EXPECT_NEAR(lx, std::tgamma(3.5), 1e-11);
}

TEST(Expect, Normalization) {
    auto one = [](double) { return 1.0; };
    EXPECT_NEAR(expect(one, GaussianBelief::from_moments(3.0, 0.2), QuadratureSpec::hermite(16)), 1.0, 1e-14);
    EXPECT_NEAR(expect(one, GammaBelief{2.5, 0.7}, QuadratureSpec::laguerre(16)), 1.0, 1e-13);
    EXPECT_NEAR(expect(one, GammaBelief{2.5, 0.7}, QuadratureSpec::double_exponential()), 1.0, 1e-10);
    EXPECT_EQ(expect([](double x) { return x * x; }, PointMass::scalar(3.0), QuadratureSpec::hermite(16)), 9.0);
}

TEST(Expect, GaussianMgf) {
    EXPECT_NEAR(expect([](double z) { return std::exp(z); }, GaussianBelief::from_moments(0, 1), QuadratureSpec::hermite(64)),
                std::exp(0.5), 1e-13);
}

TEST(Expect, GammaLogMoment) {
    const double want = (1.0 - 0.57721566490153286061) - std::log(3.0);
    EXPECT_NEAR(expect([](double x) { return std::log(x); }, GammaBelief{2, 3}, QuadratureSpec::double_exponential()), want, 1e-10);
    // Gauss-Laguerre converges slowly on log x; it still lands near.
    EXPECT_NEAR(expect([](double x) { return std::log(x); }, GammaBelief{2, 3}, QuadratureSpec::laguerre(64)), want, 5e-4);
}

TEST(Expect, OrderConvergence) {
    const GaussianBelief g = GaussianBelief::from_moments(0.4, 0.9);
    for (auto f : {std::function<double(double)>([](double z) { return std::exp(z); }),
                   std::function<double(double)>([](double z) { return std::cos(z) * z * z; }),
                   std::function<double(double)>([](double z) { return std::exp(-std::exp(z)); })}) {
        EXPECT_NEAR(expect(f, g, QuadratureSpec::hermite(64)), expect(f, g, QuadratureSpec::hermite(96)), 1e-9);
    }
    const GammaBelief q{3.0, 2.0};
    for (auto f : {std::function<double(double)>([](double x) { return x * x * x; }),
                   std::function<double(double)>([](double x) { return std::exp(-x); })}) {
        EXPECT_NEAR(expect(f, q, QuadratureSpec::laguerre(64)), expect(f, q, QuadratureSpec::laguerre(96)), 1e-9);
    }
}

TEST(Expect, TrapezoidAgrees) {
    const GaussianBelief g = GaussianBelief::from_moments(0.0, 1.0);
    EXPECT_NEAR(expect([](double z) { return z * z; }, g, QuadratureSpec::trapezoid(-12, 12, 4001)), 1.0, 1e-9);
}

TEST(Expect, NonFiniteIntegrandThrows) {
    EXPECT_THROW(expect([](double) { return std::nan(""); }, GaussianBelief::from_moments(0, 1), QuadratureSpec::hermite(16)),
                 std::domain_error);
}

TEST(ExpectProduct, IndependentProduct) {
    const GaussianBelief a = GaussianBelief::from_moments(1.0, 0.5);
    const GammaBelief b{3.0, 2.0};
    const double v = expect_product([](const std::vector<Vec>& s) { return s[0](0) * s[1](0); }, {a, b}, 24);
    EXPECT_NEAR(v, 1.0 * 1.5, 1e-10);
}

TEST(Integrate, FiniteAndHalfLine) {
    EXPECT_NEAR(integrate([](double x) { return std::sin(x); }, 0.0, M_PI), 2.0, 1e-12);
    EXPECT_NEAR(integrate_half_line([](double x) { return std::exp(-x); }, 0.0), 1.0, 1e-10);
    EXPECT_NEAR(integrate_half_line([](double x) { return 1.0 / (1.0 + x * x); }, 0.0), M_PI / 2.0, 1e-8);
}

TEST(FiniteDifferences, Polynomial) {
    auto f = [](const Vec& x) { return x(0) * x(0) * x(1) + 3.0 * x(1); };
    Vec x(2);
    x << 1.5, -2.0;
    Vec g = fd_gradient(f, x, 1e-5);
    EXPECT_NEAR(g(0), 2.0 * 1.5 * -2.0, 1e-8);
    EXPECT_NEAR(g(1), 1.5 * 1.5 + 3.0, 1e-8);
    Mat h = fd_hessian(f, x, 1e-4);
    EXPECT_NEAR(h(0, 0), -4.0, 1e-5);
    EXPECT_NEAR(h(0, 1), 3.0, 1e-5);
    EXPECT_NEAR(h(1, 1), 0.0, 1e-5);
}

TEST(BruteForce, FlatMessageLandsOnConjugate) {
    const GaussianBelief conj = GaussianBelief::from_moments(0.8, 0.6);
    const GridSpec grid = GridSpec::gaussian_default();
    EdgeMinimum e = brute_force_edge_min({conj, LogGammaMessage::flat()}, grid);
    EXPECT_LT(std::abs(e.g1 - 0.8), e.coarse_step1);
    EXPECT_LT(std::abs(e.g2 - std::log(0.6)), e.coarse_step2);
}

TEST(BruteForce, ShrunkGridIsSelfConsistent) {
    const GaussianBelief conj = GaussianBelief::from_moments(0.0, 1.0);
    const LogGammaMessage lg = LogGammaMessage::make(1.0, 1.0);
    const GridSpec grid = GridSpec::gaussian_default();
    EdgeMinimum a = brute_force_edge_min({conj, lg}, grid);
    GridSpec shrunk{a.g1 - (grid.x_hi - grid.x_lo) / 4.0, a.g1 + (grid.x_hi - grid.x_lo) / 4.0,
                    a.g2 - (grid.y_hi - grid.y_lo) / 4.0, a.g2 + (grid.y_hi - grid.y_lo) / 4.0, grid.n, grid.zoom};
    EdgeMinimum b = brute_force_edge_min({conj, lg}, shrunk);
    EXPECT_LT(std::abs(a.g1 - b.g1), a.coarse_step1);
    EXPECT_LT(std::abs(a.g2 - b.g2), a.coarse_step2);
}

TEST(BruteForce, DeterministicAndParallelAgnostic) {
    const GaussianBelief conj = GaussianBelief::from_moments(1.0, 0.5);
    const LogGammaMessage lg = LogGammaMessage::make(0.5, 3.0);
    EdgeMinimum a = brute_force_edge_min({conj, lg}, GridSpec::gaussian_default(), true);
    EdgeMinimum b = brute_force_edge_min({conj, lg}, GridSpec::gaussian_default(), false);
    EXPECT_EQ(a.p1, b.p1);
    EXPECT_EQ(a.p2, b.p2);
    EXPECT_EQ(a.objective, b.objective);
}

TEST(EdgeObjectives, GaussianAgainstDirectQuadrature) {
    // F(q) = -H[q] - E log conj - E log lg, written out with a trapezoid sum.
    const GaussianBelief conj = GaussianBelief::from_moments(0.0, 1.0);
    const LogGammaMessage lg = LogGammaMessage::make(2.0, 1.5);
    const double m = 0.3, v = 0.4;
    const double h = 0.5 * std::log(2.0 * M_PI * M_E * v);
    auto integrand = [&](double z) {
        const double q = std::exp(-(z - m) * (z - m) / (2 * v)) / std::sqrt(2 * M_PI * v);
        const double lc = -0.5 * std::log(2 * M_PI) - 0.5 * z * z;
        return q * (lc + lg.log_density(z));
    };
    const double want = -h - integrate(integrand, m - 15.0, m + 15.0);
    EXPECT_NEAR(gaussian_edge_objective(m, v, conj, lg), want, 1e-8);
}
