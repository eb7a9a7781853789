#pragma once
#include <functional>
#include <utility>
#include <vector>

#include "vfg/exp_family.hpp"

/** Verification oracles: quadrature integrators and brute-force minimizers.
 *
 * Nothing in here calls into factor_rules, bfe, fixed_point or engine; the
 * objectives below are written out again from the densities so the oracle
 * stays an independent check.
 */
namespace vfg::oracle {

enum class QuadKind { GaussHermite, GaussLaguerre, Trapezoid, DoubleExponential };

struct QuadratureSpec {
    QuadKind kind = QuadKind::GaussHermite;
    int order = 64;
    // Trapezoid only: bounds in the belief's coordinate (z for Gaussians, log gamma for Gammas).
    double lo = 0.0;
    double hi = 0.0;
    int points = 0;

    static QuadratureSpec hermite(int order) { return {QuadKind::GaussHermite, order}; }
    static QuadratureSpec laguerre(int order) { return {QuadKind::GaussLaguerre, order}; }
    static QuadratureSpec trapezoid(double lo, double hi, int points) {
        return {QuadKind::Trapezoid, 8, lo, hi, points};
    }
    static QuadratureSpec double_exponential() { return {QuadKind::DoubleExponential, 8}; }
};

struct Rule {
    std::vector<double> x;
    std::vector<double> w;
};

/// Gauss-Hermite nodes/weights for weight e^{-x^2} (Golub-Welsch).
Rule gauss_hermite(int n);
/// Generalized Gauss-Laguerre nodes/weights for weight x^a e^{-x} (Golub-Welsch).
Rule gauss_laguerre(int n, double a);

using ScalarFn = std::function<double(double)>;
using VectorFn = std::function<double(const Vec&)>;

/// E_b[f] for a univariate belief (Gaussian, Gamma or point mass).
double expect(const ScalarFn& f, const Belief& b, const QuadratureSpec& spec);

/// Weighted nodes representing a belief: sum_k w_k f(x_k) ~ E_b[f].
std::vector<std::pair<Vec, double>> nodes(const Belief& b, int order);

/// Tensor-product expectation over independent beliefs; f receives one vector per belief.
double expect_product(const std::function<double(const std::vector<Vec>&)>& f,
                      const std::vector<Belief>& beliefs, int order);

/// One-dimensional integral of f over [lo, hi] (adaptive Gauss-Kronrod).
double integrate(const ScalarFn& f, double lo, double hi);
/// One-dimensional integral of f over [lo, +inf) (exp-sinh).
double integrate_half_line(const ScalarFn& f, double lo);

struct GridSpec {
    double x_lo, x_hi;  // first coordinate
    double y_lo, y_hi;  // second coordinate
    int n = 101;
    double zoom = 10.0;  // refinement window is the coarse window shrunk by this factor

    static GridSpec gaussian_default() { return {-5.0, 5.0, -6.0, 3.0}; }
    static GridSpec gamma_default() { return {-4.0, 4.0, -4.0, 4.0}; }
};

struct EdgeMinimum {
    // Gaussian edge: (m, v). Gamma edge: (alpha, beta).
    double p1 = 0.0;
    double p2 = 0.0;
    double objective = 0.0;
    // Grid coordinates of the minimizer: (m, log v) or (log alpha, log beta).
    double g1 = 0.0;
    double g2 = 0.0;
    double coarse_step1 = 0.0;
    double coarse_step2 = 0.0;
};

/// Restricted local free energy of a Gaussian q(z) = N(m, v) by quadrature.
double gaussian_edge_objective(double m, double v, const GaussianBelief& conj, const LogGammaMessage& lg);
/// Restricted local free energy of a Gamma q(gamma) = G(alpha, beta) by quadrature.
double gamma_edge_objective(double alpha, double beta, const GammaBelief& far, const LogNormalMessage& ln);

/// Grid search over (m, log v), refined once around the argmin.
EdgeMinimum brute_force_edge_min(const std::pair<GaussianBelief, LogGammaMessage>& msgs,
                                 const GridSpec& grid = GridSpec::gaussian_default(), bool parallel = true);
/// Grid search over (log alpha, log beta), refined once around the argmin.
EdgeMinimum brute_force_edge_min(const std::pair<GammaBelief, LogNormalMessage>& msgs,
                                 const GridSpec& grid = GridSpec::gamma_default(), bool parallel = true);

/// Central finite-difference gradient and Hessian helpers.
Vec fd_gradient(const VectorFn& f, const Vec& x, double h);
Mat fd_hessian(const VectorFn& f, const Vec& x, double h);

}  // namespace vfg::oracle
