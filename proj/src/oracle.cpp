#include "vfg/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vfg/grid_kernels.hpp"
#include "vfg/overloaded.hpp"

namespace vfg::oracle {

namespace {

constexpr double kPi = std::numbers::pi;

Rule golub_welsch(const Vec& diag, const Vec& offdiag, double mu0) {
    Eigen::SelfAdjointEigenSolver<Mat> es;
    es.computeFromTridiagonal(diag, offdiag, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw std::runtime_error("Golub-Welsch eigensolve failed");
    Rule r;
    const int n = static_cast<int>(diag.size());
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        r.x[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        r.w[i] = mu0 * v0 * v0;
    }
    return r;
}

double check_finite(double v) {
    if (!std::isfinite(v)) throw std::domain_error("oracle: non-finite integrand sample");
    return v;
}

double gaussian_log_pdf(double z, double m, double v) {
    return -0.5 * std::log(2.0 * kPi * v) - 0.5 * (z - m) * (z - m) / v;
}

double gamma_log_pdf(double g, double alpha, double beta) {
    double lp = (alpha - 1.0) * std::log(g) - beta * g;
    if (beta > 0.0) lp += alpha * std::log(beta) - std::lgamma(alpha);
    return lp;
}

// E over Gamma(alpha, beta) by exp-sinh on t = beta * gamma.
double gamma_expect_de(const ScalarFn& f, double alpha, double beta) {
    boost::math::quadrature::exp_sinh<double> integrator;
    const double lg = std::lgamma(alpha);
    auto integrand = [&](double t) {
        if (!(t > 0.0)) return 0.0;
        const double logw = (alpha - 1.0) * std::log(t) - t - lg;
        if (logw < -745.0) return 0.0;
        return std::exp(logw) * f(t / beta);
    };
    return integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-14);
}

}  // namespace

Rule gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: order must be positive");
    Vec d = Vec::Zero(n), e = Vec::Zero(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) e(k - 1) = std::sqrt(k / 2.0);
    return golub_welsch(d, e, std::sqrt(kPi));
}

Rule gauss_laguerre(int n, double a) {
    if (n < 1) throw std::invalid_argument("gauss_laguerre: order must be positive");
    if (!(a > -1.0)) throw std::invalid_argument("gauss_laguerre: need a > -1");
    Vec d(n), e(std::max(n - 1, 0));
    for (int k = 0; k < n; ++k) d(k) = 2.0 * k + 1.0 + a;
    for (int k = 1; k < n; ++k) e(k - 1) = std::sqrt(k * (k + a));
    return golub_welsch(d, e, std::tgamma(a + 1.0));
}

double expect(const ScalarFn& f, const Belief& b, const QuadratureSpec& spec) {
    if (spec.order < 8) throw std::invalid_argument("QuadratureSpec: order must be >= 8");
    return std::visit(
        overloaded{
            [&](const PointMass& p) { return check_finite(f(p.as_scalar())); },
            [&](const MvGaussianBelief&) -> double {
                throw std::invalid_argument("expect: use expect_product for multivariate beliefs");
            },
            [&](const GaussianBelief& g) -> double {
                const double m = g.mean(), v = g.var();
                switch (spec.kind) {
                    case QuadKind::GaussHermite: {
                        Rule r = gauss_hermite(spec.order);
                        double s = 0.0;
                        for (size_t i = 0; i < r.x.size(); ++i)
                            s += r.w[i] * check_finite(f(m + std::sqrt(2.0 * v) * r.x[i]));
                        return s / std::sqrt(kPi);
                    }
                    case QuadKind::Trapezoid: {
                        if (spec.points < 2 || !(spec.hi > spec.lo))
                            throw std::invalid_argument("trapezoid: bad grid");
                        const double h = (spec.hi - spec.lo) / (spec.points - 1);
                        double s = 0.0;
                        for (int i = 0; i < spec.points; ++i) {
                            const double z = spec.lo + i * h;
                            const double wgt = (i == 0 || i == spec.points - 1) ? 0.5 : 1.0;
                            s += wgt * std::exp(gaussian_log_pdf(z, m, v)) * check_finite(f(z));
                        }
                        return s * h;
                    }
                    default:
                        return integrate([&](double z) { return std::exp(gaussian_log_pdf(z, m, v)) * f(z); },
                                         m - 40.0 * std::sqrt(v), m + 40.0 * std::sqrt(v));
                }
            },
            [&](const GammaBelief& g) -> double {
                const double a = g.alpha, bt = g.beta;
                switch (spec.kind) {
                    case QuadKind::GaussLaguerre: {
                        Rule r = gauss_laguerre(spec.order, a - 1.0);
                        double s = 0.0;
                        for (size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * check_finite(f(r.x[i] / bt));
                        return s / std::tgamma(a);
                    }
                    case QuadKind::Trapezoid: {
                        if (spec.points < 2 || !(spec.hi > spec.lo))
                            throw std::invalid_argument("trapezoid: bad grid");
                        const double h = (spec.hi - spec.lo) / (spec.points - 1);
                        double s = 0.0;
                        for (int i = 0; i < spec.points; ++i) {
                            const double u = spec.lo + i * h;
                            const double wgt = (i == 0 || i == spec.points - 1) ? 0.5 : 1.0;
                            const double lp = a * std::log(bt) - std::lgamma(a) + a * u - bt * std::exp(u);
                            s += wgt * std::exp(lp) * check_finite(f(std::exp(u)));
                        }
                        return s * h;
                    }
                    default:
                        return gamma_expect_de(f, a, bt);
                }
            }},
        b);
}

std::vector<std::pair<Vec, double>> nodes(const Belief& b, int order) {
    std::vector<std::pair<Vec, double>> out;
    std::visit(overloaded{[&](const PointMass& p) { out.emplace_back(p.value, 1.0); },
                          [&](const GaussianBelief& g) {
                              Rule r = gauss_hermite(order);
                              for (size_t i = 0; i < r.x.size(); ++i)
                                  out.emplace_back(Vec::Constant(1, g.mean() + std::sqrt(2.0 * g.var()) * r.x[i]),
                                                   r.w[i] / std::sqrt(kPi));
                          },
                          [&](const GammaBelief& g) {
                              Rule r = gauss_laguerre(order, g.alpha - 1.0);
                              const double norm = std::tgamma(g.alpha);
                              for (size_t i = 0; i < r.x.size(); ++i)
                                  out.emplace_back(Vec::Constant(1, r.x[i] / g.beta), r.w[i] / norm);
                          },
                          [&](const MvGaussianBelief& g) {
                              const int d = g.dim();
                              Rule r = gauss_hermite(order);
                              Mat L = Eigen::LLT<Mat>(g.cov()).matrixL();
                              Vec mu = g.mean();
                              std::vector<int> idx(d, 0);
                              while (true) {
                                  Vec u(d);
                                  double w = 1.0;
                                  for (int k = 0; k < d; ++k) {
                                      u(k) = std::sqrt(2.0) * r.x[idx[k]];
                                      w *= r.w[idx[k]] / std::sqrt(kPi);
                                  }
                                  out.emplace_back(mu + L * u, w);
                                  int k = 0;
                                  while (k < d && ++idx[k] == order) idx[k++] = 0;
                                  if (k == d) break;
                              }
                          }},
               b);
    return out;
}

double expect_product(const std::function<double(const std::vector<Vec>&)>& f,
                      const std::vector<Belief>& beliefs, int order) {
    std::vector<std::vector<std::pair<Vec, double>>> all;
    for (const auto& b : beliefs) all.push_back(nodes(b, order));
    std::vector<size_t> idx(all.size(), 0);
    std::vector<Vec> point(all.size());
    double s = 0.0;
    while (true) {
        double w = 1.0;
        for (size_t k = 0; k < all.size(); ++k) {
            point[k] = all[k][idx[k]].first;
            w *= all[k][idx[k]].second;
        }
        s += w * check_finite(f(point));
        size_t k = 0;
        while (k < all.size() && ++idx[k] == all[k].size()) idx[k++] = 0;
        if (k == all.size()) break;
    }
    return s;
}

double integrate(const ScalarFn& f, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-14);
}

double integrate_half_line(const ScalarFn& f, double lo) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate(f, lo, std::numeric_limits<double>::infinity(), 1e-14);
}

// ------------------------------------------------------- edge objectives

double gaussian_edge_objective(double m, double v, const GaussianBelief& conj, const LogGammaMessage& lg) {
    static const Rule r = gauss_hermite(64);
    const double cm = conj.mean(), cv = conj.var();
    double s = 0.0;
    for (size_t i = 0; i < r.x.size(); ++i) {
        const double z = m + std::sqrt(2.0 * v) * r.x[i];
        double integrand = gaussian_log_pdf(z, m, v) - gaussian_log_pdf(z, cm, cv);
        if (!lg.is_flat())
            integrand -= lg.b * z - std::exp(z) / lg.a - lg.b * std::log(lg.a) - std::lgamma(lg.b);
        s += r.w[i] * integrand;
    }
    return check_finite(s / std::sqrt(kPi));
}

double gamma_edge_objective(double alpha, double beta, const GammaBelief& far, const LogNormalMessage& ln) {
    auto integrand = [&](double g) {
        const double lg = std::log(g);
        const double log_ln = -0.5 * (lg - ln.m) * (lg - ln.m) / ln.s2 - lg - 0.5 * std::log(2.0 * kPi * ln.s2);
        return gamma_log_pdf(g, alpha, beta) - gamma_log_pdf(g, far.alpha, far.beta) - log_ln;
    };
    return check_finite(gamma_expect_de(integrand, alpha, beta));
}

// --------------------------------------------------------- grid search

namespace {

struct Grid2 {
    std::vector<double> xs, ys;
};

EdgeMinimum grid_min(const kernels::GridFn& f, const GridSpec& g, bool parallel) {
    if (g.n < 3) throw std::invalid_argument("GridSpec: need at least 3 points per axis");
    auto safe = [&](double x, double y) {
        try {
            double v = f(x, y);
            return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    auto argmin = [&](const Grid2& grid, const std::vector<double>& vals) {
        size_t best = 0;
        for (size_t k = 1; k < vals.size(); ++k)
            if (vals[k] < vals[best]) best = k;
        if (!std::isfinite(vals[best])) throw std::domain_error("brute_force_edge_min: objective non-finite everywhere");
        return std::pair<size_t, size_t>{best / grid.ys.size(), best % grid.ys.size()};
    };

    Grid2 coarse{kernels::linspace(g.x_lo, g.x_hi, g.n), kernels::linspace(g.y_lo, g.y_hi, g.n)};
    auto cv = kernels::evaluate_grid(safe, coarse.xs, coarse.ys, parallel);
    auto [ci, cj] = argmin(coarse, cv);

    const double hx = (g.x_hi - g.x_lo) / (g.n - 1), hy = (g.y_hi - g.y_lo) / (g.n - 1);
    const double wx = 0.5 * (g.x_hi - g.x_lo) / g.zoom, wy = 0.5 * (g.y_hi - g.y_lo) / g.zoom;
    const double x0 = coarse.xs[ci], y0 = coarse.ys[cj];
    Grid2 fine{kernels::linspace(x0 - wx, x0 + wx, g.n), kernels::linspace(y0 - wy, y0 + wy, g.n)};
    auto fv = kernels::evaluate_grid(safe, fine.xs, fine.ys, parallel);
    auto [fi, fj] = argmin(fine, fv);

    EdgeMinimum out;
    out.g1 = fine.xs[fi];
    out.g2 = fine.ys[fj];
    out.objective = fv[fi * fine.ys.size() + fj];
    out.coarse_step1 = hx;
    out.coarse_step2 = hy;

    // Quadratic fit on the 3x3 neighbourhood for a sub-cell estimate.
    if (fi > 0 && fj > 0 && fi + 1 < fine.xs.size() && fj + 1 < fine.ys.size()) {
        const double dx = fine.xs[1] - fine.xs[0], dy = fine.ys[1] - fine.ys[0];
        Eigen::Matrix<double, 9, 6> A;
        Eigen::Matrix<double, 9, 1> rhs;
        int r = 0;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b, ++r) {
                A.row(r) << 1.0, a, b, 0.5 * a * a, a * b, 0.5 * b * b;
                rhs(r) = fv[(fi + a) * fine.ys.size() + (fj + b)];
            }
        Eigen::Matrix<double, 6, 1> c = A.colPivHouseholderQr().solve(rhs);
        Eigen::Matrix2d H;
        H << c(3), c(4), c(4), c(5);
        Eigen::Vector2d grad(c(1), c(2));
        Eigen::LLT<Eigen::Matrix2d> llt(H);
        if (llt.info() == Eigen::Success) {
            Eigen::Vector2d step = -llt.solve(grad);
            if (std::abs(step(0)) <= 1.0 && std::abs(step(1)) <= 1.0) {
                out.g1 += step(0) * dx;
                out.g2 += step(1) * dy;
                const double fitted = f(out.g1, out.g2);
                if (std::isfinite(fitted) && fitted <= out.objective + 1e-12) out.objective = fitted;
                else {
                    out.g1 = fine.xs[fi];
                    out.g2 = fine.ys[fj];
                }
            }
        }
    }
    return out;
}

}  // namespace

EdgeMinimum brute_force_edge_min(const std::pair<GaussianBelief, LogGammaMessage>& msgs, const GridSpec& grid,
                                 bool parallel) {
    const auto& [conj, lg] = msgs;
    auto f = [&](double m, double logv) { return gaussian_edge_objective(m, std::exp(logv), conj, lg); };
    EdgeMinimum e = grid_min(f, grid, parallel);
    e.p1 = e.g1;
    e.p2 = std::exp(e.g2);
    return e;
}

EdgeMinimum brute_force_edge_min(const std::pair<GammaBelief, LogNormalMessage>& msgs, const GridSpec& grid,
                                 bool parallel) {
    const auto& [far, ln] = msgs;
    auto f = [&](double la, double lb) { return gamma_edge_objective(std::exp(la), std::exp(lb), far, ln); };
    EdgeMinimum e = grid_min(f, grid, parallel);
    e.p1 = std::exp(e.g1);
    e.p2 = std::exp(e.g2);
    return e;
}

// ----------------------------------------------------- finite differences

Vec fd_gradient(const VectorFn& f, const Vec& x, double h) {
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        g(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

Mat fd_hessian(const VectorFn& f, const Vec& x, double h) {
    const int n = static_cast<int>(x.size());
    Mat H(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Vec pp = x, pm = x, mp = x, mm = x;
            pp(i) += h; pp(j) += h;
            pm(i) += h; pm(j) -= h;
            mp(i) -= h; mp(j) += h;
            mm(i) -= h; mm(j) -= h;
            H(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
        }
    return H;
}

}  // namespace vfg::oracle
