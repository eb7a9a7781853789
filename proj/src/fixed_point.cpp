#include "vfg/fixed_point.hpp"

#include <cfloat>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace vfg {

namespace {

constexpr double kLog2PiE = 2.8378770664093454836;
constexpr double kLog2Pi = 1.8378770664093454836;

bool gaussian_feasible(const Vec2& eta) { return std::isfinite(eta(0)) && std::isfinite(eta(1)) && eta(1) < 0.0; }
bool gamma_feasible(const Vec2& eta) {
    return std::isfinite(eta(0)) && std::isfinite(eta(1)) && eta(0) > -1.0 && eta(1) < 0.0;
}

Vec2 solve_fisher(const Mat2& f, const Vec2& g) {
    const double det = f(0, 0) * f(1, 1) - f(0, 1) * f(1, 0);
    if (!(f(0, 0) > 0.0) || !(det > 0.0) || !std::isfinite(det))
        throw DegeneracyError("natural gradient: Fisher information is not positive definite");
    Vec2 x;
    x(0) = (f(1, 1) * g(0) - f(0, 1) * g(1)) / det;
    x(1) = (f(0, 0) * g(1) - f(1, 0) * g(0)) / det;
    return x;
}

// alpha * psi'(alpha) - 1 without cancellation for large alpha.
double gamma_fisher_gap(double alpha) {
    if (alpha < 20.0) return alpha * trigamma(alpha) - 1.0;
    const double r = 1.0 / alpha, r2 = r * r;
    return r * (0.5 + r * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 / 30.0))));
}

// F^{-1} g for the Gamma Fisher in (alpha, beta) form.
Vec2 gamma_natural_gradient(const Vec2& eta, const Vec2& g) {
    const double alpha = eta(0) + 1.0, beta = -eta(1);
    const double gap = gamma_fisher_gap(alpha);
    if (!(gap > 0.0) || !std::isfinite(gap)) throw DegeneracyError("natural gradient: Gamma Fisher information is singular");
    return {(alpha * g(0) - beta * g(1)) / gap, beta * (beta * trigamma(alpha) * g(1) - g(0)) / gap};
}

// Wrap an objective so that out-of-range exponents count as infeasible points.
template <class F>
double safe_value(F&& f, const Vec2& eta) {
    try {
        double v = f(eta);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const SaturationError&) {
        return std::numeric_limits<double>::infinity();
    } catch (const DegeneracyError&) {
        return std::numeric_limits<double>::infinity();
    }
}

struct EdgeProblem {
    std::function<double(const Vec2&)> value;
    // Euclidean gradient and natural gradient F^{-1} g at eta.
    std::function<std::pair<Vec2, Vec2>(const Vec2&)> gradients;
    std::function<bool(const Vec2&)> domain;
};

FixedPointResult run_solver(const EdgeProblem& p, const Vec2& init, const SolverConfig& cfg, bool gamma_family) {
    cfg.validate();
    if (!p.domain(init)) throw DegeneracyError("fixed point: initial belief infeasible");
    auto objective = [&](const Vec2& eta) { return safe_value(p.value, eta); };
    auto feasible = [&](const Vec2& eta) { return p.domain(eta) && std::isfinite(objective(eta)); };

    Vec2 eta = init;
    double f = objective(eta);
    if (!std::isfinite(f)) throw DegeneracyError("fixed point: objective is not finite at the initial belief");

    FixedPointResult r;
    r.objective_trace.push_back(f);
    double step = cfg.initial_step;
    double gnorm = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= cfg.max_iterations; ++it) {
        const auto [grad, nat] = p.gradients(eta);
        gnorm = std::sqrt(std::max(0.0, grad.dot(nat)));
        if (gnorm <= cfg.tolerance) {
            r.converged = true;
            break;
        }
        if (it == cfg.max_iterations) break;
        StepResult s = natural_direction_step(eta, nat, grad, objective, feasible, cfg, step);
        if (s.step == 0.0) {
            r.warning = "line search stalled";
            break;
        }
        eta = s.eta;
        step = s.step;
        r.objective_trace.push_back(s.value);
        r.iterations_used = it + 1;
    }
    r.final_gradient_norm = gnorm;
    if (!r.converged && r.warning.empty()) {
        std::ostringstream os;
        os << "not converged after " << cfg.max_iterations << " iterations (gradient norm " << gnorm << ")";
        r.warning = os.str();
    }
    if (gamma_family) r.belief = GammaBelief::from_natural(eta(0), eta(1));
    else r.belief = GaussianBelief::from_natural(eta(0), eta(1));
    return r;
}

}  // namespace

void SolverConfig::validate() const {
    if (!(initial_step > 0.0) || !(max_step_norm > 0.0) || max_iterations < 1 || !(tolerance > 0.0) ||
        !(armijo_shrink > 0.0 && armijo_shrink < 1.0) || !(armijo_slope > 0.0 && armijo_slope < 1.0))
        throw std::invalid_argument("SolverConfig: all settings must be positive (shrink and slope below 1)");
}

double fisher_norm(const Mat2& fisher, const Vec2& d) { return std::sqrt(std::max(0.0, d.dot(fisher * d))); }

// ------------------------------------------------------------ objectives

namespace {

struct ZTerms {
    double value;
    double f_m;  // partial in the mean
    double f_v;  // partial in the variance
    double m, v;
};

ZTerms z_terms(const Vec2& eta, const GaussianBelief& conj, const LogGammaMessage& lg) {
    if (!gaussian_feasible(eta)) throw DegeneracyError("local_z_objective: eta2 must be negative");
    if (!(conj.eta2 < 0.0)) throw DegeneracyError("local_z_objective: conjugate message must be proper");
    const double v = -0.5 / eta(1), m = eta(0) * v;
    const double cm = conj.mean(), cv = conj.var();

    ZTerms t{-0.5 * (kLog2PiE + std::log(v)) + 0.5 * (kLog2Pi + std::log(cv)) + ((m - cm) * (m - cm) + v) / (2.0 * cv),
             (m - cm) / cv, -0.5 / v + 0.5 / cv, m, v};
    if (!lg.is_flat()) {
        t.value -= lg.b * m;
        t.f_m -= lg.b;
        if (std::isfinite(lg.a)) {
            const double e = m + 0.5 * v;
            if (e > std::log(DBL_MAX)) throw SaturationError("local_z_objective: E[e^z] overflows");
            const double mgf = std::exp(e);
            t.value += mgf / lg.a + lg.b * std::log(lg.a) + std::lgamma(lg.b);
            t.f_m += mgf / lg.a;
            t.f_v += 0.5 * mgf / lg.a;
        }
    }
    return t;
}

// F^{-1} grad_eta f equals the gradient in the mean parameters (m, m^2 + v).
Vec2 z_natural_gradient(const ZTerms& t) { return {t.f_m - 2.0 * t.m * t.f_v, t.f_v}; }

}  // namespace

ObjectiveValue local_z_objective(const Vec2& eta, const GaussianBelief& conj, const LogGammaMessage& lg) {
    const ZTerms t = z_terms(eta, conj, lg);
    const Vec2 dm(t.v, 2.0 * t.m * t.v), dv(0.0, 2.0 * t.v * t.v);
    return {t.value, t.f_m * dm + t.f_v * dv};
}

ObjectiveValue local_gamma_objective(const Vec2& eta, const GammaBelief& msg, const LogNormalMessage& ln) {
    if (!gamma_feasible(eta)) throw DegeneracyError("local_gamma_objective: need eta1 > -1 and eta2 < 0");
    if (!(msg.alpha > 0.0) || !(msg.beta >= 0.0)) throw DegeneracyError("local_gamma_objective: infeasible Gamma message");
    if (!(ln.s2 > 0.0)) throw DegeneracyError("local_gamma_objective: log-normal scale must be positive");
    const double alpha = eta(0) + 1.0, beta = -eta(1);
    const double psi = digamma(alpha), psi1 = trigamma(alpha), psi2 = tetragamma(alpha);
    const double g = psi - std::log(beta);       // E[log gamma]
    const double g2 = psi1 + g * g;              // E[log^2 gamma]
    const double gbar = alpha / beta;            // E[gamma]
    const double s2 = ln.s2;
    const double c1 = 1.0 - ln.m / s2 - (msg.alpha - 1.0);
    const double b = msg.beta;

    const double neg_h = -(alpha - std::log(beta) + std::lgamma(alpha) + (1.0 - alpha) * psi);
    double value = neg_h + g2 / (2.0 * s2) + c1 * g + b * gbar;
    value += ln.m * ln.m / (2.0 * s2) + 0.5 * (kLog2Pi + std::log(s2)) + std::lgamma(msg.alpha);
    if (b > 0.0) value -= msg.alpha * std::log(b);

    Vec2 grad;
    grad(0) = (alpha - 1.0) * psi1 - 1.0;
    grad(1) = -1.0 / beta;
    grad(0) += psi1 / s2 * (g + psi2 / (2.0 * psi1)) + c1 * psi1 + b / beta;
    grad(1) += g / (s2 * beta) + c1 / beta + b * alpha / (beta * beta);
    return {value, grad};
}

Vec2 gaussian_fixed_point_map(const Vec2& eta, const GaussianBelief& conj, const LogGammaMessage& lg) {
    return eta - z_natural_gradient(z_terms(eta, conj, lg));
}

Vec2 gamma_fixed_point_map(const Vec2& eta, const GammaBelief& msg, const LogNormalMessage& ln) {
    ObjectiveValue ov = local_gamma_objective(eta, msg, ln);
    return eta - gamma_natural_gradient(eta, ov.grad);
}

// ------------------------------------------------------------ line search

StepResult natural_direction_step(const Vec2& eta, const Vec2& nat, const Vec2& grad, const Objective2& objective,
                                  const Feasible2& feasible, const SolverConfig& cfg, double step0) {
    const double f0 = objective(eta);
    StepResult none{eta, f0, 0.0};
    const double n2 = grad.dot(nat);  // squared Fisher norm of the natural direction
    if (!(n2 > 0.0) || !std::isfinite(n2)) return none;
    Vec2 d = -nat;
    const double n = std::sqrt(n2);
    if (n > cfg.max_step_norm) d *= cfg.max_step_norm / n;
    const double slope = grad.dot(d);
    if (!(slope < 0.0)) return none;

    double t = std::min(1.0, step0 > 0.0 ? step0 : cfg.initial_step);
    constexpr double kMinStep = 1e-16;
    while (!feasible(eta + t * d)) {
        t *= cfg.armijo_shrink;
        if (t < kMinStep) return none;
    }
    auto armijo = [&](double tt, double ff) { return ff <= f0 + cfg.armijo_slope * tt * slope; };
    double f = objective(eta + t * d);
    if (armijo(t, f)) {
        while (t < 1.0) {
            const double t2 = std::min(1.0, t / cfg.armijo_shrink);
            if (!feasible(eta + t2 * d)) break;
            const double f2 = objective(eta + t2 * d);
            if (!armijo(t2, f2) || f2 > f) break;
            t = t2;
            f = f2;
        }
    } else {
        do {
            t *= cfg.armijo_shrink;
            if (t < kMinStep) return none;
            f = feasible(eta + t * d) ? objective(eta + t * d) : std::numeric_limits<double>::infinity();
        } while (!armijo(t, f));
    }
    return {eta + t * d, f, t};
}

StepResult natural_gradient_step(const Vec2& eta, const Mat2& fisher, const Vec2& grad, const Objective2& objective,
                                 const Feasible2& feasible, const SolverConfig& cfg, double step0) {
    if (grad.squaredNorm() == 0.0) return {eta, objective(eta), 0.0};
    return natural_direction_step(eta, solve_fisher(fisher, grad), grad, objective, feasible, cfg, step0);
}

// ----------------------------------------------------------------- solvers

FixedPointResult solve_gaussian_edge(const GaussianBelief& conj, const LogGammaMessage& lg, const GaussianBelief& init,
                                     const SolverConfig& cfg) {
    if (!(conj.eta2 < 0.0)) throw DegeneracyError("solve_gaussian_edge: conjugate message must be proper");
    if (!lg.is_flat() && !(lg.b > 0.0 && lg.a > 0.0)) throw DegeneracyError("solve_gaussian_edge: infeasible log-gamma message");
    if (lg.is_flat()) {
        cfg.validate();
        FixedPointResult r;
        r.belief = GaussianBelief::from_natural(conj.eta1, conj.eta2);
        r.converged = true;
        r.objective_trace = {local_z_objective(conj.natural(), conj, lg).value};
        return r;
    }
    EdgeProblem p{[&](const Vec2& e) { return z_terms(e, conj, lg).value; },
                  [&](const Vec2& e) {
                      const ZTerms t = z_terms(e, conj, lg);
                      const Vec2 dm(t.v, 2.0 * t.m * t.v), dv(0.0, 2.0 * t.v * t.v);
                      return std::make_pair(Vec2(t.f_m * dm + t.f_v * dv), z_natural_gradient(t));
                  },
                  gaussian_feasible};
    return run_solver(p, init.natural(), cfg, false);
}

FixedPointResult solve_gamma_edge(const GammaBelief& msg, const LogNormalMessage& ln, const GammaBelief& init,
                                  const SolverConfig& cfg) {
    if (!std::isfinite(ln.s2)) {
        cfg.validate();
        FixedPointResult r;
        r.belief = GammaBelief::make(msg.alpha, msg.beta);
        r.converged = true;
        return r;
    }
    if (!(msg.alpha > 0.0) || !(msg.beta >= 0.0)) throw DegeneracyError("solve_gamma_edge: infeasible Gamma message");
    if (!(ln.s2 > 0.0)) throw DegeneracyError("solve_gamma_edge: log-normal scale must be positive");
    EdgeProblem p{[&](const Vec2& e) { return local_gamma_objective(e, msg, ln).value; },
                  [&](const Vec2& e) {
                      const Vec2 g = local_gamma_objective(e, msg, ln).grad;
                      return std::make_pair(g, gamma_natural_gradient(e, g));
                  },
                  gamma_feasible};
    return run_solver(p, init.natural(), cfg, true);
}

// ------------------------------------------------------------ initializers

GaussianBelief laplace_init(const GaussianBelief& conj, const LogGammaMessage& lg) {
    if (!(conj.eta2 < 0.0)) throw DegeneracyError("laplace_init: conjugate message must be proper");
    const double cm = conj.mean(), cv = conj.var();
    if (lg.is_flat()) return conj;
    const double b = lg.b, inv_a = std::isfinite(lg.a) ? 1.0 / lg.a : 0.0;
    if (inv_a == 0.0) return GaussianBelief::from_moments(cm + b * cv, cv);
    // f'(z) = -(z - cm)/cv + b - e^z/a is decreasing; bracket its root and bisect with Newton acceleration.
    auto fp = [&](double z) { return -(z - cm) / cv + b - std::exp(z) * inv_a; };
    double hi = cm + b * cv;
    double lo = std::min(cm, std::log(b / inv_a) - 1.0);
    hi = std::min(hi, std::log(DBL_MAX) - 1.0);
    if (hi < lo) hi = lo + 1.0;
    double z = 0.5 * (lo + hi);
    for (int k = 0; k < 200; ++k) {
        const double g = fp(z);
        if (g > 0.0) lo = z;
        else hi = z;
        const double h = -1.0 / cv - std::exp(z) * inv_a;
        double zn = z - g / h;
        if (!(zn > lo && zn < hi)) zn = 0.5 * (lo + hi);
        if (std::abs(zn - z) <= 1e-13 * (1.0 + std::abs(z))) {
            z = zn;
            break;
        }
        z = zn;
    }
    const double v = 1.0 / (1.0 / cv + std::exp(z) * inv_a);
    return GaussianBelief::from_moments(z, v);
}

GammaBelief moment_init(const GammaBelief& msg, const LogNormalMessage& ln) {
    // trigamma(alpha) = s2 fixes the shape; digamma(alpha) - log(beta) = m fixes the rate.
    double alpha = 1.0 / ln.s2 + 0.5;
    for (int k = 0; k < 50; ++k) {
        const double f = trigamma(alpha) - ln.s2, fp = tetragamma(alpha);
        double next = alpha - f / fp;
        if (!(next > 0.0)) next = 0.5 * alpha;
        if (std::abs(next - alpha) <= 1e-12 * alpha) {
            alpha = next;
            break;
        }
        alpha = next;
    }
    const double log_beta = digamma(alpha) - ln.m;
    if (log_beta > std::log(DBL_MAX) || log_beta < -700.0) return GammaBelief{1.0, 1.0};
    double beta = std::exp(log_beta);
    const double a2 = alpha + msg.alpha - 1.0, b2 = beta + msg.beta;
    if (a2 > 0.0 && b2 > 0.0) return GammaBelief{a2, b2};
    return GammaBelief{alpha, beta};
}

}  // namespace vfg
