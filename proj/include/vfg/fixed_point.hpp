#pragma once
#include <functional>
#include <string>
#include <vector>

#include "vfg/exp_family.hpp"

namespace vfg {

struct SolverConfig {
    double initial_step = 1e-2;
    double max_step_norm = 0.5;
    int max_iterations = 50;
    double tolerance = 1e-6;
    double armijo_shrink = 0.5;
    double armijo_slope = 1e-4;

    void validate() const;
};

struct FixedPointResult {
    Belief belief;
    int iterations_used = 0;
    double final_gradient_norm = 0.0;  // natural-gradient norm in the Fisher metric
    std::vector<double> objective_trace;
    bool converged = false;
    std::string warning;
};

/// Value and Euclidean gradient (in natural coordinates) of a local edge objective.
struct ObjectiveValue {
    double value;
    Vec2 grad;
};

/// Restricted local free energy F_z(eta) = -H[q] - E_q log mu_conj - E_q log mu_lg with analytic gradient.
ObjectiveValue local_z_objective(const Vec2& eta, const GaussianBelief& msg_conjugate, const LogGammaMessage& msg_nonconj);
/// Restricted local free energy of a Gamma q(gamma) against a Gamma message and a log-normal message.
ObjectiveValue local_gamma_objective(const Vec2& eta, const GammaBelief& msg_gamma, const LogNormalMessage& msg_lognormal);

/// Fixed-point map eta -> F(eta)^{-1} grad E[l] and the residual of the map in the Fisher norm.
Vec2 gaussian_fixed_point_map(const Vec2& eta, const GaussianBelief& msg_conjugate, const LogGammaMessage& msg_nonconj);
Vec2 gamma_fixed_point_map(const Vec2& eta, const GammaBelief& msg_gamma, const LogNormalMessage& msg_lognormal);
double fisher_norm(const Mat2& fisher, const Vec2& d);

using Objective2 = std::function<double(const Vec2&)>;
using Feasible2 = std::function<bool(const Vec2&)>;

struct StepResult {
    Vec2 eta;
    double value;
    double step;  // accepted multiplier on the (clipped) natural direction; 0 if no step
};

/** One natural-gradient step with Armijo line search.
 *
 * Direction d = -F^{-1} g, clipped so that its Fisher norm sqrt(d' F d) is at most
 * max_step_norm. The multiplier starts at `step0` (cfg.initial_step when negative), is
 * halved until the trial point is feasible, then grows toward 1 while the Armijo
 * condition keeps holding, or shrinks until it holds.
 */
StepResult natural_gradient_step(const Vec2& eta, const Mat2& fisher, const Vec2& grad, const Objective2& objective,
                                 const Feasible2& feasible, const SolverConfig& cfg, double step0 = -1.0);
/// Same step with the natural direction F^{-1} g supplied by the caller.
StepResult natural_direction_step(const Vec2& eta, const Vec2& nat, const Vec2& grad, const Objective2& objective,
                                  const Feasible2& feasible, const SolverConfig& cfg, double step0 = -1.0);

FixedPointResult solve_gaussian_edge(const GaussianBelief& msg_conjugate, const LogGammaMessage& msg_nonconj,
                                     const GaussianBelief& init, const SolverConfig& cfg = {});
FixedPointResult solve_gamma_edge(const GammaBelief& msg_gamma, const LogNormalMessage& msg_lognormal,
                                  const GammaBelief& init, const SolverConfig& cfg = {});

/// Gaussian centred on the mode of conj(z) * LG(z) with the local curvature; a starting point for the solver.
GaussianBelief laplace_init(const GaussianBelief& msg_conjugate, const LogGammaMessage& msg_nonconj);
/// Gamma matching the log-normal's log-moments, multiplied by the Gamma message.
GammaBelief moment_init(const GammaBelief& msg_gamma, const LogNormalMessage& msg_lognormal);

}  // namespace vfg
