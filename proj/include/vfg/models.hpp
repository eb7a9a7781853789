#pragma once
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "vfg/engine.hpp"
#include "vfg/graph.hpp"

namespace vfg {

class ModelError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// features: m x d raw inputs (the builders append a constant 1); predictions: n x m; targets: length m.
struct EnsembleData {
    Mat features;
    Mat predictions;
    std::optional<Vec> targets;

    int n_experts() const { return static_cast<int>(predictions.rows()); }
    int n_obs() const { return static_cast<int>(predictions.cols()); }
    int feature_dim() const { return static_cast<int>(features.cols()) + 1; }
    Vec phi(int j) const;
    void validate() const;
};

/// Per-expert priors. tau, beta and kappa may be a GammaBelief (prior factor) or a PointMass (clamp).
struct ExpertPriors {
    Belief w;
    Belief tau = GammaBelief{1.0, 1.0};
    Belief beta = GammaBelief{1.0, 1.0};
    Belief kappa = GammaBelief{1.0, 1.0};
};

struct PgePriors {
    std::vector<ExpertPriors> experts;
    static PgePriors defaults(int n, int d);
};

/// A built graph plus the edges callers read results from.
struct ModelGraph {
    FactorGraph graph;
    std::vector<int> y_edges;                    // per observation
    std::vector<std::vector<int>> gamma_edges;   // [expert][obs]
    std::vector<std::vector<int>> pred_edges;    // noisy only
    std::vector<int> w_edges, tau_edges, beta_edges, kappa_edges;  // per expert, PGE/noisy
    std::vector<int> static_gamma_edges;         // per expert, depth 0
    std::map<int, Belief> initial_beliefs;
};

/** Depth 0: one precision per expert.
 *
 * gamma_priors[i] is a GammaBelief(a, b) (a GammaFactor with shape a and clamped rate b)
 * or a PointMass (gamma clamped). With kappa_priors the noise layer of the noisy model is added.
 */
ModelGraph build_depth0(int n, const Mat& predictions, const std::optional<Vec>& targets,
                        const std::vector<Belief>& gamma_priors, const std::vector<Belief>& kappa_priors = {},
                        bool prediction_mode = false);

ModelGraph build_pge(const EnsembleData& data, const PgePriors& priors, bool diagonal);
ModelGraph build_noisy(const EnsembleData& data, const PgePriors& priors, bool prediction_mode, bool diagonal = false);

/// Posteriors of a trained PGE/noisy graph, usable as priors for prediction.
PgePriors posterior_priors(const ModelGraph& mg, const Marginals& m);

struct Depth2ExpertSpec {
    Vec v;
    Vec wL;
    Vec wR;
    double tau_router = 2000.0;
    double tau_expert = 2000.0;
    double yhat = 0.0;
};

struct Depth2Graph {
    FactorGraph graph;
    std::vector<int> y_edges;  // per observation
    // [expert][obs] gamma edges of the right and left branches.
    std::vector<std::vector<int>> gamma_r, gamma_l;
    std::vector<std::vector<int>> kappa_r, kappa_l;
    std::map<int, Belief> initial_beliefs;
};

/// phi rows are complete feature vectors (bias included). targets observed when given.
Depth2Graph build_depth2(const std::vector<Depth2ExpertSpec>& experts, const Mat& phi,
                         const std::optional<Vec>& targets = std::nullopt);

struct Depth2Readout {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> expert_precision;  // E[gamma^R] + E[gamma^L] per expert
};

Depth2Readout depth2_point(const std::vector<Depth2ExpertSpec>& experts, const Vec& phi, const InferenceConfig& cfg = {});
/// One independent graph per row of phi; rows distributed over OpenMP threads when parallel.
std::vector<Depth2Readout> depth2_readout(const std::vector<Depth2ExpertSpec>& experts, const Mat& phi,
                                          const InferenceConfig& cfg = {}, bool parallel = true);

std::vector<Depth2ExpertSpec> xor_experts(double tau);
Vec xor_phi(double x1, double x2);

struct GridPoint {
    double x1, x2, mean, std;
};
/// n x n lattice on [0,1]^2 (row-major in x1 then x2).
std::vector<GridPoint> xor_grid(double tau, int n, const InferenceConfig& cfg = {}, bool parallel = true);

/** Four experts encoding a depth-2 axis-aligned tree on [0,1]^2.
 *
 * leaves = (x1<s1 & x2<s2, x1<s1 & x2>s2, x1>s1 & x2<s2, x1>s1 & x2>s2); slope sets how fast the
 * log-precision leaves the splits.
 */
std::vector<Depth2ExpertSpec> tree_experts(double s1, double s2, const std::array<double, 4>& leaves, double tau,
                                           double slope);

struct Metrics {
    double mse = 0.0;
    double nll = 0.0;
};
Metrics metrics(const std::vector<GaussianBelief>& predictive, const Vec& targets);

struct SyntheticSpec {
    int n_experts = 3;
    int m = 200;
    int d = 5;
    std::uint64_t seed = 7;
    bool heteroscedastic = true;
};

struct SyntheticData {
    EnsembleData data;
    Mat true_gamma;  // n x m
    Mat w_true;      // n x (d+1)
};

SyntheticData make_synthetic(const SyntheticSpec& spec);
/// Rows [begin, end) of a dataset.
EnsembleData slice(const EnsembleData& d, int begin, int end);

/// Read q(y_j) from a prediction run.
std::vector<GaussianBelief> predictive_y(const FactorGraph& g, const Marginals& m, const std::vector<int>& y_edges);

}  // namespace vfg
