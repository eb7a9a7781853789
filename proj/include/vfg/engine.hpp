#pragma once
#include <map>
#include <stdexcept>

#include "vfg/bfe.hpp"
#include "vfg/fixed_point.hpp"
#include "vfg/graph.hpp"
#include "vfg/marginals.hpp"

namespace vfg {

struct InferenceConfig {
    int sweeps = 5;
    SolverConfig solver;
    std::map<int, Belief> initial_beliefs;  // edge id -> starting belief
    // Stop once |BFE change| falls below this value. Zero disables early stopping.
    double early_stop_delta = 0.0;
};

/// Raised for failures attributable to one edge (degenerate products, solver inputs).
class InferenceError : public std::runtime_error {
  public:
    InferenceError(int edge, const std::string& what)
        : std::runtime_error("edge " + std::to_string(edge) + ": " + what), edge_(edge) {}
    int edge() const { return edge_; }

  private:
    int edge_;
};

Marginals infer(const FactorGraph& g, const InferenceConfig& cfg = {});

/// Belief on an unobserved target edge after inference.
Belief predictive(const FactorGraph& g, const Marginals& m, int target_edge);

}  // namespace vfg
