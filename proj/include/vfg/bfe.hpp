#pragma once
#include <vector>

#include "vfg/fixed_point.hpp"
#include "vfg/graph.hpp"
#include "vfg/marginals.hpp"

namespace vfg {

struct BfeBreakdown {
    std::vector<double> node_terms;      // U_a - H_a per node
    std::vector<double> edge_entropies;  // H[q_e] per edge
    double total = 0.0;
};

/// Expectations a factor reads from one of its ports.
struct PortStats {
    Belief belief;       // for messages; PointMass(E[gamma]) on the gamma side of an exp link
    double entropy;      // H of the edge belief
    double mean_log;     // E[log x] (Gamma-typed ports only)
};

/// Stats of the belief on `edge` as seen by an adjacent factor.
PortStats port_stats(const FactorGraph& g, const Clustering& c, const Marginals& m, int edge);

/// Joint q(y, mu) of a structured normal node from its incoming messages and E[tau].
MvGaussianBelief structured_joint(const FactorGraph& g, const Marginals& m, int node, double tau_mean);

BfeBreakdown bethe_free_energy(const FactorGraph& g, const Marginals& m);
BfeBreakdown bethe_free_energy(const FactorGraph& g, const Clustering& c, const Marginals& m);

/// Cross-entropy -E_q[log p] of two beliefs of the same family.
double cross_entropy(const Belief& q, const Belief& p);

}  // namespace vfg
