#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vfg/exp_family.hpp"

namespace vfg {

enum class LineType { Solid, Dashed, DashDot };
/// Port typing used by properness checks. Terminators accept any line.
enum class PortFamily { Gaussian, Gamma, Any };
enum class NodeKind { Softdot, ExpLink, GammaFactor, NormalFactor, Equality, Clamp, Observation, Unity, Prior };
inline constexpr int kNodeKindCount = 9;
enum class FamilyKind { Gaussian, MvGaussian, Gamma };

struct FamilyConstraint {
    FamilyKind kind = FamilyKind::Gaussian;
    int dim = 1;

    static FamilyConstraint gaussian() { return {FamilyKind::Gaussian, 1}; }
    static FamilyConstraint mv_gaussian(int d) { return {FamilyKind::MvGaussian, d}; }
    static FamilyConstraint gamma() { return {FamilyKind::Gamma, 1}; }
    bool operator==(const FamilyConstraint&) const = default;
};

struct Port {
    std::string name;
    PortFamily family = PortFamily::Any;
    int edge = -1;
};

/// Per-node factorization. Structured groups list port names sharing a joint belief.
struct Factorization {
    bool structured = false;
    std::vector<std::vector<std::string>> groups;
};

struct Node {
    int id = -1;
    NodeKind kind = NodeKind::Unity;
    std::vector<Port> ports;
    Belief value = PointMass{};  // Clamp/Observation: PointMass; Prior: the prior belief
    double alpha = 1.0;          // GammaFactor clamped shape
    Factorization factorization;
    std::string label;

    bool is_terminator() const {
        return kind == NodeKind::Clamp || kind == NodeKind::Observation || kind == NodeKind::Unity ||
               kind == NodeKind::Prior;
    }
    bool is_deterministic() const { return kind == NodeKind::ExpLink || kind == NodeKind::Equality; }
};

struct Endpoint {
    int node = -1;
    int port = -1;
    bool valid() const { return node >= 0; }
    bool operator==(const Endpoint&) const = default;
};

struct Edge {
    int id = -1;
    LineType line = LineType::Solid;
    FamilyConstraint family;
    std::array<Endpoint, 2> ends;
    std::string label;
    bool param = false;     // model parameter (w, tau, beta, kappa); updated last in a sweep
    bool diagonal = false;  // MvGaussian belief restricted to diagonal precision

    int n_ends() const { return static_cast<int>(ends[0].valid()) + static_cast<int>(ends[1].valid()); }
};

class GraphError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

std::string to_string(LineType l);
std::string to_string(NodeKind k);
std::string to_string(FamilyKind k);
bool line_carries(LineType line, PortFamily family);

class FactorGraph {
  public:
    std::vector<Node> nodes;
    std::vector<Edge> edges;

    int add_edge(LineType line, FamilyConstraint family, std::string label = {}, bool param = false);

    int add_softdot(std::string label = {});
    int add_exp(std::string label = {});
    int add_gamma(double alpha, std::string label = {});
    int add_normal(std::string label = {});
    int add_equality(PortFamily family, int degree, std::string label = {});
    /// Generic creation used by deserialization; ports follow the kind's fixed layout.
    int add_node(NodeKind kind, std::string label = {}, int degree = 3, PortFamily eq_family = PortFamily::Gaussian);

    /// Join node port to edge, checking line type and the free endpoint slot.
    void connect(int node, const std::string& port, int edge);
    /// Same as connect without the line-type check (used when loading documents to be validated).
    void attach(int node, const std::string& port, int edge);

    int clamp(int edge, const PointMass& value, std::string label = {});
    int observe(int edge, const PointMass& value, std::string label = {});
    int prior(int edge, const Belief& belief, std::string label = {});
    /// Close every remaining half-edge with a Unity factor.
    void terminate();
    bool terminated() const;

    int port_index(int node, const std::string& name) const;
    int edge_at(int node, const std::string& port) const { return nodes.at(node).ports.at(port_index(node, port)).edge; }
    /// The endpoint on the other side of edge from (node, port).
    Endpoint other_end(int edge, int node, int port) const;
    void set_structured(int node, std::vector<std::vector<std::string>> groups);
};

struct Violation {
    int node = -1;
    int edge = -1;
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;
};

ValidationReport validate_proper(const FactorGraph& g);

// ------------------------------------------------------------- clusters

enum class ClusterClass { Clamped, ExpZ, ExpGamma, Conjugate };

/// Edges joined by equality nodes share one belief; a cluster is such a set.
struct Cluster {
    int id = -1;
    std::vector<int> edges;
    std::vector<Endpoint> endpoints;  // non-equality endpoints
    std::vector<int> eq_nodes;
    ClusterClass cls = ClusterClass::Conjugate;
    bool param = false;
    bool diagonal = false;
    int exp_node = -1;  // for ExpZ / ExpGamma
    FamilyConstraint family;
};

struct Clustering {
    std::vector<Cluster> clusters;
    std::vector<int> edge_cluster;
};

Clustering cluster_edges(const FactorGraph& g);

struct ScheduleStep {
    int node;
    int edge;
    int phase;  // 1 exp-adjacent, 3 conjugate, 4 parameters
    bool operator==(const ScheduleStep&) const = default;
};

struct ClusterUpdate {
    int cluster;
    int phase;
    std::vector<ScheduleStep> steps;
};

struct Schedule {
    Clustering clustering;
    std::vector<ClusterUpdate> updates;
    std::vector<int> exp_nodes;  // exp links in solve order

    std::vector<ScheduleStep> flattened() const;
    std::uint64_t hash() const;
};

Schedule build_schedule(const FactorGraph& g);

}  // namespace vfg
