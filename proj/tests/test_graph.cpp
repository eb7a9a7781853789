#include <gtest/gtest.h>

#include <set>

#include "vfg/graph.hpp"
#include "vfg/graph_json.hpp"
#include "vfg/models.hpp"

using namespace vfg;

namespace {

ModelGraph depth0_small() {
    Mat p(1, 2);
    p << 0.0, 1.0;
    Vec y(2);
    y << 1.0, -1.0;
    return build_depth0(1, p, y, {GammaBelief{1, 1}});
}

std::vector<FactorGraph> builder_graphs() {
    SyntheticSpec s;
    s.m = 3;
    s.d = 2;
    s.n_experts = 2;
    EnsembleData d = make_synthetic(s).data;
    std::vector<FactorGraph> out;
    out.push_back(depth0_small().graph);
    out.push_back(build_pge(d, PgePriors::defaults(2, 3), false).graph);
    out.push_back(build_noisy(d, PgePriors::defaults(2, 3), false).graph);
    out.push_back(build_noisy(slice(d, 0, 2), PgePriors::defaults(2, 3), true).graph);
    out.push_back(build_depth2(xor_experts(10.0), xor_phi(0.2, 0.7).transpose()).graph);
    return out;
}

}  // namespace

TEST(Terminate, EmptyGraphIsIdentity) {
    FactorGraph g;
    g.terminate();
    EXPECT_TRUE(g.nodes.empty());
    EXPECT_TRUE(g.edges.empty());
    EXPECT_TRUE(g.terminated());
}

TEST(Terminate, ClosesHalfEdgesWithUnity) {
    FactorGraph g;
    int s = g.add_softdot();
    int z = g.add_edge(LineType::Solid, FamilyConstraint::gaussian(), "z");
    g.connect(s, "z", z);
    EXPECT_FALSE(g.terminated());
    g.terminate();
    EXPECT_TRUE(g.terminated());
    EXPECT_EQ(g.edges[static_cast<size_t>(z)].n_ends(), 2);
    const Endpoint far = g.other_end(z, s, g.port_index(s, "z"));
    EXPECT_EQ(g.nodes[static_cast<size_t>(far.node)].kind, NodeKind::Unity);
}

TEST(Terminate, Depth0Wiring) {
    const ModelGraph mg = depth0_small();
    const FactorGraph& g = mg.graph;
    for (const Edge& e : g.edges) EXPECT_EQ(e.n_ends(), 2) << e.id;
    // The gamma edge leaving the prior factor joins GammaFactor and Equality.
    const int ge = mg.static_gamma_edges.at(0);
    std::set<NodeKind> kinds{g.nodes[static_cast<size_t>(g.edges[static_cast<size_t>(ge)].ends[0].node)].kind,
                             g.nodes[static_cast<size_t>(g.edges[static_cast<size_t>(ge)].ends[1].node)].kind};
    EXPECT_EQ(kinds, (std::set<NodeKind>{NodeKind::GammaFactor, NodeKind::Equality}));
    // Each y edge joins Equality and Observation.
    for (int e : mg.y_edges) {
        std::set<NodeKind> k{g.nodes[static_cast<size_t>(g.edges[static_cast<size_t>(e)].ends[0].node)].kind,
                             g.nodes[static_cast<size_t>(g.edges[static_cast<size_t>(e)].ends[1].node)].kind};
        EXPECT_EQ(k, (std::set<NodeKind>{NodeKind::Observation, NodeKind::Equality}));
    }
}

TEST(Connect, RejectsLineMismatchAndThirdEndpoint) {
    FactorGraph g;
    int s = g.add_softdot();
    int dashed = g.add_edge(LineType::Dashed, FamilyConstraint::gamma());
    EXPECT_THROW(g.connect(s, "w", dashed), GraphError);
    int z = g.add_edge(LineType::Solid, FamilyConstraint::gaussian());
    int a = g.add_normal(), b = g.add_normal();
    g.connect(s, "z", z);
    g.connect(a, "y", z);
    EXPECT_THROW(g.connect(b, "y", z), GraphError);
    EXPECT_THROW(g.connect(s, "nope", z), std::exception);
}

TEST(ValidateProper, BuilderGraphsPass) {
    for (const FactorGraph& g : builder_graphs()) {
        ValidationReport r = validate_proper(g);
        EXPECT_TRUE(r.ok);
        for (const auto& v : r.violations) ADD_FAILURE() << v.message;
    }
}

TEST(ValidateProper, WPortOnDashedEdgeIsOneViolation) {
    FactorGraph g;
    int s = g.add_softdot();
    int w = g.add_edge(LineType::Dashed, FamilyConstraint::gamma(), "w");
    g.attach(s, "w", w);
    g.prior(w, GammaBelief{1, 1});
    int z = g.add_edge(LineType::Solid, FamilyConstraint::gaussian());
    int phi = g.add_edge(LineType::Solid, FamilyConstraint::gaussian());
    int tau = g.add_edge(LineType::Dashed, FamilyConstraint::gamma());
    g.connect(s, "z", z);
    g.connect(s, "phi", phi);
    g.connect(s, "tau", tau);
    g.clamp(phi, PointMass::scalar(1.0));
    g.clamp(tau, PointMass::scalar(1.0));
    g.terminate();
    ValidationReport r = validate_proper(g);
    EXPECT_FALSE(r.ok);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].edge, w);
}

TEST(ValidateProper, MixedFamilyEqualityFails) {
    FactorGraph g;
    int eq = g.add_equality(PortFamily::Gaussian, 3);
    int a = g.add_edge(LineType::Solid, FamilyConstraint::gaussian());
    int b = g.add_edge(LineType::Solid, FamilyConstraint::gaussian());
    int c = g.add_edge(LineType::Dashed, FamilyConstraint::gamma());
    g.attach(eq, "e0", a);
    g.attach(eq, "e1", b);
    g.attach(eq, "e2", c);
    g.terminate();
    EXPECT_FALSE(validate_proper(g).ok);
}

TEST(ValidateProper, EqualityNextToExpLinkFails) {
    FactorGraph g;
    int x = g.add_exp();
    int eq = g.add_equality(PortFamily::Gaussian, 3);
    int z = g.add_edge(LineType::DashDot, FamilyConstraint::gaussian());
    g.connect(x, "z", z);
    g.connect(eq, "e0", z);
    g.terminate();
    EXPECT_FALSE(validate_proper(g).ok);
}

TEST(ValidateProper, AnySingleLineCorruptionFails) {
    for (const FactorGraph& base : builder_graphs()) {
        for (size_t e = 0; e < base.edges.size(); ++e) {
            for (LineType l : {LineType::Solid, LineType::Dashed, LineType::DashDot}) {
                if (l == base.edges[e].line) continue;
                FactorGraph g = base;
                g.edges[e].line = l;
                EXPECT_FALSE(validate_proper(g).ok) << "edge " << e << " -> " << to_string(l);
            }
        }
    }
}

TEST(Schedule, Depth0CountsBothDirections) {
    const FactorGraph g = depth0_small().graph;
    Schedule s = build_schedule(g);
    EXPECT_EQ(s.flattened().size(), 2 * g.edges.size());
}

TEST(Schedule, CoversEveryNodeEdgePairOnce) {
    for (const FactorGraph& g : builder_graphs()) {
        std::multiset<std::pair<int, int>> seen;
        for (const ScheduleStep& st : build_schedule(g).flattened()) seen.insert({st.node, st.edge});
        std::multiset<std::pair<int, int>> expected;
        for (const Node& n : g.nodes)
            for (const Port& p : n.ports) expected.insert({n.id, p.edge});
        EXPECT_EQ(seen, expected);
    }
}

TEST(Schedule, Deterministic) {
    for (const FactorGraph& g : builder_graphs()) {
        Schedule a = build_schedule(g), b = build_schedule(g);
        EXPECT_EQ(a.hash(), b.hash());
        EXPECT_EQ(a.flattened(), b.flattened());
    }
}

TEST(Schedule, ParametersComeLast) {
    SyntheticSpec s;
    s.m = 4;
    s.d = 2;
    ModelGraph mg = build_pge(make_synthetic(s).data, PgePriors::defaults(3, 3), false);
    Schedule sch = build_schedule(mg.graph);
    int last_phase = 0;
    for (const ClusterUpdate& u : sch.updates) {
        EXPECT_GE(u.phase, last_phase);
        last_phase = u.phase;
    }
    for (const ClusterUpdate& u : sch.updates)
        if (sch.clustering.clusters[static_cast<size_t>(u.cluster)].param) EXPECT_EQ(u.phase, 4);
}

TEST(Schedule, ImproperGraphThrows) {
    FactorGraph g;
    int s = g.add_softdot();
    int w = g.add_edge(LineType::Dashed, FamilyConstraint::gamma());
    g.attach(s, "w", w);
    g.terminate();
    EXPECT_THROW(build_schedule(g), GraphError);
}

TEST(GraphJson, RoundTrip) {
    for (const FactorGraph& g : builder_graphs()) {
        nlohmann::json j = graph_to_json(g);
        FactorGraph back = graph_from_json(j);
        EXPECT_EQ(graph_to_json(back), j);
        EXPECT_EQ(build_schedule(back).hash(), build_schedule(g).hash());
    }
}

TEST(GraphJson, MalformedDocumentsThrow) {
    EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"nodes": 3})")), GraphParseError);
    EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"nodes": [{"id": 0, "kind": "wormhole"}], "edges": []})")),
                 GraphParseError);
    EXPECT_THROW(graph_from_json(nlohmann::json::parse(
                     R"({"nodes": [{"id": 0, "kind": "unity"}], "edges": [{"id": 0, "line": "solid", "family": "gaussian",
                        "endpoints": [{"node": 0, "port": "out"}, {"node": 7, "port": "out"}]}]})")),
                 GraphParseError);
}

TEST(GraphJson, BeliefRoundTrip) {
    for (const Belief& b : {Belief{GaussianBelief::from_moments(1.5, 0.25)}, Belief{GammaBelief{2, 3}}, Belief{PointMass::scalar(4.0)}}) {
        Belief r = belief_from_json(belief_to_json(b));
        EXPECT_EQ(belief_to_json(r), belief_to_json(b));
    }
}
