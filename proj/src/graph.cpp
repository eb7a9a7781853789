#include "vfg/graph.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace vfg {

std::string to_string(LineType l) {
    switch (l) {
        case LineType::Solid: return "solid";
        case LineType::Dashed: return "dashed";
        case LineType::DashDot: return "dashdot";
    }
    return "?";
}

std::string to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Softdot: return "softdot";
        case NodeKind::ExpLink: return "exp";
        case NodeKind::GammaFactor: return "gamma";
        case NodeKind::NormalFactor: return "normal";
        case NodeKind::Equality: return "equality";
        case NodeKind::Clamp: return "clamp";
        case NodeKind::Observation: return "observation";
        case NodeKind::Unity: return "unity";
        case NodeKind::Prior: return "prior";
    }
    return "?";
}

std::string to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::Gaussian: return "gaussian";
        case FamilyKind::MvGaussian: return "mvgaussian";
        case FamilyKind::Gamma: return "gamma";
    }
    return "?";
}

bool line_carries(LineType line, PortFamily family) {
    if (family == PortFamily::Any) return true;
    if (family == PortFamily::Gamma) return line == LineType::Dashed;
    return line == LineType::Solid || line == LineType::DashDot;
}

namespace {

bool family_matches_line(const FamilyConstraint& f, LineType line) {
    return (f.kind == FamilyKind::Gamma) == (line == LineType::Dashed);
}

int family_dim(const FamilyConstraint& f) { return f.kind == FamilyKind::Gaussian ? 1 : f.dim; }

bool belief_matches(const Belief& b, const FamilyConstraint& f) {
    if (auto* p = std::get_if<PointMass>(&b)) return p->dim() == family_dim(f);
    switch (f.kind) {
        case FamilyKind::Gaussian: return std::holds_alternative<GaussianBelief>(b);
        case FamilyKind::MvGaussian: {
            auto* m = std::get_if<MvGaussianBelief>(&b);
            return m && m->dim() == f.dim;
        }
        case FamilyKind::Gamma: return std::holds_alternative<GammaBelief>(b);
    }
    return false;
}

}  // namespace

// ------------------------------------------------------------- building

int FactorGraph::add_edge(LineType line, FamilyConstraint family, std::string label, bool param) {
    if (!family_matches_line(family, line))
        throw GraphError("edge family " + to_string(family.kind) + " does not match line " + to_string(line));
    if (family.kind == FamilyKind::MvGaussian && family.dim < 1) throw GraphError("MvGaussian edge needs dim >= 1");
    Edge e;
    e.id = static_cast<int>(edges.size());
    e.line = line;
    e.family = family;
    e.label = std::move(label);
    e.param = param;
    edges.push_back(std::move(e));
    return edges.back().id;
}

int FactorGraph::add_node(NodeKind kind, std::string label, int degree, PortFamily eq_family) {
    Node n;
    n.id = static_cast<int>(nodes.size());
    n.kind = kind;
    n.label = std::move(label);
    auto G = PortFamily::Gaussian, T = PortFamily::Gamma;
    switch (kind) {
        case NodeKind::Softdot: n.ports = {{"z", G}, {"w", G}, {"phi", G}, {"tau", T}}; break;
        case NodeKind::ExpLink: n.ports = {{"z", G}, {"gamma", T}}; break;
        case NodeKind::GammaFactor: n.ports = {{"gamma", T}, {"beta", T}}; break;
        case NodeKind::NormalFactor: n.ports = {{"y", G}, {"mu", G}, {"tau", T}}; break;
        case NodeKind::Equality:
            if (degree < 3) throw GraphError("equality node needs at least 3 ports");
            if (eq_family == PortFamily::Any) throw GraphError("equality node needs a concrete family");
            for (int k = 0; k < degree; ++k) n.ports.push_back({"e" + std::to_string(k), eq_family});
            break;
        default: n.ports = {{"out", PortFamily::Any}}; break;
    }
    if (n.is_deterministic()) {
        std::vector<std::string> all;
        for (auto& p : n.ports) all.push_back(p.name);
        n.factorization = {true, {all}};
    }
    nodes.push_back(std::move(n));
    return nodes.back().id;
}

int FactorGraph::add_softdot(std::string label) { return add_node(NodeKind::Softdot, std::move(label)); }
int FactorGraph::add_exp(std::string label) { return add_node(NodeKind::ExpLink, std::move(label)); }
int FactorGraph::add_normal(std::string label) { return add_node(NodeKind::NormalFactor, std::move(label)); }

int FactorGraph::add_gamma(double alpha, std::string label) {
    if (!(alpha > 0.0)) throw GraphError("gamma factor shape must be positive");
    int id = add_node(NodeKind::GammaFactor, std::move(label));
    nodes[id].alpha = alpha;
    return id;
}

int FactorGraph::add_equality(PortFamily family, int degree, std::string label) {
    return add_node(NodeKind::Equality, std::move(label), degree, family);
}

int FactorGraph::port_index(int node, const std::string& name) const {
    const Node& n = nodes.at(node);
    for (size_t k = 0; k < n.ports.size(); ++k)
        if (n.ports[k].name == name) return static_cast<int>(k);
    throw GraphError("node " + std::to_string(node) + " (" + to_string(n.kind) + ") has no port '" + name + "'");
}

void FactorGraph::attach(int node, const std::string& port, int edge) {
    const int p = port_index(node, port);
    Port& pt = nodes.at(node).ports[p];
    Edge& e = edges.at(edge);
    if (pt.edge >= 0) throw GraphError("port " + port + " of node " + std::to_string(node) + " already connected");
    int slot = !e.ends[0].valid() ? 0 : (!e.ends[1].valid() ? 1 : -1);
    if (slot < 0) throw GraphError("edge " + std::to_string(edge) + " already has two endpoints");
    e.ends[slot] = {node, p};
    pt.edge = edge;
}

void FactorGraph::connect(int node, const std::string& port, int edge) {
    const Port& pt = nodes.at(node).ports.at(port_index(node, port));
    const Edge& e = edges.at(edge);
    if (!line_carries(e.line, pt.family))
        throw GraphError("line type " + to_string(e.line) + " of edge " + std::to_string(edge) +
                         " does not fit port " + port + " of node " + std::to_string(node));
    attach(node, port, edge);
}

int FactorGraph::clamp(int edge, const PointMass& value, std::string label) {
    int n = add_node(NodeKind::Clamp, std::move(label));
    nodes[n].value = value;
    connect(n, "out", edge);
    return n;
}

int FactorGraph::observe(int edge, const PointMass& value, std::string label) {
    int n = add_node(NodeKind::Observation, std::move(label));
    nodes[n].value = value;
    connect(n, "out", edge);
    return n;
}

int FactorGraph::prior(int edge, const Belief& belief, std::string label) {
    int n = add_node(NodeKind::Prior, std::move(label));
    nodes[n].value = belief;
    connect(n, "out", edge);
    return n;
}

void FactorGraph::terminate() {
    const size_t ne = edges.size();
    for (size_t e = 0; e < ne; ++e)
        while (edges[e].n_ends() < 2) connect(add_node(NodeKind::Unity), "out", static_cast<int>(e));
}

bool FactorGraph::terminated() const {
    return std::all_of(edges.begin(), edges.end(), [](const Edge& e) { return e.n_ends() == 2; });
}

Endpoint FactorGraph::other_end(int edge, int node, int port) const {
    const Edge& e = edges.at(edge);
    if (e.ends[0].node == node && e.ends[0].port == port) return e.ends[1];
    if (e.ends[1].node == node && e.ends[1].port == port) return e.ends[0];
    throw GraphError("endpoint not on edge " + std::to_string(edge));
}

void FactorGraph::set_structured(int node, std::vector<std::vector<std::string>> groups) {
    Node& n = nodes.at(node);
    for (auto& g : groups)
        for (auto& p : g) port_index(node, p);
    n.factorization = {true, std::move(groups)};
}

// ----------------------------------------------------------- validation

ValidationReport validate_proper(const FactorGraph& g) {
    ValidationReport r;
    auto add = [&](int node, int edge, const std::string& msg) {
        r.ok = false;
        r.violations.push_back({node, edge, msg});
    };
    auto edge_of = [&](const Node& n, const char* port) -> const Edge* {
        for (auto& p : n.ports)
            if (p.name == port && p.edge >= 0) return &g.edges[static_cast<size_t>(p.edge)];
        return nullptr;
    };

    for (const Edge& e : g.edges) {
        if (e.n_ends() != 2) {
            add(-1, e.id, "edge has " + std::to_string(e.n_ends()) + " endpoint(s); graph is not terminated");
            continue;
        }
        if (!family_matches_line(e.family, e.line)) {
            add(-1, e.id, "family " + to_string(e.family.kind) + " does not match line " + to_string(e.line));
            continue;
        }
        std::ostringstream bad;
        for (const Endpoint& ep : e.ends) {
            const Port& p = g.nodes[static_cast<size_t>(ep.node)].ports[static_cast<size_t>(ep.port)];
            if (!line_carries(e.line, p.family))
                bad << (bad.tellp() > 0 ? ", " : "") << "node " << ep.node << " port " << p.name;
        }
        if (bad.tellp() > 0)
            add(-1, e.id, to_string(e.line) + " line connects to wrongly typed port(s): " + bad.str());
        // Dash-dot marks exactly the log-precision edges entering an exp link.
        bool at_exp_z = false;
        for (const Endpoint& ep : e.ends) {
            const Node& n = g.nodes[static_cast<size_t>(ep.node)];
            at_exp_z |= n.kind == NodeKind::ExpLink && n.ports[static_cast<size_t>(ep.port)].name == "z";
        }
        if (at_exp_z && e.line != LineType::DashDot)
            add(-1, e.id, "edge on an exp link z port must be dash-dot, found " + to_string(e.line));
        else if (!at_exp_z && e.line == LineType::DashDot)
            add(-1, e.id, "dash-dot edge does not enter an exp link");
    }

    for (const Node& n : g.nodes) {
        for (const Port& p : n.ports)
            if (p.edge < 0) add(n.id, -1, "port " + p.name + " of " + to_string(n.kind) + " is unconnected");
        if (n.is_deterministic() && !n.factorization.structured)
            add(n.id, -1, to_string(n.kind) + " node cannot carry a naive mean-field factorization");

        switch (n.kind) {
            case NodeKind::Equality: {
                const Edge* first = nullptr;
                for (const Port& p : n.ports) {
                    if (p.edge < 0) continue;
                    const Edge& e = g.edges[static_cast<size_t>(p.edge)];
                    if (!first) first = &e;
                    else if (!(e.family == first->family)) {
                        add(n.id, e.id, "equality node mixes " + to_string(first->family.kind) + " and " +
                                            to_string(e.family.kind) + " edges");
                        break;
                    }
                }
                break;
            }
            case NodeKind::Softdot: {
                const Edge *w = edge_of(n, "w"), *phi = edge_of(n, "phi"), *z = edge_of(n, "z");
                if (w && phi && family_dim(w->family) != family_dim(phi->family))
                    add(n.id, w->id, "softdot: dim(w) != dim(phi)");
                if (z && z->family.kind != FamilyKind::Gaussian) add(n.id, z->id, "softdot: z must be scalar Gaussian");
                break;
            }
            case NodeKind::ExpLink: {
                const Edge* z = edge_of(n, "z");
                if (z) {
                    if (z->family.kind != FamilyKind::Gaussian) add(n.id, z->id, "exp link: z must be scalar Gaussian");
                    if (z->n_ends() == 2) {
                        Endpoint o = g.other_end(z->id, n.id, g.port_index(n.id, "z"));
                        if (g.nodes[static_cast<size_t>(o.node)].kind == NodeKind::Equality)
                            add(n.id, z->id, "exp link z side joins an equality node (Gaussian x log-gamma has no closed form)");
                    }
                }
                break;
            }
            case NodeKind::NormalFactor: {
                for (const char* pn : {"y", "mu"}) {
                    const Edge* e = edge_of(n, pn);
                    if (e && family_dim(e->family) != 1 && e->family.kind != FamilyKind::Gamma)
                        add(n.id, e->id, std::string("normal: port ") + pn + " must be scalar");
                }
                break;
            }
            case NodeKind::Clamp:
            case NodeKind::Observation:
            case NodeKind::Prior: {
                const Port& p = n.ports[0];
                if (p.edge < 0) break;
                const Edge& e = g.edges[static_cast<size_t>(p.edge)];
                if (n.kind != NodeKind::Prior && !std::holds_alternative<PointMass>(n.value))
                    add(n.id, e.id, "clamp/observation value must be a point mass");
                else if (!belief_matches(n.value, e.family))
                    add(n.id, e.id, to_string(n.kind) + " value does not match edge family " + to_string(e.family.kind));
                break;
            }
            default: break;
        }
    }
    return r;
}

// -------------------------------------------------------------- clusters

Clustering cluster_edges(const FactorGraph& g) {
    const int ne = static_cast<int>(g.edges.size());
    std::vector<int> parent(static_cast<size_t>(ne));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<size_t>(x)] != x) x = parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
        return x;
    };
    for (const Node& n : g.nodes) {
        if (n.kind != NodeKind::Equality) continue;
        int root = -1;
        for (const Port& p : n.ports) {
            if (p.edge < 0) continue;
            if (root < 0) root = find(p.edge);
            else {
                int r2 = find(p.edge);
                if (r2 != root) parent[static_cast<size_t>(std::max(r2, root))] = std::min(r2, root);
                root = std::min(r2, root);
            }
        }
    }

    Clustering c;
    c.edge_cluster.assign(static_cast<size_t>(ne), -1);
    std::vector<int> root_to_cluster(static_cast<size_t>(ne), -1);
    for (int e = 0; e < ne; ++e) {
        int r = find(e);
        if (root_to_cluster[static_cast<size_t>(r)] < 0) {
            root_to_cluster[static_cast<size_t>(r)] = static_cast<int>(c.clusters.size());
            Cluster cl;
            cl.id = static_cast<int>(c.clusters.size());
            cl.family = g.edges[static_cast<size_t>(e)].family;
            c.clusters.push_back(cl);
        }
        Cluster& cl = c.clusters[static_cast<size_t>(root_to_cluster[static_cast<size_t>(r)])];
        cl.edges.push_back(e);
        c.edge_cluster[static_cast<size_t>(e)] = cl.id;
        const Edge& ed = g.edges[static_cast<size_t>(e)];
        cl.param = cl.param || ed.param;
        cl.diagonal = cl.diagonal || ed.diagonal;
        for (const Endpoint& ep : ed.ends) {
            if (!ep.valid()) continue;
            const Node& n = g.nodes[static_cast<size_t>(ep.node)];
            if (n.kind == NodeKind::Equality) {
                if (std::find(cl.eq_nodes.begin(), cl.eq_nodes.end(), n.id) == cl.eq_nodes.end()) cl.eq_nodes.push_back(n.id);
            } else {
                cl.endpoints.push_back(ep);
            }
        }
    }

    for (Cluster& cl : c.clusters) {
        bool clamped = false;
        int expz = -1, expg = -1;
        for (const Endpoint& ep : cl.endpoints) {
            const Node& n = g.nodes[static_cast<size_t>(ep.node)];
            if (n.kind == NodeKind::Clamp || n.kind == NodeKind::Observation ||
                (n.kind == NodeKind::Prior && std::holds_alternative<PointMass>(n.value)))
                clamped = true;
            if (n.kind == NodeKind::ExpLink) (n.ports[static_cast<size_t>(ep.port)].name == "z" ? expz : expg) = n.id;
        }
        if (clamped) cl.cls = ClusterClass::Clamped;
        else if (expz >= 0) cl.cls = ClusterClass::ExpZ;
        else if (expg >= 0) cl.cls = ClusterClass::ExpGamma;
        cl.exp_node = expz >= 0 ? expz : expg;
    }
    return c;
}

// -------------------------------------------------------------- schedule

namespace {

ClusterUpdate make_update(const FactorGraph& g, const Cluster& cl, int phase) {
    ClusterUpdate u{cl.id, phase, {}};
    for (int e : cl.edges)
        for (const Endpoint& ep : g.edges[static_cast<size_t>(e)].ends)
            if (g.nodes[static_cast<size_t>(ep.node)].kind != NodeKind::Equality) u.steps.push_back({ep.node, e, phase});
    for (int e : cl.edges)
        for (const Endpoint& ep : g.edges[static_cast<size_t>(e)].ends)
            if (g.nodes[static_cast<size_t>(ep.node)].kind == NodeKind::Equality) u.steps.push_back({ep.node, e, phase});
    return u;
}

}  // namespace

Schedule build_schedule(const FactorGraph& g) {
    if (!g.terminated()) throw GraphError("build_schedule: graph is not terminated");
    ValidationReport rep = validate_proper(g);
    if (!rep.ok) throw GraphError("build_schedule: graph is not proper: " + rep.violations.front().message);

    Schedule s;
    s.clustering = cluster_edges(g);
    std::vector<bool> done(s.clustering.clusters.size(), false);
    for (const Node& n : g.nodes) {
        if (n.kind != NodeKind::ExpLink) continue;
        s.exp_nodes.push_back(n.id);
        for (const char* port : {"z", "gamma"}) {
            int c = s.clustering.edge_cluster[static_cast<size_t>(g.edge_at(n.id, port))];
            if (done[static_cast<size_t>(c)]) continue;
            done[static_cast<size_t>(c)] = true;
            s.updates.push_back(make_update(g, s.clustering.clusters[static_cast<size_t>(c)], 1));
        }
    }
    for (int pass = 0; pass < 2; ++pass)
        for (const Cluster& cl : s.clustering.clusters) {
            if (done[static_cast<size_t>(cl.id)] || cl.param != (pass == 1)) continue;
            done[static_cast<size_t>(cl.id)] = true;
            s.updates.push_back(make_update(g, cl, pass == 0 ? 3 : 4));
        }
    return s;
}

std::vector<ScheduleStep> Schedule::flattened() const {
    std::vector<ScheduleStep> out;
    for (auto& u : updates) out.insert(out.end(), u.steps.begin(), u.steps.end());
    return out;
}

std::uint64_t Schedule::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
        for (int k = 0; k < 8; ++k) {
            h ^= (v >> (8 * k)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    for (const ScheduleStep& st : flattened()) {
        mix(static_cast<std::uint64_t>(st.node));
        mix(static_cast<std::uint64_t>(st.edge));
        mix(static_cast<std::uint64_t>(st.phase));
    }
    return h;
}

}  // namespace vfg
