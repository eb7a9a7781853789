#include "vfg/graph_json.hpp"

#include <map>

#include "vfg/overloaded.hpp"

namespace vfg {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vec json_vec(const json& j) {
    if (!j.is_array()) throw GraphParseError("expected a numeric array");
    Vec v(static_cast<int>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw GraphParseError("expected a number");
        v(static_cast<int>(i)) = j[i].get<double>();
    }
    return v;
}

json mat_json(const Mat& m) {
    json a = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        a.push_back(row);
    }
    return a;
}

Mat json_mat(const json& j) {
    if (!j.is_array() || j.empty()) throw GraphParseError("expected a matrix");
    Mat m(static_cast<int>(j.size()), static_cast<int>(j[0].size()));
    for (size_t i = 0; i < j.size(); ++i) {
        Vec row = json_vec(j[i]);
        if (row.size() != m.cols()) throw GraphParseError("ragged matrix");
        m.row(static_cast<int>(i)) = row.transpose();
    }
    return m;
}

const std::map<std::string, NodeKind> kKinds = {
    {"softdot", NodeKind::Softdot},         {"exp", NodeKind::ExpLink},       {"gamma", NodeKind::GammaFactor},
    {"normal", NodeKind::NormalFactor},     {"equality", NodeKind::Equality}, {"clamp", NodeKind::Clamp},
    {"observation", NodeKind::Observation}, {"unity", NodeKind::Unity},       {"prior", NodeKind::Prior}};

const std::map<std::string, LineType> kLines = {
    {"solid", LineType::Solid}, {"dashed", LineType::Dashed}, {"dashdot", LineType::DashDot}};

template <class T>
T lookup(const std::map<std::string, T>& m, const json& j, const char* what) {
    if (!j.is_string()) throw GraphParseError(std::string(what) + " must be a string");
    auto it = m.find(j.get<std::string>());
    if (it == m.end()) throw GraphParseError(std::string("unknown ") + what + " '" + j.get<std::string>() + "'");
    return it->second;
}

const json& field(const json& j, const char* key) {
    if (!j.contains(key)) throw GraphParseError(std::string("missing field '") + key + "'");
    return j.at(key);
}

}  // namespace

json belief_to_json(const Belief& b) {
    return std::visit(
        overloaded{[](const GaussianBelief& g) {
                       return json{{"family", "gaussian"}, {"mean", g.mean()}, {"var", g.var()}};
                   },
                   [](const MvGaussianBelief& g) {
                       return json{{"family", "mvgaussian"}, {"mean", vec_json(g.mean())},
                                   {"cov", mat_json(g.cov())}, {"diagonal", g.diagonal_only}};
                   },
                   [](const GammaBelief& g) {
                       return json{{"family", "gamma"}, {"alpha", g.alpha}, {"beta", g.beta}};
                   },
                   [](const PointMass& p) { return json{{"family", "pointmass"}, {"value", vec_json(p.value)}}; }},
        b);
}

Belief belief_from_json(const json& j) {
    try {
        const std::string fam = field(j, "family").get<std::string>();
        if (fam == "gaussian") return GaussianBelief::from_moments(field(j, "mean").get<double>(), field(j, "var").get<double>());
        if (fam == "mvgaussian")
            return MvGaussianBelief::from_moments(json_vec(field(j, "mean")), json_mat(field(j, "cov")),
                                                  j.value("diagonal", false));
        if (fam == "gamma") return GammaBelief::make(field(j, "alpha").get<double>(), field(j, "beta").get<double>());
        if (fam == "pointmass") return PointMass::vector(json_vec(field(j, "value")));
        throw GraphParseError("unknown belief family '" + fam + "'");
    } catch (const json::exception& e) {
        throw GraphParseError(std::string("belief: ") + e.what());
    } catch (const DegeneracyError& e) {
        throw GraphParseError(std::string("belief: ") + e.what());
    }
}

json graph_to_json(const FactorGraph& g) {
    json nodes = json::array(), edges = json::array();
    for (const Node& n : g.nodes) {
        json jn{{"id", n.id}, {"kind", to_string(n.kind)}};
        if (!n.label.empty()) jn["label"] = n.label;
        switch (n.kind) {
            case NodeKind::GammaFactor: jn["alpha"] = n.alpha; break;
            case NodeKind::Clamp:
            case NodeKind::Observation: jn["value"] = vec_json(std::get<PointMass>(n.value).value); break;
            case NodeKind::Prior: jn["prior"] = belief_to_json(n.value); break;
            case NodeKind::Equality:
                jn["family"] = n.ports[0].family == PortFamily::Gamma ? "gamma" : "gaussian";
                jn["degree"] = n.ports.size();
                break;
            default: break;
        }
        if (n.factorization.structured && !n.is_deterministic()) jn["structured"] = n.factorization.groups;
        nodes.push_back(jn);
    }
    for (const Edge& e : g.edges) {
        json je{{"id", e.id}, {"line", to_string(e.line)}, {"family", to_string(e.family.kind)}};
        if (e.family.kind == FamilyKind::MvGaussian) je["dim"] = e.family.dim;
        if (!e.label.empty()) je["label"] = e.label;
        if (e.param) je["param"] = true;
        if (e.diagonal) je["diagonal"] = true;
        json ends = json::array();
        for (const Endpoint& ep : e.ends)
            if (ep.valid())
                ends.push_back({{"node", ep.node},
                                {"port", g.nodes[static_cast<size_t>(ep.node)].ports[static_cast<size_t>(ep.port)].name}});
        je["endpoints"] = ends;
        edges.push_back(je);
    }
    return json{{"nodes", nodes}, {"edges", edges}};
}

FactorGraph graph_from_json(const json& j) {
    try {
        if (!j.is_object()) throw GraphParseError("graph document must be an object");
        FactorGraph g;
        const json& nodes = field(j, "nodes");
        const json& edges = field(j, "edges");
        if (!nodes.is_array() || !edges.is_array()) throw GraphParseError("'nodes' and 'edges' must be arrays");
        for (size_t i = 0; i < nodes.size(); ++i) {
            const json& jn = nodes[i];
            if (field(jn, "id").get<int>() != static_cast<int>(i)) throw GraphParseError("node ids must be 0..n-1 in order");
            NodeKind kind = lookup(kKinds, field(jn, "kind"), "node kind");
            PortFamily fam = PortFamily::Gaussian;
            int degree = 3;
            if (kind == NodeKind::Equality) {
                fam = field(jn, "family").get<std::string>() == "gamma" ? PortFamily::Gamma : PortFamily::Gaussian;
                degree = field(jn, "degree").get<int>();
            }
            int id;
            try {
                id = g.add_node(kind, jn.value("label", std::string{}), degree, fam);
            } catch (const GraphError& e) {
                throw GraphParseError(e.what());
            }
            Node& n = g.nodes[static_cast<size_t>(id)];
            if (kind == NodeKind::GammaFactor) n.alpha = field(jn, "alpha").get<double>();
            if (kind == NodeKind::Clamp || kind == NodeKind::Observation) n.value = PointMass::vector(json_vec(field(jn, "value")));
            if (kind == NodeKind::Prior) n.value = belief_from_json(field(jn, "prior"));
            if (jn.contains("structured")) n.factorization = {true, jn.at("structured").get<std::vector<std::vector<std::string>>>()};
        }
        for (size_t i = 0; i < edges.size(); ++i) {
            const json& je = edges[i];
            if (field(je, "id").get<int>() != static_cast<int>(i)) throw GraphParseError("edge ids must be 0..n-1 in order");
            Edge e;
            e.id = static_cast<int>(i);
            e.line = lookup(kLines, field(je, "line"), "line type");
            const std::string fam = field(je, "family").get<std::string>();
            if (fam == "gaussian") e.family = FamilyConstraint::gaussian();
            else if (fam == "gamma") e.family = FamilyConstraint::gamma();
            else if (fam == "mvgaussian") e.family = FamilyConstraint::mv_gaussian(field(je, "dim").get<int>());
            else throw GraphParseError("unknown edge family '" + fam + "'");
            e.label = je.value("label", std::string{});
            e.param = je.value("param", false);
            e.diagonal = je.value("diagonal", false);
            g.edges.push_back(e);
            const json& ends = field(je, "endpoints");
            if (!ends.is_array() || ends.size() > 2) throw GraphParseError("an edge has at most two endpoints");
            for (const json& ep : ends) {
                int node = field(ep, "node").get<int>();
                if (node < 0 || node >= static_cast<int>(g.nodes.size())) throw GraphParseError("endpoint node out of range");
                try {
                    g.attach(node, field(ep, "port").get<std::string>(), e.id);
                } catch (const GraphError& err) {
                    throw GraphParseError(err.what());
                }
            }
        }
        return g;
    } catch (const json::exception& e) {
        throw GraphParseError(std::string("graph document: ") + e.what());
    } catch (const DegeneracyError& e) {
        throw GraphParseError(std::string("graph document: ") + e.what());
    }
}

}  // namespace vfg
