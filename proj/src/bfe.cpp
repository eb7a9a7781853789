#include "vfg/bfe.hpp"

#include <cmath>
#include <optional>

#include "vfg/factor_rules.hpp"
#include "vfg/overloaded.hpp"

namespace vfg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool is_joint_group(const Node& n) {
    if (!n.factorization.structured || n.kind != NodeKind::NormalFactor) return false;
    for (auto& grp : n.factorization.groups) {
        bool y = false, mu = false;
        for (auto& p : grp) {
            y = y || p == "y";
            mu = mu || p == "mu";
        }
        if (y && mu) return true;
    }
    return false;
}

Message incoming(const FactorGraph& g, const Marginals& m, int node, int port) {
    const int e = g.nodes[static_cast<size_t>(node)].ports[static_cast<size_t>(port)].edge;
    const Edge& ed = g.edges[static_cast<size_t>(e)];
    const int side = (ed.ends[0].node == node && ed.ends[0].port == port) ? 1 : 0;
    return m.message(e, side);
}

double expected_sq(const Belief& a, const Belief& b) {
    ScalarMoments x = scalar_moments(a), y = scalar_moments(b);
    return (x.mean - y.mean) * (x.mean - y.mean) + x.var + y.var;
}

}  // namespace

PortStats port_stats(const FactorGraph& g, const Clustering& c, const Marginals& m, int edge) {
    const Cluster& cl = c.clusters[static_cast<size_t>(c.edge_cluster[static_cast<size_t>(edge)])];
    const Belief& b = m.belief(edge);
    const double h = entropy(b);
    if (cl.cls == ClusterClass::ExpGamma) {
        const Belief& qz = m.belief(g.edge_at(cl.exp_node, "z"));
        if (auto* gz = std::get_if<GaussianBelief>(&qz))
            return {PointMass::scalar(gaussian_mgf(*gz).value), h, gz->mean()};
        const PointMass& pz = std::get<PointMass>(qz);
        return {PointMass::scalar(gaussian_mgf(pz)), h, pz.as_scalar()};
    }
    double ml = 0.0;
    if (cl.family.kind == FamilyKind::Gamma) ml = gamma_mean_log(b);
    return {b, h, ml};
}

MvGaussianBelief structured_joint(const FactorGraph& g, const Marginals& m, int node, double tau_mean) {
    auto natural = [](const Message& msg, double& xi, double& lam) {
        xi = 0.0;
        lam = 0.0;
        if (auto* gb = std::get_if<GaussianBelief>(&msg)) {
            xi = gb->eta1;
            lam = -2.0 * gb->eta2;
        } else if (!std::holds_alternative<Flat>(msg)) {
            throw FamilyError("structured normal: unsupported incoming " + family_name(msg));
        }
    };
    double xy, ly, xm, lm;
    natural(incoming(g, m, node, g.port_index(node, "y")), xy, ly);
    natural(incoming(g, m, node, g.port_index(node, "mu")), xm, lm);
    Mat lambda(2, 2);
    lambda << ly + tau_mean, -tau_mean, -tau_mean, lm + tau_mean;
    Vec xi(2);
    xi << xy, xm;
    return MvGaussianBelief::from_information(xi, lambda);
}

double cross_entropy(const Belief& q, const Belief& p) {
    return std::visit(
        overloaded{
            [&](const GaussianBelief& pp) {
                ScalarMoments s = scalar_moments(q);
                const double mp = pp.mean(), vp = pp.var();
                return 0.5 * (kLog2Pi + std::log(vp)) + ((s.mean - mp) * (s.mean - mp) + s.var) / (2.0 * vp);
            },
            [&](const MvGaussianBelief& pp) {
                VectorMoments s = vector_moments(q);
                Eigen::LLT<Mat> llt(pp.lambda);
                if (llt.info() != Eigen::Success) throw DegeneracyError("cross_entropy: prior precision not PD");
                const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
                Vec d = s.mean - pp.mean();
                return 0.5 * (pp.dim() * kLog2Pi - logdet) + 0.5 * (d.dot(pp.lambda * d) + (pp.lambda * s.cov).trace());
            },
            [&](const GammaBelief& pp) {
                return -pp.alpha * std::log(pp.beta) + std::lgamma(pp.alpha) - (pp.alpha - 1.0) * gamma_mean_log(q) +
                       pp.beta * gamma_mean(q);
            },
            [&](const PointMass&) { return 0.0; }},
        p);
}

BfeBreakdown bethe_free_energy(const FactorGraph& g, const Marginals& m) {
    return bethe_free_energy(g, cluster_edges(g), m);
}

BfeBreakdown bethe_free_energy(const FactorGraph& g, const Clustering& c, const Marginals& m) {
    if (m.beliefs.size() != g.edges.size()) throw std::invalid_argument("bethe_free_energy: missing marginals");
    BfeBreakdown out;
    out.node_terms.assign(g.nodes.size(), 0.0);
    out.edge_entropies.assign(g.edges.size(), 0.0);

    auto stats = [&](const Node& n, const char* port) { return port_stats(g, c, m, n.ports[static_cast<size_t>(g.port_index(n.id, port))].edge); };

    for (const Node& n : g.nodes) {
        double term = 0.0;
        switch (n.kind) {
            case NodeKind::Softdot: {
                PortStats z = stats(n, "z"), w = stats(n, "w"), phi = stats(n, "phi"), tau = stats(n, "tau");
                VectorMoments wm = vector_moments(w.belief), pm = vector_moments(phi.belief);
                ScalarMoments zm = scalar_moments(z.belief);
                const double r = zm.mean - wm.mean.dot(pm.mean);
                const Mat second = pm.mean * pm.mean.transpose() + pm.cov;
                const double e_sq = r * r + zm.var + (wm.cov * second).trace() + wm.mean.dot(pm.cov * wm.mean);
                term = 0.5 * kLog2Pi - 0.5 * tau.mean_log + 0.5 * gamma_mean(tau.belief) * e_sq;
                term -= z.entropy + w.entropy + phi.entropy + tau.entropy;
                break;
            }
            case NodeKind::NormalFactor: {
                PortStats y = stats(n, "y"), mu = stats(n, "mu"), tau = stats(n, "tau");
                const double t = gamma_mean(tau.belief);
                const bool joint = is_joint_group(n) && !std::holds_alternative<PointMass>(y.belief) &&
                                   !std::holds_alternative<PointMass>(mu.belief);
                std::optional<MvGaussianBelief> q;
                if (joint) {
                    // Before any message has arrived the joint is improper; fall back to q(y)q(mu).
                    try {
                        q = structured_joint(g, m, n.id, t);
                    } catch (const DegeneracyError&) {
                    }
                }
                if (q) {
                    term = 0.5 * kLog2Pi - 0.5 * tau.mean_log + 0.5 * t * joint_expected_sq_diff(*q);
                    term -= entropy(*q) + tau.entropy;
                } else {
                    term = 0.5 * kLog2Pi - 0.5 * tau.mean_log + 0.5 * t * expected_sq(y.belief, mu.belief);
                    term -= y.entropy + mu.entropy + tau.entropy;
                }
                break;
            }
            case NodeKind::GammaFactor: {
                PortStats gm = stats(n, "gamma"), bt = stats(n, "beta");
                term = -n.alpha * bt.mean_log + std::lgamma(n.alpha) - (n.alpha - 1.0) * gm.mean_log +
                       gamma_mean(bt.belief) * gamma_mean(gm.belief);
                term -= gm.entropy + bt.entropy;
                break;
            }
            case NodeKind::ExpLink: {
                // Joint q(z, gamma) = q(z) delta(gamma - e^z): entropy H[q(z)] + E[z].
                const Belief& qz = m.belief(g.edge_at(n.id, "z"));
                term = -(entropy(qz) + scalar_moments(qz).mean);
                break;
            }
            case NodeKind::Equality: term = -entropy(m.belief(n.ports[0].edge)); break;
            case NodeKind::Unity: term = -entropy(m.belief(n.ports[0].edge)); break;
            case NodeKind::Prior: {
                const Belief& q = m.belief(n.ports[0].edge);
                term = cross_entropy(q, n.value) - entropy(q);
                break;
            }
            case NodeKind::Clamp:
            case NodeKind::Observation: break;
        }
        out.node_terms[static_cast<size_t>(n.id)] = term;
    }
    for (const Edge& e : g.edges) out.edge_entropies[static_cast<size_t>(e.id)] = entropy(m.belief(e.id));

    double total = 0.0;
    for (double t : out.node_terms) total += t;
    for (double h : out.edge_entropies) total += h;
    out.total = total;
    return out;
}

}  // namespace vfg
