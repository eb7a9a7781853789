#include "vfg/engine.hpp"

#include <cmath>
#include <limits>

#include "vfg/factor_rules.hpp"
#include "vfg/overloaded.hpp"

namespace vfg {

namespace {

bool structured_yu(const Node& n) {
    if (!n.factorization.structured || n.kind != NodeKind::NormalFactor) return false;
    for (auto& grp : n.factorization.groups) {
        int hits = 0;
        for (auto& p : grp) hits += (p == "y" || p == "mu");
        if (hits == 2) return true;
    }
    return false;
}

Belief default_belief(const FamilyConstraint& f, bool diagonal) {
    switch (f.kind) {
        case FamilyKind::Gaussian: return GaussianBelief::from_moments(0.0, 1.0);
        case FamilyKind::MvGaussian:
            return MvGaussianBelief::from_moments(Vec::Zero(f.dim), Mat::Identity(f.dim, f.dim), diagonal);
        case FamilyKind::Gamma: return GammaBelief::make(1.0, 1.0);
    }
    throw std::logic_error("unknown family");
}

// 1-d information-form message onto a scalar Gaussian edge.
Message to_scalar(const Message& msg) {
    if (auto* mv = std::get_if<MvGaussianBelief>(&msg)) {
        if (mv->dim() != 1) throw FamilyError("cannot send a multivariate message along a scalar edge");
        const double lam = mv->lambda(0, 0);
        if (!(lam > 0.0)) return Flat{};
        return GaussianBelief{mv->xi(0), -0.5 * lam};
    }
    return msg;
}

Belief normalize(const Message& prod, const Cluster& cl) {
    return std::visit(
        overloaded{[&](const GaussianBelief& g) -> Belief { return GaussianBelief::from_natural(g.eta1, g.eta2); },
                   [&](const MvGaussianBelief& g) -> Belief {
                       MvGaussianBelief b = MvGaussianBelief::from_information(g.xi, g.lambda);
                       return cl.diagonal ? b.diagonal_projection() : b;
                   },
                   [&](const GammaBelief& g) -> Belief { return GammaBelief::make(g.alpha, g.beta); },
                   [&](const Flat&) -> Belief { throw DegeneracyError("no informative message reaches this edge"); },
                   [&](const auto& other) -> Belief {
                       throw FamilyError("unexpected " + family_name(Message(other)) + " in a conjugate product");
                   }},
        prod);
}

class Engine {
  public:
    Engine(const FactorGraph& g, const InferenceConfig& cfg) : g_(g), cfg_(cfg), sched_(build_schedule(g)) {}

    Marginals run() {
        if (cfg_.sweeps < 1) throw std::invalid_argument("InferenceConfig: sweeps must be >= 1");
        cfg_.solver.validate();
        init();
        seed_messages();
        seed_messages();
        m_.bfe_trace.push_back(bfe());
        for (int s = 0; s < cfg_.sweeps; ++s) {
            for (const ClusterUpdate& u : sched_.updates) update(u);
            m_.bfe_trace.push_back(bfe());
            const size_t k = m_.bfe_trace.size();
            if (cfg_.early_stop_delta > 0.0 && std::abs(m_.bfe_trace[k - 1] - m_.bfe_trace[k - 2]) < cfg_.early_stop_delta)
                break;
        }
        return std::move(m_);
    }

  private:
    const FactorGraph& g_;
    InferenceConfig cfg_;
    Schedule sched_;
    Marginals m_;

    const Clustering& clus() const { return sched_.clustering; }
    const Cluster& cluster_of(int edge) const {
        return clus().clusters[static_cast<size_t>(clus().edge_cluster[static_cast<size_t>(edge)])];
    }

    double bfe() {
        try {
            const BfeBreakdown b = bethe_free_energy(g_, clus(), m_);
            std::vector<double> groups(kNodeKindCount + 1, 0.0);
            for (size_t n = 0; n < b.node_terms.size(); ++n) groups[static_cast<size_t>(g_.nodes[n].kind)] += b.node_terms[n];
            for (double h : b.edge_entropies) groups.back() += h;
            m_.bfe_groups.push_back(std::move(groups));
            return b.total;
        } catch (const std::exception& e) {
            throw InferenceError(-1, std::string("free energy evaluation failed: ") + e.what());
        }
    }

    void set_cluster_belief(const Cluster& cl, const Belief& b) {
        for (int e : cl.edges) m_.beliefs[static_cast<size_t>(e)] = b;
    }

    int side_of(int edge, int node) const {
        const Edge& e = g_.edges[static_cast<size_t>(edge)];
        return e.ends[0].node == node ? 0 : 1;
    }
    void store(int edge, int node, const Message& msg) { m_.messages[static_cast<size_t>(2 * edge + side_of(edge, node))] = msg; }

    void init() {
        const size_t ne = g_.edges.size();
        m_.beliefs.assign(ne, PointMass{});
        m_.messages.assign(2 * ne, Flat{});
        m_.status.assign(ne, EdgeStatus{});
        for (const Cluster& cl : clus().clusters) {
            Belief b = default_belief(cl.family, cl.diagonal);
            bool fixed = false;
            for (const Endpoint& ep : cl.endpoints) {
                const Node& n = g_.nodes[static_cast<size_t>(ep.node)];
                if (cl.cls == ClusterClass::Clamped && std::holds_alternative<PointMass>(n.value) && n.is_terminator() &&
                    n.kind != NodeKind::Unity) {
                    b = n.value;
                    fixed = true;
                    break;
                }
            }
            if (!fixed) {
                for (int e : cl.edges) {
                    auto it = cfg_.initial_beliefs.find(e);
                    if (it != cfg_.initial_beliefs.end()) {
                        b = it->second;
                        fixed = true;
                        break;
                    }
                }
            }
            if (!fixed && cl.cls == ClusterClass::Conjugate) {
                Message prod = Flat{};
                for (const Endpoint& ep : cl.endpoints) {
                    const Node& n = g_.nodes[static_cast<size_t>(ep.node)];
                    if (n.kind == NodeKind::Prior) prod = multiply_messages(prod, to_message(n.value));
                }
                if (!std::holds_alternative<Flat>(prod)) {
                    try {
                        b = normalize(prod, cl);
                    } catch (const std::exception& e) {
                        throw InferenceError(cl.edges.front(), std::string("prior product: ") + e.what());
                    }
                }
            }
            if (auto* mv = std::get_if<MvGaussianBelief>(&b); mv && cl.diagonal && !mv->diagonal_only)
                b = mv->diagonal_projection();
            set_cluster_belief(cl, b);
        }
    }

    // Messages implied by the initial beliefs, so that no update starts from an all-Flat neighbourhood.
    void seed_messages() {
        for (const Cluster& cl : clus().clusters)
            for (const Endpoint& ep : cl.endpoints) {
                const Node& n = g_.nodes[static_cast<size_t>(ep.node)];
                if (n.kind == NodeKind::ExpLink) continue;
                try {
                    store(n.ports[static_cast<size_t>(ep.port)].edge, n.id, node_message(ep));
                } catch (const std::exception&) {
                }
            }
    }

    PortStats stats(int edge) const { return port_stats(g_, clus(), m_, edge); }
    Belief port_belief(const Node& n, const char* port) const {
        return stats(n.ports[static_cast<size_t>(g_.port_index(n.id, port))].edge).belief;
    }

    Message incoming(int node, int port) const {
        const int e = g_.nodes[static_cast<size_t>(node)].ports[static_cast<size_t>(port)].edge;
        const Edge& ed = g_.edges[static_cast<size_t>(e)];
        const int side = (ed.ends[0].node == node && ed.ends[0].port == port) ? 1 : 0;
        return m_.message(e, side);
    }

    /// Message from a non-equality, non-exp node toward one of its ports.
    Message node_message(const Endpoint& ep) const {
        const Node& n = g_.nodes[static_cast<size_t>(ep.node)];
        const std::string& port = n.ports[static_cast<size_t>(ep.port)].name;
        const Edge& target = g_.edges[static_cast<size_t>(n.ports[static_cast<size_t>(ep.port)].edge)];
        switch (n.kind) {
            case NodeKind::Softdot: {
                SoftdotInputs in;
                SoftdotPort p = port == "z" ? SoftdotPort::z : port == "w" ? SoftdotPort::w : port == "phi" ? SoftdotPort::phi : SoftdotPort::tau;
                if (p != SoftdotPort::z) in.q_z = port_belief(n, "z");
                if (p != SoftdotPort::w) in.q_w = port_belief(n, "w");
                if (p != SoftdotPort::phi) in.q_phi = port_belief(n, "phi");
                if (p != SoftdotPort::tau) in.q_tau = port_belief(n, "tau");
                Message msg = softdot_message(p, in);
                return target.family.kind == FamilyKind::Gaussian ? to_scalar(msg) : msg;
            }
            case NodeKind::NormalFactor: {
                const bool joint = structured_yu(n) && !std::holds_alternative<PointMass>(port_belief(n, "y")) &&
                                   !std::holds_alternative<PointMass>(port_belief(n, "mu"));
                if (joint) {
                    const double t = gamma_mean(port_belief(n, "tau"));
                    if (port == "y") return normal_bp_to_y(incoming(n.id, g_.port_index(n.id, "mu")), PointMass::scalar(t));
                    if (port == "mu") return normal_bp_to_y(incoming(n.id, g_.port_index(n.id, "y")), PointMass::scalar(t));
                    NormalInputs in;
                    in.q_joint = structured_joint(g_, m_, n.id, t);
                    return normal_message(NormalPort::tau, in);
                }
                NormalInputs in;
                NormalPort p = port == "y" ? NormalPort::y : port == "mu" ? NormalPort::mu : NormalPort::tau;
                if (p != NormalPort::y) in.q_y = port_belief(n, "y");
                if (p != NormalPort::mu) in.q_mu = port_belief(n, "mu");
                if (p != NormalPort::tau) in.q_tau = port_belief(n, "tau");
                return normal_message(p, in);
            }
            case NodeKind::GammaFactor: {
                GammaNodeInputs in;
                in.alpha_clamp = n.alpha;
                if (port == "gamma") {
                    in.q_beta = port_belief(n, "beta");
                    return gamma_node_message(GammaPort::gamma, in);
                }
                in.q_gamma = port_belief(n, "gamma");
                return gamma_node_message(GammaPort::beta, in);
            }
            case NodeKind::Prior: return to_message(n.value);
            case NodeKind::Clamp:
            case NodeKind::Observation: return to_message(n.value);
            case NodeKind::Unity: return Flat{};
            default: throw std::logic_error("node_message: not a stochastic or terminal node");
        }
    }

    /// Messages from the far side of an exp link into its gamma cluster, and their product.
    Message gamma_side_product(const Cluster& gc) {
        Message prod = Flat{};
        for (const Endpoint& ep : gc.endpoints) {
            const Node& n = g_.nodes[static_cast<size_t>(ep.node)];
            if (n.kind == NodeKind::ExpLink) continue;
            Message msg = node_message(ep);
            store(n.ports[static_cast<size_t>(ep.port)].edge, n.id, msg);
            prod = multiply_messages(prod, msg);
        }
        return prod;
    }

    void update(const ClusterUpdate& u) {
        const Cluster& cl = clus().clusters[static_cast<size_t>(u.cluster)];
        const int e0 = cl.edges.front();
        try {
            switch (cl.cls) {
                case ClusterClass::Clamped: update_clamped(cl); break;
                case ClusterClass::ExpZ: update_exp_z(cl); break;
                case ClusterClass::ExpGamma: update_exp_gamma(cl); break;
                case ClusterClass::Conjugate: update_conjugate(cl); break;
            }
        } catch (const InferenceError&) {
            throw;
        } catch (const std::exception& e) {
            throw InferenceError(e0, e.what());
        }
    }

    void update_clamped(const Cluster& cl) {
        for (const Endpoint& ep : cl.endpoints) {
            const Node& n = g_.nodes[static_cast<size_t>(ep.node)];
            const int e = n.ports[static_cast<size_t>(ep.port)].edge;
            if (n.kind == NodeKind::ExpLink) {
                store(e, n.id, Flat{});
                continue;
            }
            store(e, n.id, node_message(ep));
        }
        for (int eq : cl.eq_nodes)
            for (const Port& p : g_.nodes[static_cast<size_t>(eq)].ports) store(p.edge, eq, to_message(m_.belief(p.edge)));
    }

    void update_exp_z(const Cluster& zc) {
        const int exp = zc.exp_node;
        const int ze = g_.edge_at(exp, "z");
        const Endpoint near = g_.other_end(ze, exp, g_.port_index(exp, "z"));
        Message conj_msg = node_message(near);
        store(ze, near.node, conj_msg);

        const Cluster& gc = cluster_of(g_.edge_at(exp, "gamma"));
        Message far;
        if (gc.cls == ClusterClass::Clamped) far = to_message(m_.belief(gc.edges.front()));
        else far = gamma_side_product(gc);
        Message lg_msg = explink_message(ExpPort::z, far);
        store(ze, exp, lg_msg);

        if (auto* pm = std::get_if<PointMass>(&lg_msg)) {
            m_.beliefs[static_cast<size_t>(ze)] = *pm;
            return;
        }
        auto* conj = std::get_if<GaussianBelief>(&conj_msg);
        if (!conj) throw FamilyError("exp link: z-side message must be Gaussian, got " + family_name(conj_msg));
        const LogGammaMessage lg = std::get<LogGammaMessage>(lg_msg);

        // Warm start from the best of the current belief, the Laplace point and the conjugate message.
        std::vector<GaussianBelief> cands;
        if (auto* cur = std::get_if<GaussianBelief>(&m_.beliefs[static_cast<size_t>(ze)])) cands.push_back(*cur);
        try {
            cands.push_back(laplace_init(*conj, lg));
        } catch (const std::exception&) {
        }
        cands.push_back(*conj);
        cands.push_back(GaussianBelief::from_moments(0.0, 1.0));
        GaussianBelief best = cands.front();
        double best_f = std::numeric_limits<double>::infinity();
        for (const GaussianBelief& c : cands) {
            double f;
            try {
                f = local_z_objective(c.natural(), *conj, lg).value;
            } catch (const std::exception&) {
                continue;
            }
            if (std::isfinite(f) && f < best_f) {
                best_f = f;
                best = c;
            }
        }
        if (!std::isfinite(best_f)) throw DegeneracyError("no feasible starting point for the z solve");
        FixedPointResult r = solve_gaussian_edge(*conj, lg, best, cfg_.solver);
        m_.beliefs[static_cast<size_t>(ze)] = r.belief;
        m_.status[static_cast<size_t>(ze)] = {r.iterations_used, r.converged, r.warning};
        m_.solver_iterations += r.iterations_used;
    }

    void update_exp_gamma(const Cluster& gc) {
        const int exp = gc.exp_node;
        const int ze = g_.edge_at(exp, "z"), ge = g_.edge_at(exp, "gamma");
        Message prod = gamma_side_product(gc);
        for (int eq : gc.eq_nodes)
            for (const Port& p : g_.nodes[static_cast<size_t>(eq)].ports) store(p.edge, eq, Flat{});

        const Endpoint near = g_.other_end(ze, exp, g_.port_index(exp, "z"));
        Message ln_msg = explink_message(ExpPort::gamma, m_.message(ze, side_of(ze, near.node)));
        store(ge, exp, ln_msg);
        const LogNormalMessage ln = std::get<LogNormalMessage>(ln_msg);

        auto* msg = std::get_if<GammaBelief>(&prod);
        if (!msg || !(msg->beta > 0.0)) {
            for (int e : gc.edges) m_.status[static_cast<size_t>(e)] = {0, false, "far-side Gamma message improper; q(gamma) kept"};
            return;
        }
        std::vector<GammaBelief> cands;
        if (auto* cur = std::get_if<GammaBelief>(&m_.beliefs[static_cast<size_t>(ge)])) cands.push_back(*cur);
        cands.push_back(moment_init(*msg, ln));
        cands.push_back(GammaBelief{1.0, 1.0});
        GammaBelief best = cands.front();
        double best_f = std::numeric_limits<double>::infinity();
        for (const GammaBelief& c : cands) {
            double f;
            try {
                f = local_gamma_objective(c.natural(), *msg, ln).value;
            } catch (const std::exception&) {
                continue;
            }
            if (std::isfinite(f) && f < best_f) {
                best_f = f;
                best = c;
            }
        }
        if (!std::isfinite(best_f)) {
            for (int e : gc.edges) m_.status[static_cast<size_t>(e)] = {0, false, "no feasible start for the gamma solve"};
            return;
        }
        FixedPointResult r = solve_gamma_edge(*msg, ln, best, cfg_.solver);
        set_cluster_belief(gc, r.belief);
        for (int e : gc.edges) m_.status[static_cast<size_t>(e)] = {r.iterations_used, r.converged, r.warning};
        m_.solver_iterations += r.iterations_used;
    }

    void update_conjugate(const Cluster& cl) {
        Message prod = Flat{};
        for (const Endpoint& ep : cl.endpoints) {
            const Node& n = g_.nodes[static_cast<size_t>(ep.node)];
            Message msg = node_message(ep);
            store(n.ports[static_cast<size_t>(ep.port)].edge, n.id, msg);
            prod = multiply_messages(prod, msg);
        }
        set_cluster_belief(cl, normalize(prod, cl));
        equality_messages(cl);
    }

    // Sum-product inside a cluster tree: message from eq node toward each of its ports.
    void equality_messages(const Cluster& cl) {
        std::map<std::pair<int, int>, Message> memo;
        std::function<Message(int, int)> toward;  // (eq node, port) -> message out of that port
        auto into = [&](int eq, int port) -> Message {
            const int e = g_.nodes[static_cast<size_t>(eq)].ports[static_cast<size_t>(port)].edge;
            const Endpoint o = g_.other_end(e, eq, port);
            if (g_.nodes[static_cast<size_t>(o.node)].kind == NodeKind::Equality) return toward(o.node, o.port);
            return m_.message(e, side_of(e, o.node));
        };
        toward = [&](int eq, int port) -> Message {
            auto key = std::make_pair(eq, port);
            if (auto it = memo.find(key); it != memo.end()) return it->second;
            Message acc = Flat{};
            const Node& n = g_.nodes[static_cast<size_t>(eq)];
            for (int k = 0; k < static_cast<int>(n.ports.size()); ++k)
                if (k != port) acc = multiply_messages(acc, into(eq, k));
            memo.emplace(key, acc);
            return acc;
        };
        for (int eq : cl.eq_nodes) {
            const Node& n = g_.nodes[static_cast<size_t>(eq)];
            for (int k = 0; k < static_cast<int>(n.ports.size()); ++k) store(n.ports[static_cast<size_t>(k)].edge, eq, toward(eq, k));
        }
    }
};

}  // namespace

Marginals infer(const FactorGraph& g, const InferenceConfig& cfg) { return Engine(g, cfg).run(); }

Belief predictive(const FactorGraph& g, const Marginals& m, int target_edge) {
    if (target_edge < 0 || target_edge >= static_cast<int>(g.edges.size())) throw std::out_of_range("predictive: bad edge id");
    Clustering c = cluster_edges(g);
    const Cluster& cl = c.clusters[static_cast<size_t>(c.edge_cluster[static_cast<size_t>(target_edge)])];
    for (const Endpoint& ep : cl.endpoints)
        if (g.nodes[static_cast<size_t>(ep.node)].kind == NodeKind::Observation)
            throw std::invalid_argument("predictive: target edge is observed");
    return m.belief(target_edge);
}

}  // namespace vfg
