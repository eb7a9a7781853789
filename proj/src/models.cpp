#include "vfg/models.hpp"

#include <cmath>
#include <exception>
#include <random>

#include "vfg/bfe.hpp"
#include "vfg/grid_kernels.hpp"

namespace vfg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

/// Distribute `root` to k uses through a chain of degree-3 equality nodes. The last link stays open.
std::vector<int> fan_out(FactorGraph& g, int root, int k) {
    const Edge r = g.edges[static_cast<size_t>(root)];
    const PortFamily pf = r.family.kind == FamilyKind::Gamma ? PortFamily::Gamma : PortFamily::Gaussian;
    auto clone = [&]() {
        const int e = g.add_edge(r.line, r.family, r.label, r.param);
        g.edges[static_cast<size_t>(e)].diagonal = r.diagonal;
        return e;
    };
    std::vector<int> uses;
    int trunk = root;
    for (int i = 0; i < k; ++i) {
        const int eq = g.add_equality(pf, 3, r.label);
        g.connect(eq, "e0", trunk);
        const int use = clone();
        g.connect(eq, "e1", use);
        const int next = clone();
        g.connect(eq, "e2", next);
        uses.push_back(use);
        trunk = next;
    }
    return uses;
}

/// Close an edge with a prior factor or a clamp depending on the belief.
void anchor(FactorGraph& g, int edge, const Belief& b, const std::string& label) {
    if (auto* pm = std::get_if<PointMass>(&b)) g.clamp(edge, *pm, label);
    else g.prior(edge, b, label);
}

int gamma_edge(FactorGraph& g, const std::string& label, bool param = false) {
    return g.add_edge(LineType::Dashed, FamilyConstraint::gamma(), label, param);
}
int scalar_edge(FactorGraph& g, LineType line, const std::string& label) {
    return g.add_edge(line, FamilyConstraint::gaussian(), label);
}

std::string idx(const char* name, int i, int j = -1) {
    std::string s = std::string(name) + "[" + std::to_string(i);
    if (j >= 0) s += "," + std::to_string(j);
    return s + "]";
}

double mean_prediction(const Mat& predictions, int j) { return predictions.col(j).mean(); }

void check_targets(const std::optional<Vec>& targets, int m) {
    if (targets && targets->size() != m)
        throw ModelError("targets has length " + std::to_string(targets->size()) + ", expected " + std::to_string(m));
}

/// y_j edges: root observed or left open, fanned out to n uses. Returns uses[j][i].
std::vector<std::vector<int>> build_y(ModelGraph& mg, const Mat& predictions, const std::optional<Vec>& targets,
                                      bool observe) {
    FactorGraph& g = mg.graph;
    const int n = static_cast<int>(predictions.rows()), m = static_cast<int>(predictions.cols());
    std::vector<std::vector<int>> uses(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) {
        const int y = scalar_edge(g, LineType::Solid, idx("y", j));
        if (observe) g.observe(y, PointMass::scalar((*targets)(j)), idx("y_obs", j));
        else mg.initial_beliefs[y] = GaussianBelief::from_moments(mean_prediction(predictions, j), 1.0);
        mg.y_edges.push_back(y);
        uses[static_cast<size_t>(j)] = fan_out(g, y, n);
    }
    return uses;
}

/** Likelihood of y_j given the expert's prediction and precision edge.
 *
 * Without a noise layer mu is the clamped prediction. With one, mu is a latent pred edge
 * tied to the clamped prediction through a second normal with precision kappa.
 */
void attach_likelihood(ModelGraph& mg, int i, int j, double yhat, int y_use, int gamma_use, int kappa_use,
                       bool prediction_mode) {
    FactorGraph& g = mg.graph;
    const int lik = g.add_normal(idx("lik", i, j));
    g.connect(lik, "y", y_use);
    g.connect(lik, "tau", gamma_use);
    if (kappa_use < 0) {
        const int mu = scalar_edge(g, LineType::Solid, idx("yhat", i, j));
        g.connect(lik, "mu", mu);
        g.clamp(mu, PointMass::scalar(yhat), idx("yhat", i, j));
        return;
    }
    const int pred = scalar_edge(g, LineType::Solid, idx("pred", i, j));
    g.connect(lik, "mu", pred);
    mg.pred_edges[static_cast<size_t>(i)].push_back(pred);
    mg.initial_beliefs[pred] = GaussianBelief::from_moments(yhat, 1.0);
    const int noise = g.add_normal(idx("noise", i, j));
    g.connect(noise, "y", pred);
    g.connect(noise, "tau", kappa_use);
    const int mu = scalar_edge(g, LineType::Solid, idx("yhat", i, j));
    g.connect(noise, "mu", mu);
    g.clamp(mu, PointMass::scalar(yhat), idx("yhat", i, j));
    if (prediction_mode) g.set_structured(lik, {{"y", "mu"}, {"tau"}});
}

ModelGraph build_dynamic(const EnsembleData& data, const PgePriors& priors, bool diagonal, bool noisy,
                         bool prediction_mode) {
    data.validate();
    const int n = data.n_experts(), m = data.n_obs(), d = data.feature_dim();
    if (static_cast<int>(priors.experts.size()) != n)
        throw ModelError("priors given for " + std::to_string(priors.experts.size()) + " experts, data has " +
                         std::to_string(n));
    const bool observe = !prediction_mode && data.targets.has_value();
    if (!prediction_mode && !data.targets) throw ModelError("training requires targets");

    ModelGraph mg;
    FactorGraph& g = mg.graph;
    mg.gamma_edges.assign(static_cast<size_t>(n), {});
    mg.pred_edges.assign(static_cast<size_t>(n), {});
    std::vector<std::vector<int>> y_uses = build_y(mg, data.predictions, data.targets, observe);

    for (int i = 0; i < n; ++i) {
        const ExpertPriors& pr = priors.experts[static_cast<size_t>(i)];
        const int w = g.add_edge(LineType::Solid, FamilyConstraint::mv_gaussian(d), idx("w", i), true);
        g.edges[static_cast<size_t>(w)].diagonal = diagonal;
        Belief wp = pr.w;
        if (auto* mv = std::get_if<MvGaussianBelief>(&wp)) {
            if (mv->dim() != d) throw ModelError("w prior has dimension " + std::to_string(mv->dim()) + ", expected " + std::to_string(d));
            if (diagonal) wp = mv->diagonal_projection();
        }
        anchor(g, w, wp, idx("w_prior", i));
        const int tau = gamma_edge(g, idx("tau", i), true);
        anchor(g, tau, pr.tau, idx("tau_prior", i));
        const int beta = gamma_edge(g, idx("beta", i), true);
        anchor(g, beta, pr.beta, idx("beta_prior", i));
        mg.w_edges.push_back(w);
        mg.tau_edges.push_back(tau);
        mg.beta_edges.push_back(beta);
        std::vector<int> w_uses = fan_out(g, w, m), tau_uses = fan_out(g, tau, m), beta_uses = fan_out(g, beta, m);
        std::vector<int> kappa_uses;
        if (noisy) {
            const int kappa = gamma_edge(g, idx("kappa", i), true);
            anchor(g, kappa, pr.kappa, idx("kappa_prior", i));
            mg.kappa_edges.push_back(kappa);
            kappa_uses = fan_out(g, kappa, m);
        }

        for (int j = 0; j < m; ++j) {
            const size_t sj = static_cast<size_t>(j);
            const int sd = g.add_softdot(idx("softdot", i, j));
            const int z = scalar_edge(g, LineType::DashDot, idx("z", i, j));
            g.connect(sd, "z", z);
            g.connect(sd, "w", w_uses[sj]);
            g.connect(sd, "tau", tau_uses[sj]);
            const int phi = g.add_edge(LineType::Solid, FamilyConstraint::mv_gaussian(d), idx("phi", j));
            g.connect(sd, "phi", phi);
            g.clamp(phi, PointMass::vector(data.phi(j)), idx("phi", j));

            const int ex = g.add_exp(idx("exp", i, j));
            g.connect(ex, "z", z);
            const int gm = gamma_edge(g, idx("gamma", i, j));
            g.connect(ex, "gamma", gm);
            mg.gamma_edges[static_cast<size_t>(i)].push_back(gm);
            const int eq = g.add_equality(PortFamily::Gamma, 3, idx("gamma", i, j));
            g.connect(eq, "e0", gm);
            const int to_prior = gamma_edge(g, idx("gamma", i, j));
            const int to_lik = gamma_edge(g, idx("gamma", i, j));
            g.connect(eq, "e1", to_prior);
            g.connect(eq, "e2", to_lik);
            const int gf = g.add_gamma(1.0, idx("gamma_factor", i, j));
            g.connect(gf, "gamma", to_prior);
            g.connect(gf, "beta", beta_uses[sj]);

            attach_likelihood(mg, i, j, data.predictions(i, j), y_uses[sj][static_cast<size_t>(i)], to_lik,
                              noisy ? kappa_uses[sj] : -1, prediction_mode);
        }
    }
    g.terminate();
    return mg;
}

}  // namespace

Vec EnsembleData::phi(int j) const {
    Vec p(feature_dim());
    p.head(features.cols()) = features.row(j).transpose();
    p(p.size() - 1) = 1.0;
    return p;
}

void EnsembleData::validate() const {
    if (predictions.rows() == 0) throw ModelError("empty model: no experts");
    if (predictions.cols() == 0) throw ModelError("no observations");
    if (features.rows() != predictions.cols())
        throw ModelError("features has " + std::to_string(features.rows()) + " rows, predictions has " +
                         std::to_string(predictions.cols()) + " columns");
    check_targets(targets, n_obs());
    if (!features.allFinite() || !predictions.allFinite() || (targets && !targets->allFinite()))
        throw ModelError("non-finite entries in data");
}

PgePriors PgePriors::defaults(int n, int d) {
    PgePriors p;
    for (int i = 0; i < n; ++i)
        p.experts.push_back({MvGaussianBelief::from_moments(Vec::Zero(d), Mat::Identity(d, d))});
    return p;
}

ModelGraph build_depth0(int n, const Mat& predictions, const std::optional<Vec>& targets,
                        const std::vector<Belief>& gamma_priors, const std::vector<Belief>& kappa_priors,
                        bool prediction_mode) {
    if (n <= 0) throw ModelError("empty model: no experts");
    if (predictions.rows() != n)
        throw ModelError("predictions has " + std::to_string(predictions.rows()) + " rows, expected " + std::to_string(n));
    const int m = static_cast<int>(predictions.cols());
    if (m == 0) throw ModelError("no observations");
    check_targets(targets, m);
    if (static_cast<int>(gamma_priors.size()) != n) throw ModelError("one gamma prior per expert required");
    const bool noisy = !kappa_priors.empty();
    if (noisy && static_cast<int>(kappa_priors.size()) != n) throw ModelError("one kappa prior per expert required");
    const bool observe = targets.has_value() && !prediction_mode;

    ModelGraph mg;
    FactorGraph& g = mg.graph;
    mg.gamma_edges.assign(static_cast<size_t>(n), {});
    mg.pred_edges.assign(static_cast<size_t>(n), {});
    std::vector<std::vector<int>> y_uses = build_y(mg, predictions, targets, observe);

    for (int i = 0; i < n; ++i) {
        const int gm = gamma_edge(g, idx("gamma", i), true);
        mg.static_gamma_edges.push_back(gm);
        const Belief& gp = gamma_priors[static_cast<size_t>(i)];
        if (auto* pm = std::get_if<PointMass>(&gp)) {
            g.clamp(gm, *pm, idx("gamma", i));
        } else {
            const GammaBelief& gb = std::get<GammaBelief>(gp);
            const int gf = g.add_gamma(gb.alpha, idx("gamma_prior", i));
            g.connect(gf, "gamma", gm);
            const int rate = gamma_edge(g, idx("gamma_rate", i));
            g.connect(gf, "beta", rate);
            g.clamp(rate, PointMass::scalar(gb.beta), idx("gamma_rate", i));
        }
        std::vector<int> g_uses = fan_out(g, gm, m);
        mg.gamma_edges[static_cast<size_t>(i)] = g_uses;
        std::vector<int> k_uses;
        if (noisy) {
            const int kappa = gamma_edge(g, idx("kappa", i), true);
            anchor(g, kappa, kappa_priors[static_cast<size_t>(i)], idx("kappa_prior", i));
            mg.kappa_edges.push_back(kappa);
            k_uses = fan_out(g, kappa, m);
        }
        for (int j = 0; j < m; ++j) {
            const size_t sj = static_cast<size_t>(j);
            attach_likelihood(mg, i, j, predictions(i, j), y_uses[sj][static_cast<size_t>(i)], g_uses[sj],
                              noisy ? k_uses[sj] : -1, prediction_mode);
        }
    }
    g.terminate();
    return mg;
}

ModelGraph build_pge(const EnsembleData& data, const PgePriors& priors, bool diagonal) {
    return build_dynamic(data, priors, diagonal, false, !data.targets.has_value());
}

ModelGraph build_noisy(const EnsembleData& data, const PgePriors& priors, bool prediction_mode, bool diagonal) {
    return build_dynamic(data, priors, diagonal, true, prediction_mode);
}

PgePriors posterior_priors(const ModelGraph& mg, const Marginals& m) {
    PgePriors p;
    for (size_t i = 0; i < mg.w_edges.size(); ++i) {
        ExpertPriors e{m.belief(mg.w_edges[i]), m.belief(mg.tau_edges[i]), m.belief(mg.beta_edges[i])};
        if (i < mg.kappa_edges.size()) e.kappa = m.belief(mg.kappa_edges[i]);
        p.experts.push_back(e);
    }
    return p;
}

// ------------------------------------------------------------- depth 2

Depth2Graph build_depth2(const std::vector<Depth2ExpertSpec>& experts, const Mat& phi, const std::optional<Vec>& targets) {
    if (experts.empty()) throw ModelError("depth 2 needs at least one expert");
    const int d = static_cast<int>(phi.cols()), m = static_cast<int>(phi.rows());
    if (m == 0) throw ModelError("no observations");
    check_targets(targets, m);
    for (const auto& e : experts) {
        if (e.v.size() != d || e.wL.size() != d || e.wR.size() != d)
            throw ModelError("expert weight dimension does not match feature dimension " + std::to_string(d));
        if (!(e.tau_router > 0.0) || !(e.tau_expert > 0.0)) throw ModelError("softdot precisions must be positive");
    }
    const int n = static_cast<int>(experts.size());

    Depth2Graph out;
    FactorGraph& g = out.graph;
    for (auto* v : {&out.gamma_r, &out.gamma_l, &out.kappa_r, &out.kappa_l}) v->assign(static_cast<size_t>(n), {});

    auto clamped_softdot = [&](const std::string& label, const Vec& w, int phi_edge, double tau, int z_edge) {
        const int sd = g.add_softdot(label);
        const int we = g.add_edge(LineType::Solid, FamilyConstraint::mv_gaussian(static_cast<int>(w.size())), label + ".w");
        g.connect(sd, "w", we);
        g.clamp(we, PointMass::vector(w), label + ".w");
        g.connect(sd, "phi", phi_edge);
        const int te = gamma_edge(g, label + ".tau");
        g.connect(sd, "tau", te);
        g.clamp(te, PointMass::scalar(tau), label + ".tau");
        g.connect(sd, "z", z_edge);
    };
    auto phi_clamp = [&](int j) {
        const int e = g.add_edge(LineType::Solid, FamilyConstraint::mv_gaussian(d), idx("phi", j));
        g.clamp(e, PointMass::vector(phi.row(j).transpose()), idx("phi", j));
        return e;
    };

    for (int j = 0; j < m; ++j) {
        const int y = scalar_edge(g, LineType::Solid, idx("y", j));
        if (targets) g.observe(y, PointMass::scalar((*targets)(j)), idx("y_obs", j));
        double yhat_mean = 0.0;
        for (const auto& e : experts) yhat_mean += e.yhat / n;
        out.initial_beliefs[y] = GaussianBelief::from_moments(yhat_mean, 1.0);
        out.y_edges.push_back(y);
        std::vector<int> y_uses = fan_out(g, y, 2 * n);

        for (int i = 0; i < n; ++i) {
            const Depth2ExpertSpec& ex = experts[static_cast<size_t>(i)];
            const int h = scalar_edge(g, LineType::Solid, idx("h", i, j));
            clamped_softdot(idx("router", i, j), ex.v, phi_clamp(j), ex.tau_router, h);
            const int eq_h = g.add_equality(PortFamily::Gaussian, 3, idx("h", i, j));
            g.connect(eq_h, "e0", h);

            for (int b = 0; b < 2; ++b) {
                const bool right = b == 0;
                const std::string tag = right ? "R" : "L";
                auto lab = [&](const char* s) { return idx((std::string(s) + tag).c_str(), i, j); };
                // Switch: z_sw = sign * h with sign -1 on the right branch, so kappa^R = exp(-h).
                const int h_use = scalar_edge(g, LineType::Solid, idx("h", i, j));
                g.connect(eq_h, right ? "e1" : "e2", h_use);
                const int z_sw = scalar_edge(g, LineType::DashDot, lab("s"));
                clamped_softdot(lab("switch"), Vec::Constant(1, right ? -1.0 : 1.0), h_use, ex.tau_router, z_sw);
                const int ex_sw = g.add_exp(lab("exp_switch"));
                g.connect(ex_sw, "z", z_sw);
                const int kappa = gamma_edge(g, lab("kappa"));
                g.connect(ex_sw, "gamma", kappa);

                const int zb = scalar_edge(g, LineType::Solid, lab("z"));
                clamped_softdot(lab("expert"), right ? ex.wR : ex.wL, phi_clamp(j), ex.tau_expert, zb);

                const int gate = g.add_normal(lab("gate"));
                const int mb = scalar_edge(g, LineType::DashDot, lab("m"));
                g.connect(gate, "y", mb);
                g.connect(gate, "mu", zb);
                g.connect(gate, "tau", kappa);

                const int ex_m = g.add_exp(lab("exp"));
                g.connect(ex_m, "z", mb);
                const int gm = gamma_edge(g, lab("gamma"));
                g.connect(ex_m, "gamma", gm);

                const int lik = g.add_normal(lab("lik"));
                g.connect(lik, "tau", gm);
                g.connect(lik, "y", y_uses[static_cast<size_t>(2 * i + b)]);
                const int mu = scalar_edge(g, LineType::Solid, idx("yhat", i));
                g.connect(lik, "mu", mu);
                g.clamp(mu, PointMass::scalar(ex.yhat), idx("yhat", i));

                (right ? out.gamma_r : out.gamma_l)[static_cast<size_t>(i)].push_back(gm);
                (right ? out.kappa_r : out.kappa_l)[static_cast<size_t>(i)].push_back(kappa);
            }
        }
    }
    g.terminate();
    return out;
}

Depth2Readout depth2_point(const std::vector<Depth2ExpertSpec>& experts, const Vec& phi, const InferenceConfig& cfg) {
    Depth2Graph dg = build_depth2(experts, phi.transpose());
    InferenceConfig c = cfg;
    for (auto& [e, b] : dg.initial_beliefs) c.initial_beliefs.emplace(e, b);
    Marginals m = infer(dg.graph, c);
    const auto& q = std::get<GaussianBelief>(m.belief(dg.y_edges[0]));
    Depth2Readout r{q.mean(), std::sqrt(q.var()), {}};
    const Clustering cl = cluster_edges(dg.graph);
    for (size_t i = 0; i < experts.size(); ++i) {
        double p = 0.0;
        for (int e : {dg.gamma_r[i][0], dg.gamma_l[i][0]})
            p += std::get<PointMass>(port_stats(dg.graph, cl, m, e).belief).as_scalar();
        r.expert_precision.push_back(p);
    }
    return r;
}

std::vector<Depth2Readout> depth2_readout(const std::vector<Depth2ExpertSpec>& experts, const Mat& phi,
                                          const InferenceConfig& cfg, bool parallel) {
    const int n = static_cast<int>(phi.rows());
    std::vector<Depth2Readout> out(static_cast<size_t>(n));
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
    for (int k = 0; k < n; ++k) {
        try {
            out[static_cast<size_t>(k)] = depth2_point(experts, phi.row(k).transpose(), cfg);
        } catch (...) {
#pragma omp critical(vfg_depth2_err)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

std::vector<Depth2ExpertSpec> xor_experts(double tau) {
    Vec wL(3), wR(3), v1(3), v2(3);
    v1 << 14, 0, -7;
    v2 << -14, 0, 7;
    wL << 0, 10, 0;
    wR << 0, -10, 10;
    return {{v1, wL, wR, tau, tau, 0.0}, {v2, wL, wR, tau, tau, 1.0}};
}

Vec xor_phi(double x1, double x2) {
    Vec p(3);
    p << x1, x2, 1.0;
    return p;
}

std::vector<GridPoint> xor_grid(double tau, int n, const InferenceConfig& cfg, bool parallel) {
    if (!(tau > 0.0)) throw ModelError("tau must be positive");
    if (n < 1) throw ModelError("grid size must be >= 1");
    const std::vector<double> xs = kernels::linspace(0.0, 1.0, n);
    Mat phi(n * n, 3);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) phi.row(a * n + b) = xor_phi(xs[static_cast<size_t>(a)], xs[static_cast<size_t>(b)]).transpose();
    std::vector<Depth2Readout> r = depth2_readout(xor_experts(tau), phi, cfg, parallel);
    std::vector<GridPoint> out;
    for (int k = 0; k < n * n; ++k)
        out.push_back({phi(k, 0), phi(k, 1), r[static_cast<size_t>(k)].mean, r[static_cast<size_t>(k)].std});
    return out;
}

std::vector<Depth2ExpertSpec> tree_experts(double s1, double s2, const std::array<double, 4>& leaves, double tau,
                                           double slope) {
    constexpr double kHigh = 10.0;
    Vec off(3);
    off << 0.0, 0.0, -kHigh;
    std::vector<Depth2ExpertSpec> out;
    for (int k = 0; k < 4; ++k) {
        const bool x1_high = k >= 2, x2_high = (k % 2) == 1;
        Vec v(3), w(3);
        v << slope, 0.0, -slope * s1;  // h < 0 (right branch active) when x1 < s1
        const double sgn = x2_high ? 1.0 : -1.0;
        w << 0.0, sgn * slope, kHigh - sgn * slope * s2;
        Depth2ExpertSpec e;
        e.v = v;
        e.wR = x1_high ? off : w;
        e.wL = x1_high ? w : off;
        e.tau_router = e.tau_expert = tau;
        e.yhat = leaves[static_cast<size_t>(k)];
        out.push_back(e);
    }
    return out;
}

// ------------------------------------------------------------- metrics and data

Metrics metrics(const std::vector<GaussianBelief>& predictive, const Vec& targets) {
    if (static_cast<int>(predictive.size()) != targets.size())
        throw ModelError("metrics: " + std::to_string(predictive.size()) + " predictions for " +
                         std::to_string(targets.size()) + " targets");
    if (predictive.empty()) throw ModelError("metrics: empty input");
    Metrics r;
    for (size_t j = 0; j < predictive.size(); ++j) {
        const double v = predictive[j].var();
        if (!(v > 0.0)) throw ModelError("metrics: non-positive predictive variance");
        const double e = predictive[j].mean() - targets(static_cast<Eigen::Index>(j));
        r.mse += e * e;
        r.nll += 0.5 * (kLog2Pi + std::log(v)) + e * e / (2.0 * v);
    }
    r.mse /= static_cast<double>(predictive.size());
    r.nll /= static_cast<double>(predictive.size());
    return r;
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    if (spec.n_experts < 1 || spec.m < 1 || spec.d < 0) throw ModelError("synthetic: bad sizes");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const int n = spec.n_experts, m = spec.m, d = spec.d;

    SyntheticData s;
    s.w_true = Mat::Zero(n, d + 1);
    const double scale = d > 0 ? 2.5 / std::sqrt(static_cast<double>(d)) : 0.0;
    for (int i = 0; i < n; ++i) {
        if (spec.heteroscedastic)
            for (int k = 0; k < d; ++k) s.w_true(i, k) = scale * normal(rng);
        s.w_true(i, d) = unif(rng);
    }
    s.data.features.resize(m, d);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < d; ++k) s.data.features(j, k) = unif(rng);
    Vec y(m);
    for (int j = 0; j < m; ++j) y(j) = normal(rng);
    s.data.targets = y;
    s.true_gamma.resize(n, m);
    s.data.predictions.resize(n, m);
    for (int j = 0; j < m; ++j) {
        const Vec phi = s.data.phi(j);
        for (int i = 0; i < n; ++i) {
            const double gam = std::exp(s.w_true.row(i).dot(phi));
            s.true_gamma(i, j) = gam;
            s.data.predictions(i, j) = y(j) + normal(rng) / std::sqrt(gam);
        }
    }
    return s;
}

EnsembleData slice(const EnsembleData& d, int begin, int end) {
    if (begin < 0 || end > d.n_obs() || begin >= end) throw ModelError("slice: bad range");
    EnsembleData out;
    out.features = d.features.middleRows(begin, end - begin);
    out.predictions = d.predictions.middleCols(begin, end - begin);
    if (d.targets) out.targets = d.targets->segment(begin, end - begin);
    return out;
}

std::vector<GaussianBelief> predictive_y(const FactorGraph& g, const Marginals& m, const std::vector<int>& y_edges) {
    std::vector<GaussianBelief> out;
    for (int e : y_edges) {
        Belief b = predictive(g, m, e);
        auto* gb = std::get_if<GaussianBelief>(&b);
        if (!gb) throw ModelError("predictive belief on edge " + std::to_string(e) + " is " + family_name(b));
        out.push_back(*gb);
    }
    return out;
}

}  // namespace vfg
