#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "vfg/data_io.hpp"
#include "vfg/engine.hpp"
#include "vfg/models.hpp"

using namespace vfg;

namespace {

int count_kind(const FactorGraph& g, NodeKind k) {
    return static_cast<int>(std::count_if(g.nodes.begin(), g.nodes.end(), [&](const Node& n) { return n.kind == k; }));
}

std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size()), mean = (n - 1.0) / 2.0;
    double sab = 0, saa = 0, sbb = 0;
    for (size_t k = 0; k < ra.size(); ++k) {
        sab += (ra[k] - mean) * (rb[k] - mean);
        saa += (ra[k] - mean) * (ra[k] - mean);
        sbb += (rb[k] - mean) * (rb[k] - mean);
    }
    return sab / std::sqrt(saa * sbb);
}

std::vector<GaussianBelief> run_prediction(const ModelGraph& mg, int sweeps, double tolerance = 1e-6) {
    InferenceConfig cfg;
    cfg.sweeps = sweeps;
    cfg.solver.tolerance = tolerance;
    cfg.solver.max_iterations = tolerance < 1e-6 ? 100 : 50;
    cfg.initial_beliefs = mg.initial_beliefs;
    Marginals m = infer(mg.graph, cfg);
    return predictive_y(mg.graph, m, mg.y_edges);
}

PgePriors fitted(const EnsembleData& train, bool noisy) {
    const int n = train.n_experts(), d = train.feature_dim();
    ModelGraph mg = noisy ? build_noisy(train, PgePriors::defaults(n, d), false) : build_pge(train, PgePriors::defaults(n, d), false);
    InferenceConfig cfg;
    cfg.initial_beliefs = mg.initial_beliefs;
    return posterior_priors(mg, infer(mg.graph, cfg));
}

}  // namespace

TEST(BuildDepth0, SingleExpertSingleObservation) {
    ModelGraph mg = build_depth0(1, Mat::Constant(1, 1, 0.5), Vec::Constant(1, 1.0), {GammaBelief{1, 1}});
    EXPECT_EQ(count_kind(mg.graph, NodeKind::GammaFactor), 1);
    EXPECT_EQ(count_kind(mg.graph, NodeKind::NormalFactor), 1);
    EXPECT_EQ(count_kind(mg.graph, NodeKind::Equality), 2);
    EXPECT_TRUE(validate_proper(mg.graph).ok);
}

TEST(BuildDepth0, CountsFollowLayout) {
    for (auto [n, m] : {std::pair{2, 3}, std::pair{3, 1}, std::pair{1, 4}}) {
        ModelGraph mg = build_depth0(n, Mat::Zero(n, m), Vec::Zero(m), std::vector<Belief>(static_cast<size_t>(n), GammaBelief{1, 1}));
        // One degree-3 equality per use: n*m on the gamma chains and n*m on the y chains.
        EXPECT_EQ(count_kind(mg.graph, NodeKind::GammaFactor), n);
        EXPECT_EQ(count_kind(mg.graph, NodeKind::NormalFactor), n * m);
        EXPECT_EQ(count_kind(mg.graph, NodeKind::Equality), 2 * n * m);
        EXPECT_EQ(count_kind(mg.graph, NodeKind::Observation), m);
    }
}

TEST(BuildDepth0, RejectsBadShapes) {
    EXPECT_THROW(build_depth0(0, Mat::Zero(0, 2), Vec::Zero(2), {}), ModelError);
    EXPECT_THROW(build_depth0(2, Mat::Zero(1, 2), Vec::Zero(2), {GammaBelief{1, 1}, GammaBelief{1, 1}}), ModelError);
    EXPECT_THROW(build_depth0(1, Mat::Zero(1, 2), Vec::Zero(3), {GammaBelief{1, 1}}), ModelError);
    EXPECT_THROW(build_depth0(1, Mat::Zero(1, 2), Vec::Zero(2), {}), ModelError);
}

TEST(BuildPge, SmallTopology) {
    EnsembleData d{Mat::Constant(1, 1, 0.3), Mat::Constant(1, 1, 0.2), Vec::Constant(1, 0.1)};
    ModelGraph mg = build_pge(d, PgePriors::defaults(1, 2), false);
    const FactorGraph& g = mg.graph;
    EXPECT_TRUE(validate_proper(g).ok);
    EXPECT_EQ(count_kind(g, NodeKind::Softdot), 1);
    EXPECT_EQ(count_kind(g, NodeKind::ExpLink), 1);
    EXPECT_EQ(count_kind(g, NodeKind::GammaFactor), 1);
    EXPECT_EQ(count_kind(g, NodeKind::NormalFactor), 1);
    // gamma edge sits between the exp link and the Eq node feeding GammaFactor and the likelihood.
    const Edge& ge = g.edges[static_cast<size_t>(mg.gamma_edges[0][0])];
    std::vector<NodeKind> ends{g.nodes[static_cast<size_t>(ge.ends[0].node)].kind, g.nodes[static_cast<size_t>(ge.ends[1].node)].kind};
    EXPECT_NE(std::find(ends.begin(), ends.end(), NodeKind::ExpLink), ends.end());
}

TEST(BuildPge, RejectsBadShapes) {
    EnsembleData d{Mat::Zero(3, 2), Mat::Zero(2, 4), Vec::Zero(3)};
    EXPECT_THROW(build_pge(d, PgePriors::defaults(2, 3), false), ModelError);
    EnsembleData ok{Mat::Zero(3, 2), Mat::Zero(2, 3), Vec::Zero(3)};
    EXPECT_THROW(build_pge(ok, PgePriors::defaults(2, 4), false), ModelError);
    EXPECT_THROW(build_pge(ok, PgePriors::defaults(3, 3), false), ModelError);
}

TEST(BuildPge, RecoversPrecisionRanking) {
    SyntheticSpec s;
    s.m = 400;
    s.seed = 11;
    SyntheticData syn = make_synthetic(s);
    const EnsembleData train = slice(syn.data, 0, 200);
    PgePriors post = fitted(train, false);
    for (int i = 0; i < s.n_experts; ++i) {
        const auto& w = std::get<MvGaussianBelief>(post.experts[static_cast<size_t>(i)].w);
        const Vec mu = w.mean();
        std::vector<double> fit, truth;
        for (int j = 200; j < 400; ++j) {
            fit.push_back(mu.dot(syn.data.phi(j)));
            truth.push_back(syn.true_gamma(i, j));
        }
        EXPECT_GE(spearman(fit, truth), 0.8) << "expert " << i;
    }
}

TEST(BuildNoisy, ValidatesInBothModes) {
    SyntheticSpec s;
    s.m = 3;
    s.d = 2;
    EnsembleData d = make_synthetic(s).data;
    EXPECT_TRUE(validate_proper(build_noisy(d, PgePriors::defaults(3, 3), false).graph).ok);
    ModelGraph p = build_noisy(d, PgePriors::defaults(3, 3), true);
    EXPECT_TRUE(validate_proper(p.graph).ok);
    EXPECT_EQ(count_kind(p.graph, NodeKind::Observation), 0);
}

TEST(BuildNoisy, PredictiveVarianceExceedsPge) {
    SyntheticSpec s;
    s.m = 120;
    s.d = 3;
    s.seed = 5;
    SyntheticData syn = make_synthetic(s);
    const EnsembleData train = slice(syn.data, 0, 100), test = slice(syn.data, 100, 120);
    EnsembleData test_x = test;
    test_x.targets.reset();
    auto pge = run_prediction(build_pge(test_x, fitted(train, false), false), 3);
    auto noisy = run_prediction(build_noisy(test_x, fitted(train, true), true), 3);
    ASSERT_EQ(pge.size(), noisy.size());
    for (size_t j = 0; j < pge.size(); ++j) EXPECT_GT(noisy[j].var(), pge[j].var()) << j;
}

TEST(BuildNoisy, HugeKappaCollapsesToPge) {
    SyntheticSpec s;
    s.m = 30;
    s.d = 2;
    SyntheticData syn = make_synthetic(s);
    const EnsembleData train = slice(syn.data, 0, 25);
    EnsembleData test = slice(syn.data, 25, 30);
    test.targets.reset();
    PgePriors post = fitted(train, false);
    PgePriors with_kappa = post;
    for (auto& e : with_kappa.experts) e.kappa = PointMass::scalar(1e14);
    // Different starting points reach the same fixed point; a tight solver tolerance removes the solver slack.
    auto a = run_prediction(build_pge(test, post, false), 40, 1e-10);
    auto b = run_prediction(build_noisy(test, with_kappa, true), 40, 1e-10);
    for (size_t j = 0; j < a.size(); ++j) {
        EXPECT_NEAR(a[j].mean(), b[j].mean(), 1e-8);
        EXPECT_NEAR(a[j].var(), b[j].var(), 1e-8);
    }
}

TEST(BuildDepth2, XorSpecValidates) {
    Mat phi(4, 3);
    for (int k = 0; k < 4; ++k) phi.row(k) = xor_phi(k / 2, k % 2).transpose();
    EXPECT_TRUE(validate_proper(build_depth2(xor_experts(2000.0), phi).graph).ok);
    EXPECT_THROW(build_depth2({}, phi), ModelError);
    EXPECT_THROW(build_depth2(xor_experts(10.0), Mat::Zero(2, 4)), ModelError);
}

TEST(BuildDepth2, XorDominantExperts) {
    // Experts 1, 2, 2, 1 dominate at (0,0), (0,1), (1,0), (1,1).
    const int dominant[4] = {0, 1, 1, 0};
    const auto experts = xor_experts(2000.0);
    for (int k = 0; k < 4; ++k) {
        Depth2Readout r = depth2_point(experts, xor_phi(k / 2, k % 2));
        const int top = r.expert_precision[0] > r.expert_precision[1] ? 0 : 1;
        EXPECT_EQ(top, dominant[k]) << "corner " << k;
        EXPECT_NEAR(r.mean, static_cast<double>(dominant[k]), 1e-3);
    }
}

TEST(BuildDepth2, ZeroRoutingIsSymmetric) {
    Depth2ExpertSpec a;
    a.v = Vec::Zero(3);
    a.wL = xor_phi(0.0, 0.0) * 2.0;
    a.wR = xor_phi(0.0, 0.0) * -1.0;
    a.tau_router = a.tau_expert = 50.0;
    a.yhat = 1.0;
    Depth2ExpertSpec b = a;
    std::swap(b.wL, b.wR);
    const Vec phi = xor_phi(0.3, 0.6);
    Depth2Readout ra = depth2_point({a}, phi), rb = depth2_point({b}, phi);
    EXPECT_NEAR(ra.expert_precision[0], rb.expert_precision[0], 1e-9 * ra.expert_precision[0]);
    EXPECT_NEAR(ra.mean, rb.mean, 1e-12);
}

TEST(BuildDepth2, SerialAndParallelReadoutsMatch) {
    Mat phi(9, 3);
    for (int k = 0; k < 9; ++k) phi.row(k) = xor_phi(0.5 * (k / 3), 0.5 * (k % 3)).transpose();
    auto s = depth2_readout(xor_experts(50.0), phi, {}, false);
    auto p = depth2_readout(xor_experts(50.0), phi, {}, true);
    for (size_t k = 0; k < s.size(); ++k) {
        EXPECT_EQ(s[k].mean, p[k].mean);
        EXPECT_EQ(s[k].std, p[k].std);
    }
}

TEST(TreeExperts, ReproducesLeavesAtCellCentres) {
    const std::array<double, 4> leaves{0.0, 1.0, 2.0, 3.0};
    const auto experts = tree_experts(0.5, 0.5, leaves, 2000.0, 200.0);
    for (double x1 : {0.25, 0.75})
        for (double x2 : {0.25, 0.75}) {
            const double want = leaves[static_cast<size_t>((x1 > 0.5 ? 2 : 0) + (x2 > 0.5 ? 1 : 0))];
            EXPECT_NEAR(depth2_point(experts, xor_phi(x1, x2)).mean, want, 0.05) << x1 << "," << x2;
        }
}

TEST(Metrics, Examples) {
    Metrics a = metrics({GaussianBelief::from_moments(1.0, 1.0)}, Vec::Constant(1, 1.0));
    EXPECT_EQ(a.mse, 0.0);
    EXPECT_NEAR(a.nll, 0.5 * std::log(2.0 * M_PI), 1e-15);
    Metrics b = metrics({GaussianBelief::from_moments(0.0, 1.0)}, Vec::Constant(1, 1.0));
    EXPECT_EQ(b.mse, 1.0);
    EXPECT_NEAR(b.nll, 0.5 * std::log(2.0 * M_PI) + 0.5, 1e-15);
    EXPECT_THROW(metrics({GaussianBelief::from_moments(0, 1)}, Vec::Zero(2)), std::invalid_argument);
}

TEST(Metrics, MatchesTwoPassReference) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    std::vector<GaussianBelief> p;
    Vec y(40);
    for (int j = 0; j < 40; ++j) {
        p.push_back(GaussianBelief::from_moments(nd(rng), std::exp(nd(rng))));
        y(j) = nd(rng);
    }
    double mse = 0.0;
    for (int j = 0; j < 40; ++j) mse += std::pow(p[static_cast<size_t>(j)].mean() - y(j), 2);
    mse /= 40.0;
    double nll = 0.0;
    for (int j = 0; j < 40; ++j) {
        const double v = p[static_cast<size_t>(j)].var(), r = p[static_cast<size_t>(j)].mean() - y(j);
        nll += 0.5 * std::log(2.0 * M_PI * v) + r * r / (2.0 * v);
    }
    nll /= 40.0;
    Metrics m = metrics(p, y);
    EXPECT_NEAR(m.mse, mse, 1e-12);
    EXPECT_NEAR(m.nll, nll, 1e-12);
}

TEST(Synthetic, DeterministicAndShaped) {
    SyntheticSpec s;
    SyntheticData a = make_synthetic(s), b = make_synthetic(s);
    EXPECT_EQ(a.data.predictions, b.data.predictions);
    EXPECT_EQ(a.data.predictions.rows(), 3);
    EXPECT_EQ(a.data.predictions.cols(), 200);
    EXPECT_EQ(a.data.features.cols(), 5);
    s.seed = 8;
    EXPECT_NE(make_synthetic(s).data.predictions, a.data.predictions);
    s.heteroscedastic = false;
    SyntheticData h = make_synthetic(s);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(h.true_gamma.row(i).minCoeff(), h.true_gamma.row(i).maxCoeff());
}

TEST(DataIo, RoundTripAndErrors) {
    const auto dir = std::filesystem::temp_directory_path() / "vfg_models_io";
    std::filesystem::create_directories(dir);
    SyntheticSpec s;
    s.m = 7;
    s.d = 2;
    EnsembleData d = make_synthetic(s).data;
    io::save_ensemble(d, (dir / "f.csv").string(), (dir / "p.csv").string(), (dir / "t.csv").string());
    EnsembleData back = io::load_ensemble((dir / "f.csv").string(), (dir / "p.csv").string(), (dir / "t.csv").string());
    EXPECT_EQ(back.features, d.features);
    EXPECT_EQ(back.predictions, d.predictions);
    ASSERT_TRUE(back.targets.has_value());
    EXPECT_EQ(*back.targets, *d.targets);
    {
        std::ofstream(dir / "empty.csv") << "";
    }
    EXPECT_FALSE(io::load_ensemble((dir / "f.csv").string(), (dir / "p.csv").string(), (dir / "empty.csv").string()).targets);
    {
        std::ofstream(dir / "bad.csv") << "a,b\n1,2\n3\n";
    }
    EXPECT_THROW(io::read_csv((dir / "bad.csv").string()), io::CsvError);
    {
        std::ofstream(dir / "nan.csv") << "a\nfoo\n";
    }
    EXPECT_THROW(io::read_csv((dir / "nan.csv").string()), io::CsvError);
    std::filesystem::remove_all(dir);
}
