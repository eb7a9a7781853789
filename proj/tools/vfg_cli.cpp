// vfg: validate graphs, run the XOR demo, fit and predict ensemble models.
//
// Exit codes: 0 success, 1 domain failure, 2 usage or parse failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "vfg/data_io.hpp"
#include "vfg/engine.hpp"
#include "vfg/graph_json.hpp"
#include "vfg/models.hpp"

using nlohmann::json;
using namespace vfg;
namespace fs = std::filesystem;

namespace {

/// Usage or parse failure (exit 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Model { Static, Pge, PgeDiag, Noisy, NoisyDiag, Depth2Xor };

const std::map<std::string, Model> kModels = {{"static", Model::Static}, {"pge", Model::Pge},
                                              {"pge-diag", Model::PgeDiag}, {"noisy", Model::Noisy},
                                              {"noisy-diag", Model::NoisyDiag}, {"depth2-xor", Model::Depth2Xor}};

std::string model_name(Model m) {
    for (const auto& [k, v] : kModels)
        if (v == m) return k;
    return "?";
}

struct RunConfig {
    std::string model = "pge";
    int sweeps = 5;
    int prediction_sweeps = 3;
    SolverConfig solver;
    std::uint64_t seed = 7;
    double tau = 500.0;
    std::string features, predictions, targets, posterior, out;
};

template <class T>
void take(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& keys, const std::string& where) {
    if (!j.is_object()) throw UsageError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!keys.count(k)) throw UsageError(where + ": unknown key '" + k + "'");
}

void load_config(const std::string& path, RunConfig& rc) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
        reject_unknown(j,
                       {"model", "sweeps", "prediction_sweeps", "solver", "seed", "tau", "features", "predictions", "targets",
                        "posterior", "out"},
                       "config");
        take(j, "model", rc.model);
        take(j, "sweeps", rc.sweeps);
        take(j, "prediction_sweeps", rc.prediction_sweeps);
        take(j, "seed", rc.seed);
        take(j, "tau", rc.tau);
        take(j, "features", rc.features);
        take(j, "predictions", rc.predictions);
        take(j, "targets", rc.targets);
        take(j, "posterior", rc.posterior);
        take(j, "out", rc.out);
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            reject_unknown(s, {"initial_step", "max_step_norm", "max_iterations", "tolerance", "armijo_shrink", "armijo_slope"},
                           "config.solver");
            take(s, "initial_step", rc.solver.initial_step);
            take(s, "max_step_norm", rc.solver.max_step_norm);
            take(s, "max_iterations", rc.solver.max_iterations);
            take(s, "tolerance", rc.solver.tolerance);
            take(s, "armijo_shrink", rc.solver.armijo_shrink);
            take(s, "armijo_slope", rc.solver.armijo_slope);
        }
    } catch (const json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
}

Model parse_model(const std::string& s) {
    auto it = kModels.find(s);
    if (it == kModels.end()) throw UsageError("unknown model '" + s + "'");
    return it->second;
}

void check(const RunConfig& rc) {
    if (rc.sweeps < 1 || rc.prediction_sweeps < 1) throw UsageError("sweep counts must be >= 1");
    if (!(rc.tau > 0.0)) throw UsageError("--tau must be positive");
    try {
        rc.solver.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json marginals_json(const FactorGraph& g, const Marginals& m) {
    json beliefs = json::array();
    for (size_t e = 0; e < m.beliefs.size(); ++e) {
        json b{{"edge", e}, {"belief", belief_to_json(m.beliefs[e])}};
        if (!g.edges[e].label.empty()) b["label"] = g.edges[e].label;
        const EdgeStatus& s = m.status[e];
        if (s.iterations > 0 || !s.converged) {
            b["solver_iterations"] = s.iterations;
            b["converged"] = s.converged;
            if (!s.warning.empty()) b["warning"] = s.warning;
        }
        beliefs.push_back(std::move(b));
    }
    return {{"beliefs", beliefs}, {"bfe_trace", m.bfe_trace}};
}

void write_trace(const std::string& path, const Marginals& m) {
    std::vector<std::string> header{"iteration", "total"};
    for (int k = 0; k < kNodeKindCount; ++k) header.push_back(to_string(static_cast<NodeKind>(k)));
    header.push_back("edge_entropy");
    Mat rows(static_cast<int>(m.bfe_trace.size()), static_cast<int>(header.size()));
    for (int r = 0; r < rows.rows(); ++r) {
        rows(r, 0) = r;
        rows(r, 1) = m.bfe_trace[static_cast<size_t>(r)];
        for (size_t c = 0; c < m.bfe_groups[static_cast<size_t>(r)].size(); ++c)
            rows(r, static_cast<int>(c) + 2) = m.bfe_groups[static_cast<size_t>(r)][c];
    }
    io::write_csv(path, header, rows);
}

json metrics_json(const Metrics& mt) { return {{"mse", mt.mse}, {"nll", mt.nll}}; }

InferenceConfig inference(const RunConfig& rc, int sweeps, const std::map<int, Belief>& init) {
    InferenceConfig cfg;
    cfg.sweeps = sweeps;
    cfg.solver = rc.solver;
    cfg.initial_beliefs = init;
    return cfg;
}

// ------------------------------------------------------------------ posterior file

json priors_json(const PgePriors& p) {
    json experts = json::array();
    for (const ExpertPriors& e : p.experts)
        experts.push_back({{"w", belief_to_json(e.w)},
                           {"tau", belief_to_json(e.tau)},
                           {"beta", belief_to_json(e.beta)},
                           {"kappa", belief_to_json(e.kappa)}});
    return experts;
}

PgePriors priors_from_json(const json& j) {
    PgePriors p;
    for (const json& e : j) {
        reject_unknown(e, {"w", "tau", "beta", "kappa"}, "posterior expert");
        p.experts.push_back({belief_from_json(e.at("w")), belief_from_json(e.at("tau")), belief_from_json(e.at("beta")),
                             belief_from_json(e.at("kappa"))});
    }
    return p;
}

// ------------------------------------------------------------------ fit / predict

struct Prediction {
    std::vector<GaussianBelief> y;
    json marginals;
    Marginals m;
};

Prediction predict_static(const RunConfig& rc, const EnsembleData& d, const std::vector<Belief>& gammas) {
    ModelGraph mg = build_depth0(d.n_experts(), d.predictions, std::nullopt, gammas);
    Marginals m = infer(mg.graph, inference(rc, rc.prediction_sweeps, mg.initial_beliefs));
    return {predictive_y(mg.graph, m, mg.y_edges), marginals_json(mg.graph, m), m};
}

Prediction predict_pge(const RunConfig& rc, Model model, EnsembleData d, const PgePriors& post) {
    d.targets.reset();
    const bool diag = model == Model::PgeDiag || model == Model::NoisyDiag;
    ModelGraph mg = (model == Model::Noisy || model == Model::NoisyDiag) ? build_noisy(d, post, true, diag)
                                                                         : build_pge(d, post, diag);
    Marginals m = infer(mg.graph, inference(rc, rc.prediction_sweeps, mg.initial_beliefs));
    return {predictive_y(mg.graph, m, mg.y_edges), marginals_json(mg.graph, m), m};
}

Prediction predict_xor(const RunConfig& rc, const EnsembleData& d) {
    if (d.features.cols() != 2) throw ModelError("depth2-xor needs 2 feature columns, got " + std::to_string(d.features.cols()));
    Mat phi(d.features.rows(), 3);
    for (int j = 0; j < phi.rows(); ++j) phi.row(j) = xor_phi(d.features(j, 0), d.features(j, 1)).transpose();
    const auto experts = xor_experts(rc.tau);
    Depth2Graph g = build_depth2(experts, phi);
    InferenceConfig cfg = inference(rc, rc.prediction_sweeps, g.initial_beliefs);
    Marginals m = infer(g.graph, cfg);
    return {predictive_y(g.graph, m, g.y_edges), marginals_json(g.graph, m), m};
}

void write_prediction(const std::string& dir, const Prediction& p, const std::optional<Vec>& targets) {
    Mat rows(static_cast<int>(p.y.size()), 2);
    for (int j = 0; j < rows.rows(); ++j) {
        rows(j, 0) = p.y[static_cast<size_t>(j)].mean();
        rows(j, 1) = p.y[static_cast<size_t>(j)].var();
    }
    io::write_csv(dir + "/predictive.csv", {"mean", "var"}, rows);
    write_text(dir + "/marginals.json", dump(p.marginals));
    write_trace(dir + "/bfe_trace.csv", p.m);
    if (targets) {
        const json mt = metrics_json(metrics(p.y, *targets));
        write_text(dir + "/metrics.json", dump(mt));
        std::cout << mt.dump() << "\n";
    }
}

EnsembleData load(const RunConfig& rc) {
    if (rc.features.empty() || rc.predictions.empty()) throw UsageError("--features and --predictions are required");
    return io::load_ensemble(rc.features, rc.predictions, rc.targets);
}

std::string out_dir(const RunConfig& rc) {
    if (rc.out.empty()) throw UsageError("--out is required");
    fs::create_directories(rc.out);
    return rc.out;
}

int cmd_fit(const RunConfig& rc) {
    const Model model = parse_model(rc.model);
    if (model == Model::Depth2Xor) throw UsageError("depth2-xor has fixed weights; use predict or xor");
    const EnsembleData d = load(rc);
    if (!d.targets) throw UsageError("fit needs a non-empty --targets file");
    const std::string dir = out_dir(rc);
    const int n = d.n_experts();
    json posterior{{"model", model_name(model)}};
    Marginals m;
    json marg;
    Prediction in_sample;
    if (model == Model::Static) {
        ModelGraph mg = build_depth0(n, d.predictions, d.targets, std::vector<Belief>(n, GammaBelief{1.0, 1.0}));
        m = infer(mg.graph, inference(rc, rc.sweeps, mg.initial_beliefs));
        marg = marginals_json(mg.graph, m);
        std::vector<Belief> gammas;
        json gj = json::array();
        for (int e : mg.static_gamma_edges) {
            gammas.push_back(m.belief(e));
            gj.push_back(belief_to_json(m.belief(e)));
        }
        posterior["gamma"] = gj;
        in_sample = predict_static(rc, d, gammas);
    } else {
        const bool diag = model == Model::PgeDiag || model == Model::NoisyDiag;
        const PgePriors pri = PgePriors::defaults(n, d.feature_dim());
        ModelGraph mg = (model == Model::Noisy || model == Model::NoisyDiag) ? build_noisy(d, pri, false, diag)
                                                                             : build_pge(d, pri, diag);
        m = infer(mg.graph, inference(rc, rc.sweeps, mg.initial_beliefs));
        marg = marginals_json(mg.graph, m);
        const PgePriors post = posterior_priors(mg, m);
        posterior["experts"] = priors_json(post);
        in_sample = predict_pge(rc, model, d, post);
    }
    write_text(dir + "/posterior.json", dump(posterior));
    write_text(dir + "/marginals.json", dump(marg));
    write_trace(dir + "/bfe_trace.csv", m);
    const json mt = metrics_json(metrics(in_sample.y, *d.targets));
    write_text(dir + "/metrics.json", dump(mt));
    std::cout << mt.dump() << "\n";
    return 0;
}

int cmd_predict(const RunConfig& rc) {
    const Model model = parse_model(rc.model);
    const EnsembleData d = load(rc);
    const std::string dir = out_dir(rc);
    if (model == Model::Depth2Xor) {
        write_prediction(dir, predict_xor(rc, d), d.targets);
        return 0;
    }
    if (rc.posterior.empty()) throw UsageError("--posterior is required for " + model_name(model));
    std::ifstream in(rc.posterior);
    if (!in) throw UsageError("cannot open " + rc.posterior);
    json post;
    try {
        post = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError(rc.posterior + ": " + e.what());
    }
    const std::string fitted_as = post.value("model", "");
    if (fitted_as != model_name(model))
        throw UsageError("posterior was fitted with model '" + fitted_as + "', not '" + model_name(model) + "'");
    Prediction p;
    try {
        if (model == Model::Static) {
            std::vector<Belief> gammas;
            for (const json& g : post.at("gamma")) gammas.push_back(belief_from_json(g));
            p = predict_static(rc, d, gammas);
        } else {
            p = predict_pge(rc, model, d, priors_from_json(post.at("experts")));
        }
    } catch (const json::exception& e) {
        throw UsageError(rc.posterior + ": " + e.what());
    }
    write_prediction(dir, p, d.targets);
    return 0;
}

int cmd_validate(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path);
    FactorGraph g;
    try {
        g = graph_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw GraphParseError(e.what());
    }
    const ValidationReport r = validate_proper(g);
    for (const Violation& v : r.violations) {
        std::cout << "violation";
        if (v.node >= 0) std::cout << " node " << v.node;
        if (v.edge >= 0) std::cout << " edge " << v.edge;
        std::cout << ": " << v.message << "\n";
    }
    if (r.ok) std::cout << "proper: " << g.nodes.size() << " nodes, " << g.edges.size() << " edges\n";
    return r.ok ? 0 : 1;
}

int cmd_xor(const RunConfig& rc, int grid_n) {
    if (grid_n < 1) throw UsageError("--grid-n must be >= 1");
    InferenceConfig cfg;
    cfg.solver = rc.solver;
    const auto grid = xor_grid(rc.tau, grid_n, cfg);
    Mat rows(static_cast<int>(grid.size()), 4);
    for (int k = 0; k < rows.rows(); ++k) {
        const GridPoint& p = grid[static_cast<size_t>(k)];
        rows.row(k) << p.x1, p.x2, p.mean, p.std;
    }
    const std::vector<std::string> header{"x1", "x2", "mean", "std"};
    if (rc.out.empty()) {
        std::cout << "x1,x2,mean,std\n";
        for (int k = 0; k < rows.rows(); ++k)
            std::cout << io::fmt(rows(k, 0)) << "," << io::fmt(rows(k, 1)) << "," << io::fmt(rows(k, 2)) << ","
                      << io::fmt(rows(k, 3)) << "\n";
    } else {
        io::write_csv(rc.out, header, rows);
    }
    return 0;
}

int cmd_synth(const RunConfig& rc, const SyntheticSpec& base, int holdout) {
    SyntheticSpec s = base;
    s.seed = rc.seed;
    if (holdout < 0 || holdout >= s.m) throw UsageError("--holdout must lie in [0, rows)");
    const std::string dir = out_dir(rc);
    const SyntheticData syn = make_synthetic(s);
    const int cut = s.m - holdout;
    io::save_ensemble(slice(syn.data, 0, cut), dir + "/features.csv", dir + "/predictions.csv", dir + "/targets.csv");
    if (holdout > 0)
        io::save_ensemble(slice(syn.data, cut, s.m), dir + "/test_features.csv", dir + "/test_predictions.csv",
                          dir + "/test_targets.csv");
    io::write_csv(dir + "/true_gamma.csv", [&] {
        std::vector<std::string> h;
        for (int i = 0; i < s.n_experts; ++i) h.push_back("expert" + std::to_string(i));
        return h;
    }(), syn.true_gamma.transpose());
    return 0;
}

int cmd_export(const RunConfig& rc, const SyntheticSpec& base) {
    const Model model = parse_model(rc.model);
    SyntheticSpec s = base;
    s.seed = rc.seed;
    const EnsembleData d = make_synthetic(s).data;
    const int n = d.n_experts();
    FactorGraph g;
    switch (model) {
        case Model::Static:
            g = build_depth0(n, d.predictions, d.targets, std::vector<Belief>(n, GammaBelief{1.0, 1.0})).graph;
            break;
        case Model::Pge:
        case Model::PgeDiag:
            g = build_pge(d, PgePriors::defaults(n, d.feature_dim()), model == Model::PgeDiag).graph;
            break;
        case Model::Noisy:
        case Model::NoisyDiag:
            g = build_noisy(d, PgePriors::defaults(n, d.feature_dim()), false, model == Model::NoisyDiag).graph;
            break;
        case Model::Depth2Xor: {
            Mat phi(4, 3);
            for (int k = 0; k < 4; ++k) phi.row(k) = xor_phi(k / 2, k % 2).transpose();
            g = build_depth2(xor_experts(rc.tau), phi).graph;
            break;
        }
    }
    const std::string text = dump(graph_to_json(g));
    if (rc.out.empty())
        std::cout << text;
    else
        write_text(rc.out, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational message passing on Forney-style factor graphs"};
    app.require_subcommand(1);
    RunConfig rc;
    std::string config_path, graph_path;
    int grid_n = 21;
    SyntheticSpec synth;
    bool homoscedastic = false;
    int holdout = 0;

    auto common = [&](CLI::App* c) {
        c->add_option("--config", config_path, "JSON run configuration");
        c->add_option("--model", rc.model, "static, pge, pge-diag, noisy, noisy-diag or depth2-xor");
        c->add_option("--sweeps", rc.sweeps, "training sweeps");
        c->add_option("--prediction-sweeps", rc.prediction_sweeps, "prediction sweeps");
        c->add_option("--seed", rc.seed, "random seed");
        c->add_option("--tau", rc.tau, "router and expert precision of the XOR demo");
        c->add_option("--out", rc.out, "output path");
    };
    auto data = [&](CLI::App* c) {
        c->add_option("--features", rc.features, "features CSV (m x d)");
        c->add_option("--predictions", rc.predictions, "expert predictions CSV (n x m)");
        c->add_option("--targets", rc.targets, "targets CSV (m x 1); may be empty");
    };
    auto synth_opts = [&](CLI::App* c) {
        c->add_option("--experts", synth.n_experts, "number of experts");
        c->add_option("--rows", synth.m, "number of observations");
        c->add_option("--dim", synth.d, "raw feature dimension");
        c->add_flag("--homoscedastic", homoscedastic, "constant expert precisions");
    };

    CLI::App* validate = app.add_subcommand("validate", "check that a graph document is a proper TFFG");
    validate->add_option("graph", graph_path, "graph JSON")->required();
    CLI::App* xr = app.add_subcommand("xor", "posterior mean and std of the XOR demo over a grid");
    common(xr);
    xr->add_option("--grid-n", grid_n, "grid points per axis");
    CLI::App* fit = app.add_subcommand("fit", "fit a model to training data");
    common(fit);
    data(fit);
    CLI::App* pred = app.add_subcommand("predict", "predict with a fitted posterior");
    common(pred);
    data(pred);
    pred->add_option("--posterior", rc.posterior, "posterior.json written by fit");
    CLI::App* syn = app.add_subcommand("synth", "write a synthetic ensemble dataset");
    common(syn);
    synth_opts(syn);
    syn->add_option("--holdout", holdout, "trailing rows written to test_*.csv instead");
    CLI::App* exp = app.add_subcommand("export", "write the graph of a model built on synthetic data");
    common(exp);
    synth_opts(exp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (!config_path.empty()) {
            // Flags given on the command line win over the file.
            RunConfig from_file;
            load_config(config_path, from_file);
            CLI::App* sub = app.get_subcommands().front();
            auto given = [&](const char* flag) { return sub->get_option_no_throw(flag) && sub->count(flag) > 0; };
            if (!given("--model")) rc.model = from_file.model;
            if (!given("--sweeps")) rc.sweeps = from_file.sweeps;
            if (!given("--prediction-sweeps")) rc.prediction_sweeps = from_file.prediction_sweeps;
            if (!given("--seed")) rc.seed = from_file.seed;
            if (!given("--tau")) rc.tau = from_file.tau;
            if (!given("--out")) rc.out = from_file.out;
            if (!given("--features")) rc.features = from_file.features;
            if (!given("--predictions")) rc.predictions = from_file.predictions;
            if (!given("--targets")) rc.targets = from_file.targets;
            if (!given("--posterior")) rc.posterior = from_file.posterior;
            rc.solver = from_file.solver;
        }
        check(rc);
        synth.heteroscedastic = !homoscedastic;
        if (*validate) return cmd_validate(graph_path);
        if (*xr) return cmd_xor(rc, grid_n);
        if (*fit) return cmd_fit(rc);
        if (*pred) return cmd_predict(rc);
        if (*syn) return cmd_synth(rc, synth, holdout);
        if (*exp) return cmd_export(rc, synth);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const GraphParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const io::CsvError& e) {
        std::cerr << "csv error: " << e.what() << "\n";
        return 2;
    } catch (const InferenceError& e) {
        std::cerr << "inference failed at edge " << e.edge() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
