#include "vfg/factor_rules.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "vfg/overloaded.hpp"

namespace vfg {

namespace {

const Belief& need(const std::optional<Belief>& b, const char* what) {
    if (!b) throw std::invalid_argument(std::string("missing input belief: ") + what);
    return *b;
}

Message gaussian_message_moments(double m, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DegeneracyError("Gaussian message variance must be positive");
    return GaussianBelief{m / v, -0.5 / v};
}

}  // namespace

ScalarMoments scalar_moments(const Belief& b) {
    return std::visit(overloaded{[](const GaussianBelief& g) {
                                     if (!(g.eta2 < 0.0)) throw DegeneracyError("degenerate Gaussian belief");
                                     return ScalarMoments{g.mean(), g.var()};
                                 },
                                 [](const MvGaussianBelief& g) {
                                     if (g.dim() != 1) throw FamilyError("expected a scalar belief");
                                     return ScalarMoments{g.mean()(0), g.cov()(0, 0)};
                                 },
                                 [](const PointMass& p) { return ScalarMoments{p.as_scalar(), 0.0}; },
                                 [](const GammaBelief&) -> ScalarMoments {
                                     throw FamilyError("expected a Gaussian belief, got Gamma");
                                 }},
                      b);
}

VectorMoments vector_moments(const Belief& b) {
    return std::visit(overloaded{[](const GaussianBelief& g) {
                                     ScalarMoments s = scalar_moments(g);
                                     return VectorMoments{Vec::Constant(1, s.mean), Mat::Constant(1, 1, s.var)};
                                 },
                                 [](const MvGaussianBelief& g) { return VectorMoments{g.mean(), g.cov()}; },
                                 [](const PointMass& p) {
                                     return VectorMoments{p.value, Mat::Zero(p.dim(), p.dim())};
                                 },
                                 [](const GammaBelief&) -> VectorMoments {
                                     throw FamilyError("expected a Gaussian belief, got Gamma");
                                 }},
                      b);
}

double gamma_mean(const Belief& b) {
    if (auto* g = std::get_if<GammaBelief>(&b)) {
        if (!g->normalizable()) throw DegeneracyError("degenerate Gamma belief");
        return g->mean();
    }
    if (auto* p = std::get_if<PointMass>(&b)) {
        double v = p->as_scalar();
        if (!(v > 0.0)) throw DegeneracyError("precision point mass must be positive");
        return v;
    }
    throw FamilyError("expected a Gamma belief, got " + family_name(b));
}

double gamma_mean_log(const Belief& b) {
    if (auto* g = std::get_if<GammaBelief>(&b)) return gamma_stats(*g).E_log;
    if (auto* p = std::get_if<PointMass>(&b)) {
        double v = p->as_scalar();
        if (!(v > 0.0)) throw DegeneracyError("precision point mass must be positive");
        return std::log(v);
    }
    throw FamilyError("expected a Gamma belief, got " + family_name(b));
}

// ---------------------------------------------------------------- softdot

Message softdot_message(SoftdotPort target, const SoftdotInputs& in) {
    switch (target) {
        case SoftdotPort::z: {
            VectorMoments w = vector_moments(need(in.q_w, "w"));
            VectorMoments phi = vector_moments(need(in.q_phi, "phi"));
            if (w.mean.size() != phi.mean.size()) throw std::invalid_argument("softdot: dim(w) != dim(phi)");
            const double tau = gamma_mean(need(in.q_tau, "tau"));
            return gaussian_message_moments(w.mean.dot(phi.mean), 1.0 / tau);
        }
        case SoftdotPort::w:
        case SoftdotPort::phi: {
            // w and phi enter symmetrically.
            const Belief& other = target == SoftdotPort::w ? need(in.q_phi, "phi") : need(in.q_w, "w");
            VectorMoments o = vector_moments(other);
            ScalarMoments z = scalar_moments(need(in.q_z, "z"));
            const double tau = gamma_mean(need(in.q_tau, "tau"));
            Mat lambda = tau * (o.mean * o.mean.transpose() + o.cov);
            Vec xi = tau * z.mean * o.mean;
            return MvGaussianBelief::message(xi, lambda);
        }
        case SoftdotPort::tau: {
            VectorMoments w = vector_moments(need(in.q_w, "w"));
            VectorMoments phi = vector_moments(need(in.q_phi, "phi"));
            if (w.mean.size() != phi.mean.size()) throw std::invalid_argument("softdot: dim(w) != dim(phi)");
            ScalarMoments z = scalar_moments(need(in.q_z, "z"));
            const double r = z.mean - w.mean.dot(phi.mean);
            const Mat second = phi.mean * phi.mean.transpose() + phi.cov;
            const double e_sq =
                r * r + z.var + (w.cov * second).trace() + w.mean.dot(phi.cov * w.mean);
            return GammaBelief::message(1.5, 0.5 * e_sq);
        }
    }
    throw std::invalid_argument("softdot_message: unknown port");
}

// ----------------------------------------------------------------- normal

double joint_expected_sq_diff(const MvGaussianBelief& joint) {
    if (joint.dim() != 2) throw std::invalid_argument("joint over (y, mu) must be 2-d");
    Vec m = joint.mean();
    Mat c = joint.cov();
    const double d = m(0) - m(1);
    return d * d + c(0, 0) + c(1, 1) - 2.0 * c(0, 1);
}

Message normal_message(NormalPort target, const NormalInputs& in) {
    switch (target) {
        case NormalPort::y: {
            ScalarMoments mu = scalar_moments(need(in.q_mu, "mu"));
            return gaussian_message_moments(mu.mean, 1.0 / gamma_mean(need(in.q_tau, "tau")));
        }
        case NormalPort::mu: {
            ScalarMoments y = scalar_moments(need(in.q_y, "y"));
            return gaussian_message_moments(y.mean, 1.0 / gamma_mean(need(in.q_tau, "tau")));
        }
        case NormalPort::tau: {
            double e_sq;
            if (in.q_joint) {
                e_sq = joint_expected_sq_diff(*in.q_joint);
            } else {
                ScalarMoments y = scalar_moments(need(in.q_y, "y"));
                ScalarMoments mu = scalar_moments(need(in.q_mu, "mu"));
                e_sq = (y.mean - mu.mean) * (y.mean - mu.mean) + y.var + mu.var;
            }
            return GammaBelief::message(1.5, 0.5 * e_sq);
        }
    }
    throw std::invalid_argument("normal_message: unknown port");
}

Message normal_bp_to_y(const Message& msg_mu, const PointMass& tau) {
    const double t = tau.as_scalar();
    if (!(t > 0.0) || !std::isfinite(t)) throw DegeneracyError("normal_bp_to_y: precision must be positive");
    return std::visit(overloaded{[&](const GaussianBelief& g) -> Message {
                                     if (!(g.eta2 < 0.0)) return Flat{};
                                     return gaussian_message_moments(g.mean(), g.var() + 1.0 / t);
                                 },
                                 [&](const PointMass& p) -> Message {
                                     return gaussian_message_moments(p.as_scalar(), 1.0 / t);
                                 },
                                 [&](const Flat&) -> Message { return Flat{}; },
                                 [&](const auto& other) -> Message {
                                     throw FamilyError("normal_bp_to_y: unsupported incoming " +
                                                       family_name(Message(other)));
                                 }},
                      msg_mu);
}

// ------------------------------------------------------------------ gamma

Message gamma_node_message(GammaPort target, const GammaNodeInputs& in) {
    if (!(in.alpha_clamp > 0.0)) throw DegeneracyError("gamma node: alpha must be positive");
    if (target == GammaPort::gamma) return GammaBelief::message(in.alpha_clamp, gamma_mean(need(in.q_beta, "beta")));
    return GammaBelief::message(in.alpha_clamp + 1.0, gamma_mean(need(in.q_gamma, "gamma")));
}

// ---------------------------------------------------------- exponential

Message explink_message(ExpPort target, const Message& incoming) {
    if (target == ExpPort::gamma) {
        if (auto* g = std::get_if<GaussianBelief>(&incoming)) {
            if (!(g->eta2 < 0.0)) throw DegeneracyError("exp link: improper Gaussian on z");
            return LogNormalMessage::make(g->mean(), g->var());
        }
        if (auto* p = std::get_if<PointMass>(&incoming)) return PointMass::scalar(gaussian_mgf(*p));
        throw FamilyError("exp link toward gamma needs a Gaussian on z, got " + family_name(incoming));
    }
    if (auto* g = std::get_if<GammaBelief>(&incoming)) {
        if (!(g->alpha > 0.0)) throw DegeneracyError("exp link: Gamma shape must be positive");
        const double a = g->beta > 0.0 ? 1.0 / g->beta : std::numeric_limits<double>::infinity();
        return LogGammaMessage{a, g->alpha};
    }
    if (auto* p = std::get_if<PointMass>(&incoming)) {
        const double v = p->as_scalar();
        if (!(v > 0.0)) throw DegeneracyError("exp link: gamma point mass must be positive");
        return PointMass::scalar(std::log(v));
    }
    if (std::holds_alternative<Flat>(incoming)) return LogGammaMessage::flat();
    throw FamilyError("exp link toward z needs a Gamma on gamma, got " + family_name(incoming));
}

// --------------------------------------------------------------- equality

Message equality_message(int target_index, const std::vector<Message>& incoming) {
    if (incoming.empty()) throw std::invalid_argument("equality_message: no incoming messages");
    if (target_index < 0 || target_index >= static_cast<int>(incoming.size()))
        throw std::out_of_range("equality_message: target index out of range");
    // A clamped port pins the variable; everything else on the node is irrelevant.
    const PointMass* pin = nullptr;
    for (int k = 0; k < static_cast<int>(incoming.size()); ++k) {
        if (k == target_index) continue;
        auto* p = std::get_if<PointMass>(&incoming[static_cast<size_t>(k)]);
        if (!p) continue;
        if (pin && (pin->value - p->value).norm() > 0.0) throw DegeneracyError("equality node: conflicting point masses");
        pin = p;
    }
    if (pin) return *pin;
    Message acc = Flat{};
    for (int k = 0; k < static_cast<int>(incoming.size()); ++k) {
        if (k == target_index) continue;
        const Message& m = incoming[static_cast<size_t>(k)];
        if (std::holds_alternative<LogNormalMessage>(m) || std::holds_alternative<LogGammaMessage>(m))
            throw FamilyError("equality node: " + family_name(m) +
                              " cannot be multiplied in closed form; solve this edge with the fixed-point module");
        acc = multiply_messages(acc, m);
    }
    return acc;
}

}  // namespace vfg
