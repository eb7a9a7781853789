#include <gtest/gtest.h>

#include <cmath>

#include "vfg/factor_rules.hpp"
#include "vfg/oracle.hpp"

using namespace vfg;

// VMP messages are checked through log-kernel differences: log m(x1) - log m(x0)
// must equal E[log f(x1, .)] - E[log f(x0, .)] with the expectation done by quadrature.

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

double log_kernel(const Message& msg, double x) {
    if (auto* g = std::get_if<GaussianBelief>(&msg)) return g->eta1 * x + g->eta2 * x * x;
    if (auto* g = std::get_if<GammaBelief>(&msg)) return (g->alpha - 1.0) * std::log(x) - g->beta * x;
    throw std::logic_error("unexpected message family");
}

double log_kernel(const MvGaussianBelief& msg, const Vec& x) { return msg.xi.dot(x) - 0.5 * x.dot(msg.lambda * x); }

double log_normal_pdf(double x, double mu, double tau) { return 0.5 * std::log(tau) - 0.5 * kLog2Pi - 0.5 * tau * (x - mu) * (x - mu); }

const GaussianBelief kZ = GaussianBelief::from_moments(0.7, 0.4);
const GammaBelief kTau{3.0, 2.0};
MvGaussianBelief w_belief() {
    Mat c(2, 2);
    c << 0.5, 0.1, 0.1, 0.3;
    Vec m(2);
    m << 1.0, -0.5;
    return MvGaussianBelief::from_moments(m, c);
}
Vec phi_value() {
    Vec p(2);
    p << 0.8, 1.0;
    return p;
}

}  // namespace

TEST(Softdot, MessageToZ) {
    SoftdotInputs in{w_belief(), PointMass::vector(phi_value()), kTau, std::nullopt};
    Message msg = softdot_message(SoftdotPort::z, in);
    auto e = [&](double z) {
        return oracle::expect_product(
            [&](const std::vector<Vec>& s) { return log_normal_pdf(z, s[0].dot(phi_value()), s[1](0)); }, {w_belief(), kTau}, 24);
    };
    for (double z : {-1.0, 0.5, 2.0}) EXPECT_NEAR(log_kernel(msg, z) - log_kernel(msg, 0.0), e(z) - e(0.0), 1e-9) << z;
    auto g = std::get<GaussianBelief>(msg);
    EXPECT_NEAR(g.mean(), 0.3, 1e-14);
    EXPECT_NEAR(g.var(), 2.0 / 3.0, 1e-14);
}

TEST(Softdot, MessageToW) {
    SoftdotInputs in{std::nullopt, PointMass::vector(phi_value()), kTau, kZ};
    auto msg = std::get<MvGaussianBelief>(softdot_message(SoftdotPort::w, in));
    auto e = [&](const Vec& w) {
        return oracle::expect_product([&](const std::vector<Vec>& s) { return log_normal_pdf(s[0](0), w.dot(phi_value()), s[1](0)); },
                                      {kZ, kTau}, 24);
    };
    Vec w0 = Vec::Zero(2);
    for (Vec w : {Vec(Vec2(1.0, 0.0)), Vec(Vec2(-0.3, 2.0)), Vec(Vec2(0.5, 0.5))})
        EXPECT_NEAR(log_kernel(msg, w) - log_kernel(msg, w0), e(w) - e(w0), 1e-9);
    // Rank one: the precision is E[tau] phi phi^T.
    EXPECT_NEAR(msg.lambda.determinant(), 0.0, 1e-12);
}

TEST(Softdot, MessageToTauUsesHalfRate) {
    SoftdotInputs in{w_belief(), PointMass::vector(phi_value()), std::nullopt, kZ};
    Message msg = softdot_message(SoftdotPort::tau, in);
    auto e = [&](double t) {
        return oracle::expect_product([&](const std::vector<Vec>& s) { return log_normal_pdf(s[0](0), s[1].dot(phi_value()), t); },
                                      {kZ, w_belief()}, 24);
    };
    for (double t : {0.3, 2.0, 7.0}) EXPECT_NEAR(log_kernel(msg, t) - log_kernel(msg, 1.0), e(t) - e(1.0), 1e-9) << t;
    EXPECT_DOUBLE_EQ(std::get<GammaBelief>(msg).alpha, 1.5);
}

TEST(Softdot, AllPointMassesGiveExactMessage) {
    SoftdotInputs in{PointMass::vector(Vec2(1.0, 2.0)), PointMass::vector(Vec2(3.0, 1.0)), PointMass::scalar(4.0), std::nullopt};
    auto g = std::get<GaussianBelief>(softdot_message(SoftdotPort::z, in));
    EXPECT_DOUBLE_EQ(g.mean(), 5.0);
    EXPECT_DOUBLE_EQ(g.var(), 0.25);
}

TEST(Softdot, MissingInputThrows) {
    SoftdotInputs in{std::nullopt, PointMass::vector(phi_value()), kTau, std::nullopt};
    EXPECT_THROW(softdot_message(SoftdotPort::z, in), std::exception);
}

TEST(Normal, MessagesToYAndMu) {
    NormalInputs in{std::nullopt, GaussianBelief::from_moments(1.0, 0.5), kTau, std::nullopt};
    auto g = std::get<GaussianBelief>(normal_message(NormalPort::y, in));
    EXPECT_NEAR(g.mean(), 1.0, 1e-14);
    EXPECT_NEAR(g.var(), 1.0 / 1.5, 1e-14);
    NormalInputs in2{GaussianBelief::from_moments(-2.0, 0.5), std::nullopt, PointMass::scalar(4.0), std::nullopt};
    g = std::get<GaussianBelief>(normal_message(NormalPort::mu, in2));
    EXPECT_NEAR(g.mean(), -2.0, 1e-14);
    EXPECT_NEAR(g.var(), 0.25, 1e-14);
}

TEST(Normal, MessageToTauMeanField) {
    const GaussianBelief y = GaussianBelief::from_moments(0.4, 0.3), mu = GaussianBelief::from_moments(-0.2, 0.6);
    NormalInputs in{y, mu, std::nullopt, std::nullopt};
    Message msg = normal_message(NormalPort::tau, in);
    auto e = [&](double t) {
        return oracle::expect_product([&](const std::vector<Vec>& s) { return log_normal_pdf(s[0](0), s[1](0), t); }, {y, mu}, 24);
    };
    for (double t : {0.5, 3.0}) EXPECT_NEAR(log_kernel(msg, t) - log_kernel(msg, 1.0), e(t) - e(1.0), 1e-9);
}

TEST(Normal, MessageToTauStructured) {
    Mat c(2, 2);
    c << 0.5, 0.4, 0.4, 0.6;
    MvGaussianBelief joint = MvGaussianBelief::from_moments(Vec2(1.0, 0.0), c);
    // E[(y - mu)^2] = 1 + 0.5 + 0.6 - 0.8.
    EXPECT_NEAR(joint_expected_sq_diff(joint), 1.3, 1e-13);
    NormalInputs in{std::nullopt, std::nullopt, std::nullopt, joint};
    auto g = std::get<GammaBelief>(normal_message(NormalPort::tau, in));
    EXPECT_NEAR(g.alpha, 1.5, 1e-15);
    EXPECT_NEAR(g.beta, 0.65, 1e-13);
}

TEST(Normal, BpToYAddsVariances) {
    auto g = std::get<GaussianBelief>(normal_bp_to_y(GaussianBelief::from_moments(2.0, 0.5), PointMass::scalar(4.0)));
    EXPECT_NEAR(g.mean(), 2.0, 1e-14);
    EXPECT_NEAR(g.var(), 0.75, 1e-14);
    EXPECT_TRUE(std::holds_alternative<Flat>(normal_bp_to_y(Flat{}, PointMass::scalar(4.0))));
}

TEST(GammaNode, Messages) {
    GammaNodeInputs in{2.0, GammaBelief{3.0, 1.5}, GammaBelief{4.0, 2.0}};
    auto to_g = std::get<GammaBelief>(gamma_node_message(GammaPort::gamma, in));
    EXPECT_DOUBLE_EQ(to_g.alpha, 2.0);
    EXPECT_DOUBLE_EQ(to_g.beta, 2.0);
    Message to_b = gamma_node_message(GammaPort::beta, in);
    EXPECT_DOUBLE_EQ(std::get<GammaBelief>(to_b).alpha, 3.0);
    EXPECT_DOUBLE_EQ(std::get<GammaBelief>(to_b).beta, 2.0);
    // log f = a log b + (a-1) log g - b g - lgamma(a), averaged over q(gamma).
    const GammaBelief qg{4.0, 2.0};
    auto e = [&](double b) {
        return oracle::expect([&](double g) { return 2.0 * std::log(b) + std::log(g) - b * g - std::lgamma(2.0); }, qg,
                              oracle::QuadratureSpec::double_exponential());
    };
    for (double b : {0.2, 3.0}) EXPECT_NEAR(log_kernel(to_b, b) - log_kernel(to_b, 1.0), e(b) - e(1.0), 1e-8);
}

TEST(ExpLink, GaussianToLogNormal) {
    auto ln = std::get<LogNormalMessage>(explink_message(ExpPort::gamma, GaussianBelief::from_moments(0.3, 0.2)));
    EXPECT_DOUBLE_EQ(ln.m, 0.3);
    EXPECT_NEAR(ln.s2, 0.2, 1e-15);
    EXPECT_NEAR(oracle::integrate_half_line([&](double g) { return std::exp(ln.log_density(g)); }, 0.0), 1.0, 1e-8);
}

TEST(ExpLink, GammaToLogGammaIsChangeOfVariables) {
    const GammaBelief g{2.5, 1.5};
    auto lg = std::get<LogGammaMessage>(explink_message(ExpPort::z, g));
    const double lz = std::lgamma(2.5) - 2.5 * std::log(1.5);
    for (double z : {-2.0, 0.0, 1.3}) {
        const double gamma_density = 1.5 * std::log(std::exp(z)) - 1.5 * std::exp(z) - lz;
        EXPECT_NEAR(lg.log_density(z), gamma_density + z, 1e-12) << z;
    }
    EXPECT_NEAR(oracle::integrate([&](double z) { return std::exp(lg.log_density(z)); }, -40.0, 6.0), 1.0, 1e-8);
}

TEST(ExpLink, PointMassesAndFlat) {
    EXPECT_NEAR(std::get<PointMass>(explink_message(ExpPort::gamma, PointMass::scalar(std::log(3.0)))).as_scalar(), 3.0, 1e-14);
    EXPECT_NEAR(std::get<PointMass>(explink_message(ExpPort::z, PointMass::scalar(3.0))).as_scalar(), std::log(3.0), 1e-14);
    EXPECT_TRUE(std::get<LogGammaMessage>(explink_message(ExpPort::z, Flat{})).is_flat());
}

TEST(Equality, ProductOfOtherPorts) {
    std::vector<Message> in{GammaBelief{2, 1}, GammaBelief{3, 2}, GammaBelief{1.5, 0.5}};
    auto g = std::get<GammaBelief>(equality_message(0, in));
    EXPECT_DOUBLE_EQ(g.alpha, 3.5);
    EXPECT_DOUBLE_EQ(g.beta, 2.5);
    g = std::get<GammaBelief>(equality_message(2, in));
    EXPECT_DOUBLE_EQ(g.alpha, 4.0);
    EXPECT_DOUBLE_EQ(g.beta, 3.0);
    std::vector<Message> with_flat{GaussianBelief::from_moments(1, 1), Flat{}, Flat{}};
    auto n = std::get<GaussianBelief>(equality_message(2, with_flat));
    EXPECT_DOUBLE_EQ(n.mean(), 1.0);
}

TEST(Equality, PointMassDominates) {
    std::vector<Message> in{GammaBelief{2, 1}, PointMass::scalar(4.0), Flat{}};
    EXPECT_DOUBLE_EQ(std::get<PointMass>(equality_message(2, in)).as_scalar(), 4.0);
}
