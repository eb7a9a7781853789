#include "vfg/exp_family.hpp"
#include "vfg/overloaded.hpp"

#include <cfloat>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace vfg {

namespace {

constexpr double kLog2PiE = 2.8378770664093454836;  // log(2 pi e)
const double kMaxExp = std::log(DBL_MAX);

bool finite(double x) { return std::isfinite(x); }

void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !finite(x)) {
        std::ostringstream os;
        os << what << " must be positive and finite, got " << x;
        throw DegeneracyError(os.str());
    }
}

}  // namespace

double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
    return std::lgamma(x);
}
double digamma(double x) { return boost::math::digamma(x); }
double trigamma(double x) { return boost::math::trigamma(x); }
double tetragamma(double x) { return boost::math::polygamma(2, x); }

// ---------------------------------------------------------------- Gaussian

GaussianBelief GaussianBelief::from_moments(double m, double v) {
    if (!finite(m)) throw DegeneracyError("Gaussian mean must be finite");
    require_positive(v, "Gaussian variance");
    return {m / v, -0.5 / v};
}

GaussianBelief GaussianBelief::from_natural(double eta1, double eta2) {
    if (!finite(eta1) || !finite(eta2) || !(eta2 < 0.0))
        throw DegeneracyError("Gaussian natural parameters infeasible (need eta2 < 0)");
    return {eta1, eta2};
}

GaussianBelief gaussian_convert(GaussianMoments mo) { return GaussianBelief::from_moments(mo.m, mo.v); }

GaussianMoments gaussian_convert(const GaussianBelief& g) {
    if (!(g.eta2 < 0.0)) throw DegeneracyError("Gaussian natural parameters infeasible (need eta2 < 0)");
    return {g.mean(), g.var()};
}

// ------------------------------------------------------- MvGaussian

MvGaussianBelief MvGaussianBelief::from_moments(const Vec& m, const Mat& cov, bool diagonal) {
    if (m.size() != cov.rows() || cov.rows() != cov.cols())
        throw std::invalid_argument("MvGaussian: dimension mismatch");
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw DegeneracyError("MvGaussian covariance not positive definite");
    Mat lambda = llt.solve(Mat::Identity(cov.rows(), cov.cols()));
    lambda = 0.5 * (lambda + lambda.transpose());
    if (diagonal) {
        Mat d = Mat::Zero(lambda.rows(), lambda.cols());
        d.diagonal() = lambda.diagonal();
        lambda = d;
    }
    return from_information(lambda * m, lambda, diagonal);
}

MvGaussianBelief MvGaussianBelief::from_information(const Vec& xi, const Mat& lambda, bool diagonal) {
    MvGaussianBelief g = message(xi, lambda);
    g.diagonal_only = diagonal;
    if (diagonal) {
        for (int i = 0; i < lambda.rows(); ++i)
            for (int j = 0; j < lambda.cols(); ++j)
                if (i != j && lambda(i, j) != 0.0)
                    throw DegeneracyError("MvGaussian: diagonal_only belief with off-diagonal precision");
    }
    if (!g.normalizable()) throw DegeneracyError("MvGaussian precision not positive definite");
    return g;
}

MvGaussianBelief MvGaussianBelief::message(const Vec& xi, const Mat& lambda) {
    if (xi.size() != lambda.rows() || lambda.rows() != lambda.cols())
        throw std::invalid_argument("MvGaussian: dimension mismatch");
    if (!xi.allFinite() || !lambda.allFinite()) throw DegeneracyError("MvGaussian: non-finite parameters");
    if ((lambda - lambda.transpose()).cwiseAbs().maxCoeff() >
        1e-9 * (1.0 + lambda.cwiseAbs().maxCoeff()))
        throw DegeneracyError("MvGaussian: precision not symmetric");
    MvGaussianBelief g;
    g.xi = xi;
    g.lambda = 0.5 * (lambda + lambda.transpose());
    return g;
}

bool MvGaussianBelief::normalizable() const {
    if (lambda.size() == 0) return false;
    Eigen::LLT<Mat> llt(lambda);
    return llt.info() == Eigen::Success;
}

Vec MvGaussianBelief::mean() const {
    Eigen::LLT<Mat> llt(lambda);
    if (llt.info() != Eigen::Success) throw DegeneracyError("MvGaussian: mean of improper message");
    return llt.solve(xi);
}

Mat MvGaussianBelief::cov() const {
    Eigen::LLT<Mat> llt(lambda);
    if (llt.info() != Eigen::Success) throw DegeneracyError("MvGaussian: covariance of improper message");
    return llt.solve(Mat::Identity(dim(), dim()));
}

MvGaussianBelief MvGaussianBelief::diagonal_projection() const {
    Vec m = mean();
    Mat d = Mat::Zero(dim(), dim());
    d.diagonal() = lambda.diagonal();
    return from_information(d * m, d, true);
}

// ------------------------------------------------------------- Gamma

GammaBelief GammaBelief::make(double alpha, double beta) {
    require_positive(alpha, "Gamma shape");
    require_positive(beta, "Gamma rate");
    return {alpha, beta};
}

GammaBelief GammaBelief::from_natural(double eta1, double eta2) {
    if (!(eta1 > -1.0) || !(eta2 < 0.0) || !finite(eta1) || !finite(eta2))
        throw DegeneracyError("Gamma natural parameters infeasible (need eta1 > -1, eta2 < 0)");
    return {eta1 + 1.0, -eta2};
}

GammaBelief GammaBelief::message(double alpha, double beta) {
    require_positive(alpha, "Gamma message shape");
    if (!(beta >= 0.0) || !finite(beta)) throw DegeneracyError("Gamma message rate must be >= 0");
    return {alpha, beta};
}

// ------------------------------------------------- LogNormal / LogGamma

LogNormalMessage LogNormalMessage::make(double m, double s2) {
    if (!finite(m)) throw DegeneracyError("LogNormal location must be finite");
    require_positive(s2, "LogNormal scale^2");
    return {m, s2};
}

double LogNormalMessage::log_density(double gamma) const {
    if (!(gamma > 0.0)) return -INFINITY;
    double lg = std::log(gamma);
    return -0.5 * (lg - m) * (lg - m) / s2 - lg - 0.5 * std::log(2.0 * std::numbers::pi * s2);
}

LogGammaMessage LogGammaMessage::make(double a, double b) {
    require_positive(a, "LogGamma scale");
    require_positive(b, "LogGamma shape");
    return {a, b};
}

LogGammaMessage LogGammaMessage::flat() { return {INFINITY, 0.0}; }

double LogGammaMessage::log_density(double x) const {
    if (is_flat()) return 0.0;
    double ex = x - std::log(a);
    if (ex > kMaxExp) throw SaturationError("LogGamma density: exponent overflow");
    return b * x - std::exp(x) / a - b * std::log(a) - std::lgamma(b);
}

// -------------------------------------------------------- PointMass

PointMass PointMass::scalar(double v) {
    if (!finite(v)) throw DegeneracyError("PointMass value must be finite");
    PointMass p;
    p.value = Vec::Constant(1, v);
    return p;
}

PointMass PointMass::vector(const Vec& v) {
    if (!v.allFinite()) throw DegeneracyError("PointMass value must be finite");
    return {v};
}

double PointMass::as_scalar() const {
    if (value.size() != 1) throw FamilyError("PointMass is not scalar");
    return value(0);
}

// ------------------------------------------------------- utilities

std::string family_name(const Message& m) {
    return std::visit(overloaded{[](const GaussianBelief&) { return std::string("Gaussian"); },
                                 [](const MvGaussianBelief&) { return std::string("MvGaussian"); },
                                 [](const GammaBelief&) { return std::string("Gamma"); },
                                 [](const LogNormalMessage&) { return std::string("LogNormal"); },
                                 [](const LogGammaMessage&) { return std::string("LogGamma"); },
                                 [](const PointMass&) { return std::string("PointMass"); },
                                 [](const Flat&) { return std::string("Flat"); }},
                      m);
}

std::string family_name(const Belief& b) { return family_name(to_message(b)); }

Message to_message(const Belief& b) {
    return std::visit([](const auto& x) -> Message { return x; }, b);
}

Message multiply_messages(const Message& a, const Message& b) {
    if (std::holds_alternative<Flat>(a)) return b;
    if (std::holds_alternative<Flat>(b)) return a;
    if (auto* ga = std::get_if<GaussianBelief>(&a)) {
        if (auto* gb = std::get_if<GaussianBelief>(&b)) {
            GaussianBelief r{ga->eta1 + gb->eta1, ga->eta2 + gb->eta2};
            return r;
        }
    }
    if (auto* ga = std::get_if<MvGaussianBelief>(&a)) {
        if (auto* gb = std::get_if<MvGaussianBelief>(&b)) {
            if (ga->dim() != gb->dim()) throw FamilyError("MvGaussian product: dimension mismatch");
            MvGaussianBelief r;
            r.xi = ga->xi + gb->xi;
            r.lambda = ga->lambda + gb->lambda;
            return r;
        }
    }
    if (auto* ga = std::get_if<GammaBelief>(&a)) {
        if (auto* gb = std::get_if<GammaBelief>(&b)) {
            GammaBelief r{ga->alpha + gb->alpha - 1.0, ga->beta + gb->beta};
            return r;
        }
    }
    throw FamilyError("cannot multiply " + family_name(a) + " by " + family_name(b) +
                      " in closed form; mixed products belong to the fixed-point solver");
}

Belief multiply_same_family(const Message& a, const Message& b) {
    if (std::holds_alternative<Flat>(a) && std::holds_alternative<Flat>(b))
        throw DegeneracyError("product of two flat messages is not normalizable");
    Message r = multiply_messages(a, b);
    if (auto* g = std::get_if<GaussianBelief>(&r)) return GaussianBelief::from_natural(g->eta1, g->eta2);
    if (auto* g = std::get_if<MvGaussianBelief>(&r))
        return MvGaussianBelief::from_information(g->xi, g->lambda, g->diagonal_only);
    if (auto* g = std::get_if<GammaBelief>(&r)) return GammaBelief::make(g->alpha, g->beta);
    throw FamilyError("multiply_same_family: unsupported family " + family_name(r));
}

// ------------------------------------------------- Fisher / partitions

double gaussian_log_partition(const Vec2& eta) {
    if (!(eta(1) < 0.0)) throw DegeneracyError("Gaussian log-partition: eta2 must be negative");
    return -eta(0) * eta(0) / (4.0 * eta(1)) - 0.5 * std::log(-2.0 * eta(1));
}

Mat2 gaussian_fisher(const GaussianBelief& g) {
    const double e1 = g.eta1, e2 = g.eta2;
    if (!(e2 < 0.0) || !finite(e1)) throw DegeneracyError("gaussian_fisher: infeasible eta");
    Mat2 f;
    f(0, 0) = -1.0 / (2.0 * e2);
    f(0, 1) = f(1, 0) = e1 / (2.0 * e2 * e2);
    f(1, 1) = 1.0 / (2.0 * e2 * e2) - e1 * e1 / (2.0 * e2 * e2 * e2);
    return f;
}

double gamma_log_partition(const Vec2& eta) {
    if (!(eta(0) > -1.0) || !(eta(1) < 0.0)) throw DegeneracyError("Gamma log-partition: infeasible eta");
    return std::lgamma(eta(0) + 1.0) - (eta(0) + 1.0) * std::log(-eta(1));
}

GammaStats gamma_stats(const GammaBelief& g) {
    if (!g.normalizable() || !finite(g.alpha) || !finite(g.beta))
        throw DegeneracyError("gamma_stats: infeasible parameters");
    GammaStats s;
    const double psi = digamma(g.alpha), psi1 = trigamma(g.alpha), lb = std::log(g.beta);
    s.E_log = psi - lb;
    s.E_val = g.alpha / g.beta;
    s.E_logsq = psi1 + s.E_log * s.E_log;
    const double e1 = g.alpha - 1.0, e2 = -g.beta;
    s.fisher(0, 0) = psi1;
    s.fisher(0, 1) = s.fisher(1, 0) = -1.0 / e2;
    s.fisher(1, 1) = (e1 + 1.0) / (e2 * e2);
    s.log_partition = std::lgamma(g.alpha) - g.alpha * lb;
    return s;
}

// ----------------------------------------------------------- MGF

MgfResult gaussian_mgf(const GaussianBelief& g) {
    if (!(g.eta2 < 0.0)) throw DegeneracyError("gaussian_mgf: eta2 must be negative");
    const double e1 = g.eta1, e2 = g.eta2;
    const double L = -e1 / (2.0 * e2) - 1.0 / (4.0 * e2);  // m + v/2
    if (!(L <= kMaxExp)) throw SaturationError("gaussian_mgf: m + v/2 exceeds the representable exponent");
    const double val = std::exp(L);
    MgfResult r;
    r.value = val;
    r.grad(0) = val * (-1.0 / (2.0 * e2));
    r.grad(1) = val * (e1 / (2.0 * e2 * e2) + 1.0 / (4.0 * e2 * e2));
    return r;
}

double gaussian_mgf(const PointMass& p) {
    double x = p.as_scalar();
    if (x > kMaxExp) throw SaturationError("gaussian_mgf: point mass exponent overflow");
    return std::exp(x);
}

// ------------------------------------------------------ entropies

double entropy(const GaussianBelief& g) {
    if (!(g.eta2 < 0.0)) throw DegeneracyError("entropy: degenerate Gaussian");
    return 0.5 * (kLog2PiE + std::log(g.var()));
}

double entropy(const MvGaussianBelief& g) {
    Eigen::LLT<Mat> llt(g.lambda);
    if (llt.info() != Eigen::Success) throw DegeneracyError("entropy: degenerate MvGaussian");
    const double logdet_lambda = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return 0.5 * (g.dim() * kLog2PiE - logdet_lambda);
}

double entropy(const GammaBelief& g) {
    if (!g.normalizable()) throw DegeneracyError("entropy: degenerate Gamma");
    return g.alpha - std::log(g.beta) + std::lgamma(g.alpha) + (1.0 - g.alpha) * digamma(g.alpha);
}

double entropy(const Belief& b) {
    return std::visit(overloaded{[](const GaussianBelief& g) { return entropy(g); },
                                 [](const MvGaussianBelief& g) { return entropy(g); },
                                 [](const GammaBelief& g) { return entropy(g); },
                                 [](const PointMass&) { return 0.0; }},
                      b);
}

}  // namespace vfg
