#pragma once
#include <stdexcept>
#include <string>
#include <variant>

#include <Eigen/Dense>

namespace vfg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

/// Raised when an operation would produce (or is handed) a non-normalizable belief.
class DegeneracyError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Raised when an exponent exceeds the representable range (exp overflow).
class SaturationError : public std::overflow_error {
  public:
    using std::overflow_error::overflow_error;
};

/// Raised when two payloads of incompatible families meet.
class FamilyError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Special functions. Thin wrappers so callers never depend on the backend.
double log_gamma(double x);
double digamma(double x);
double trigamma(double x);
double tetragamma(double x);  // psi''

/// Univariate Gaussian in natural parameters (m/v, -1/(2v)).
struct GaussianBelief {
    double eta1 = 0.0;
    double eta2 = -0.5;

    static GaussianBelief from_moments(double m, double v);
    static GaussianBelief from_natural(double eta1, double eta2);

    double mean() const { return -eta1 / (2.0 * eta2); }
    double var() const { return -1.0 / (2.0 * eta2); }
    double precision() const { return -2.0 * eta2; }
    Vec2 natural() const { return {eta1, eta2}; }
};

/** Multivariate Gaussian in information form (xi = Lambda m, Lambda).
 *
 * Messages may carry a positive semi-definite Lambda (rank-one softdot
 * messages); beliefs must be positive definite. When diagonal_only is set the
 * off-diagonal entries of lambda are exactly zero.
 */
struct MvGaussianBelief {
    Vec xi;
    Mat lambda;
    bool diagonal_only = false;

    static MvGaussianBelief from_moments(const Vec& m, const Mat& cov, bool diagonal = false);
    static MvGaussianBelief from_information(const Vec& xi, const Mat& lambda, bool diagonal = false);
    /// Message constructor: only symmetry and positive semi-definiteness are required.
    static MvGaussianBelief message(const Vec& xi, const Mat& lambda);

    int dim() const { return static_cast<int>(xi.size()); }
    bool normalizable() const;
    Vec mean() const;
    Mat cov() const;
    /// Project the precision onto its diagonal while keeping the mean.
    MvGaussianBelief diagonal_projection() const;
};

/// Gamma with shape alpha and rate beta; natural parameters (alpha-1, -beta).
struct GammaBelief {
    double alpha = 1.0;
    double beta = 1.0;

    static GammaBelief make(double alpha, double beta);
    static GammaBelief from_natural(double eta1, double eta2);
    /// Message constructor: a zero rate is allowed (improper kernel gamma^(alpha-1)).
    static GammaBelief message(double alpha, double beta);

    double mean() const { return alpha / beta; }
    Vec2 natural() const { return {alpha - 1.0, -beta}; }
    bool normalizable() const { return alpha > 0.0 && beta > 0.0; }
};

/// Distribution of gamma = e^z with z ~ N(m, s2).
struct LogNormalMessage {
    double m = 0.0;
    double s2 = 1.0;
    static LogNormalMessage make(double m, double s2);
    double log_density(double gamma) const;
};

/** Log-gamma on the real line: e^{bx} e^{-e^x / a} / (a^b Gamma(b)).
 *
 * b = 0 together with a = +inf is the flat degenerate message.
 */
struct LogGammaMessage {
    double a = 1.0;
    double b = 1.0;
    static LogGammaMessage make(double a, double b);
    static LogGammaMessage flat();
    bool is_flat() const { return b == 0.0; }
    double inv_a() const { return 1.0 / a; }
    double log_density(double x) const;
};

struct PointMass {
    Vec value;
    static PointMass scalar(double v);
    static PointMass vector(const Vec& v);
    double as_scalar() const;
    int dim() const { return static_cast<int>(value.size()); }
};

/// Uninformative message: all-zero natural parameters.
struct Flat {};

using Message = std::variant<GaussianBelief, MvGaussianBelief, GammaBelief, LogNormalMessage,
                             LogGammaMessage, PointMass, Flat>;
using Belief = std::variant<GaussianBelief, MvGaussianBelief, GammaBelief, PointMass>;

std::string family_name(const Message& m);
std::string family_name(const Belief& b);
Message to_message(const Belief& b);

// Moment/natural conversion for the univariate Gaussian.
struct GaussianMoments {
    double m;
    double v;
};
GaussianBelief gaussian_convert(GaussianMoments moments);
GaussianMoments gaussian_convert(const GaussianBelief& g);

/// Product of two same-family messages (natural parameters add). Flat is the identity.
Belief multiply_same_family(const Message& a, const Message& b);

/// Product of two messages that may be improper; returns a message, no normalizability check.
Message multiply_messages(const Message& a, const Message& b);

/// Fisher information of the Gaussian in natural coordinates.
Mat2 gaussian_fisher(const GaussianBelief& g);
/// Gaussian log-partition A(eta) = -eta1^2/(4 eta2) - 0.5 log(-2 eta2).
double gaussian_log_partition(const Vec2& eta);

struct GammaStats {
    double E_log;
    double E_val;
    double E_logsq;
    Mat2 fisher;
    double log_partition;
};
GammaStats gamma_stats(const GammaBelief& g);
/// Gamma log-partition A(eta) = log Gamma(eta1+1) - (eta1+1) log(-eta2).
double gamma_log_partition(const Vec2& eta);

struct MgfResult {
    double value;
    Vec2 grad;  // d/d(eta1, eta2)
};
/// E[e^z] = exp(m + v/2) with its gradient in natural coordinates.
MgfResult gaussian_mgf(const GaussianBelief& g);
double gaussian_mgf(const PointMass& p);

double entropy(const GaussianBelief& g);
double entropy(const MvGaussianBelief& g);
double entropy(const GammaBelief& g);
double entropy(const Belief& b);

}  // namespace vfg
