#pragma once
#include <optional>
#include <vector>

#include "vfg/exp_family.hpp"

/** Message catalog for the five-letter alphabet.
 *
 * Stochastic factors (softdot, normal, gamma) emit VMP messages computed from
 * the beliefs on their other ports. The exponential link and the equality node
 * are deterministic and emit BP messages from incoming messages. Every port
 * accepts a PointMass in place of a belief.
 */
namespace vfg {

struct ScalarMoments {
    double mean;
    double var;
};
struct VectorMoments {
    Vec mean;
    Mat cov;
};

/// Mean and variance of a scalar Gaussian, 1-d MvGaussian or scalar PointMass.
ScalarMoments scalar_moments(const Belief& b);
/// Mean vector and covariance; scalar Gaussians are read as 1-d.
VectorMoments vector_moments(const Belief& b);
/// E[x] for a Gamma belief or positive PointMass.
double gamma_mean(const Belief& b);
/// E[log x] for a Gamma belief or positive PointMass.
double gamma_mean_log(const Belief& b);

enum class SoftdotPort { z, w, phi, tau };
enum class NormalPort { y, mu, tau };
enum class GammaPort { gamma, beta };
enum class ExpPort { z, gamma };

struct SoftdotInputs {
    std::optional<Belief> q_w;
    std::optional<Belief> q_phi;
    std::optional<Belief> q_tau;
    std::optional<Belief> q_z;
};

struct NormalInputs {
    std::optional<Belief> q_y;
    std::optional<Belief> q_mu;
    std::optional<Belief> q_tau;
    // Structured q(y, mu) as a 2-d Gaussian over (y, mu). Only read for the tau target.
    std::optional<MvGaussianBelief> q_joint;
};

struct GammaNodeInputs {
    double alpha_clamp = 1.0;
    std::optional<Belief> q_beta;
    std::optional<Belief> q_gamma;
};

Message softdot_message(SoftdotPort target, const SoftdotInputs& in);
Message normal_message(NormalPort target, const NormalInputs& in);
/// BP message through a normal factor with point-mass precision: N(m, Var + 1/tau).
Message normal_bp_to_y(const Message& msg_mu, const PointMass& tau);
Message gamma_node_message(GammaPort target, const GammaNodeInputs& in);
Message explink_message(ExpPort target, const Message& incoming);
Message equality_message(int target_index, const std::vector<Message>& incoming);

/// E[(y - mu)^2] under a 2-d Gaussian joint over (y, mu).
double joint_expected_sq_diff(const MvGaussianBelief& joint);

}  // namespace vfg
