#pragma once
#include <string>
#include <vector>

#include "vfg/exp_family.hpp"

namespace vfg {

struct EdgeStatus {
    int iterations = 0;  // fixed-point iterations in the last solve (0 for conjugate edges)
    bool converged = true;
    std::string warning;
};

/** Edge-indexed beliefs plus the messages that produced them.
 *
 * messages[2 * e + s] is the last message sent toward edge e by the node at
 * endpoint s. On the gamma side of an exponential link the far-side factors
 * read pushforward moments of q(z), so messages from equality nodes there are
 * left Flat.
 */
struct Marginals {
    std::vector<Belief> beliefs;
    std::vector<Message> messages;
    std::vector<double> bfe_trace;
    // One row per trace entry: node terms summed per NodeKind (enum order), then the edge-entropy sum.
    std::vector<std::vector<double>> bfe_groups;
    std::vector<EdgeStatus> status;
    int solver_iterations = 0;  // summed over all sweeps

    const Belief& belief(int edge) const { return beliefs.at(static_cast<size_t>(edge)); }
    const Message& message(int edge, int side) const { return messages.at(static_cast<size_t>(2 * edge + side)); }
};

}  // namespace vfg
