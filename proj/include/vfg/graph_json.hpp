#pragma once
#include <stdexcept>

#include <json.hpp>

#include "vfg/graph.hpp"

/** Graph documents.
 *
 * {"nodes": [{"id", "kind", "label"?, "alpha"?, "value"?, "prior"?, "family"?, "degree"?, "structured"?}],
 *  "edges": [{"id", "line", "family", "dim"?, "label"?, "param"?, "diagonal"?,
 *             "endpoints": [{"node", "port"}, {"node", "port"}]}]}
 *
 * Loading does not check line types; run validate_proper on the result.
 */
namespace vfg {

class GraphParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

nlohmann::json belief_to_json(const Belief& b);
Belief belief_from_json(const nlohmann::json& j);

nlohmann::json graph_to_json(const FactorGraph& g);
FactorGraph graph_from_json(const nlohmann::json& j);

}  // namespace vfg
