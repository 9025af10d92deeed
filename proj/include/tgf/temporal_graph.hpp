#pragma once

#include "tgf/scene.hpp"
#include "tgf/types.hpp"

#include <vector>

namespace tgf {

// Per-timestep graph over lane and agent nodes. Nodes are ordered lanes
// first, then agents, matching PolylineSet. Lane nodes are present at every
// step; agent presence follows the observed track. Edges: agent-lane within
// edge_radius_m of the nearest centerline point, AoI-agent for every other
// present agent, and self-loops for all present nodes.
struct TemporalGraph {
  int n_lanes = 0;
  int n_agents = 0;
  int aoi_node = -1;

  struct Step {
    std::vector<bool> present;
    BoolMatrix adjacency;
  };
  std::vector<Step> steps;  // size kObsSteps

  int n_nodes() const { return n_lanes + n_agents; }
  std::vector<int> lane_rows() const;
};

TemporalGraph build_temporal_graph(const NormalizedScene& scene, double edge_radius_m = kEdgeRadius);

// The symmetric boolean attention mask at step t. Throws ValidationError for
// t outside [0, 19].
const BoolMatrix& mask_at(const TemporalGraph& g, int t);

}  // namespace tgf
