#include "tgf/temporal_graph.hpp"

#include <cmath>
#include <limits>

namespace tgf {

std::vector<int> TemporalGraph::lane_rows() const {
  std::vector<int> rows(static_cast<std::size_t>(n_lanes));
  for (int i = 0; i < n_lanes; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

TemporalGraph build_temporal_graph(const NormalizedScene& scene, double edge_radius_m) {
  TemporalGraph g;
  g.n_lanes = static_cast<int>(scene.lanes.size());
  g.n_agents = static_cast<int>(scene.agents.size());
  const int n = g.n_nodes();
  const int aoi = scene.aoi_index();
  g.aoi_node = g.n_lanes + aoi;

  // Positions per agent per observed step, resolved once.
  std::vector<std::array<std::optional<Vec2>, kObsSteps>> pos(
      static_cast<std::size_t>(g.n_agents));
  for (int a = 0; a < g.n_agents; ++a) {
    for (const auto& p : scene.agents[static_cast<std::size_t>(a)].positions) {
      if (p.t < kObsSteps) pos[static_cast<std::size_t>(a)][static_cast<std::size_t>(p.t)] = p.pos;
    }
  }

  g.steps.resize(kObsSteps);
  for (int t = 0; t < kObsSteps; ++t) {
    auto& step = g.steps[static_cast<std::size_t>(t)];
    step.present.assign(static_cast<std::size_t>(n), false);
    step.adjacency = BoolMatrix::Constant(n, n, false);

    for (int l = 0; l < g.n_lanes; ++l) step.present[static_cast<std::size_t>(l)] = true;
    for (int a = 0; a < g.n_agents; ++a) {
      step.present[static_cast<std::size_t>(g.n_lanes + a)] =
          pos[static_cast<std::size_t>(a)][static_cast<std::size_t>(t)].has_value();
    }

    for (int i = 0; i < n; ++i) {
      if (step.present[static_cast<std::size_t>(i)]) step.adjacency(i, i) = true;
    }

    for (int a = 0; a < g.n_agents; ++a) {
      const auto& ap = pos[static_cast<std::size_t>(a)][static_cast<std::size_t>(t)];
      if (!ap) continue;
      const int node = g.n_lanes + a;
      for (int l = 0; l < g.n_lanes; ++l) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& cp : scene.lanes[static_cast<std::size_t>(l)].centerline) {
          best = std::min(best, (*ap - cp).norm());
        }
        if (best < edge_radius_m) {
          step.adjacency(node, l) = true;
          step.adjacency(l, node) = true;
        }
      }
      if (a != aoi && step.present[static_cast<std::size_t>(g.aoi_node)]) {
        step.adjacency(node, g.aoi_node) = true;
        step.adjacency(g.aoi_node, node) = true;
      }
    }
  }
  return g;
}

const BoolMatrix& mask_at(const TemporalGraph& g, int t) {
  if (t < 0 || t >= static_cast<int>(g.steps.size())) {
    throw ValidationError("mask_at: time index " + std::to_string(t) + " out of range");
  }
  return g.steps[static_cast<std::size_t>(t)].adjacency;
}

}  // namespace tgf
