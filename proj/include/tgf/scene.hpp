#pragma once

#include "tgf/types.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace tgf {

enum class TurnDirection { kNone, kLeft, kRight };

struct TimedPosition {
  int t = 0;  // 0..49
  Vec2 pos = Vec2::Zero();
};

struct AgentTrack {
  std::string agent_id;
  std::vector<TimedPosition> positions;  // strictly increasing t
  bool is_aoi = false;

  // Presence over the observed window, derived from positions.
  std::array<bool, kObsSteps> present_mask() const;
  std::optional<Vec2> position_at(int t) const;
  int num_observed() const;
};

struct LaneSegment {
  std::string lane_id;
  std::vector<Vec2> centerline;  // >= 2 points, consecutive distinct
  bool is_intersection = false;
  TurnDirection turn_direction = TurnDirection::kNone;
};

struct RawScene {
  std::string scene_id;
  std::vector<AgentTrack> agents;
  std::vector<LaneSegment> lanes;
  std::string aoi_id;
  double dt = kDt;
  int t_obs = kObsSteps;
  int t_fut = kFutSteps;
  std::vector<Vec2> gt_future;  // 30 points, training/eval only (may be empty)

  int aoi_index() const;
  const AgentTrack& aoi() const { return agents.at(static_cast<std::size_t>(aoi_index())); }

  // Throws ValidationError when a structural invariant is broken.
  void validate() const;
};

// Rigid map from raw coordinates into the normalized frame:
// p_norm = R(angle) * p_raw + translation.
struct FrameTransform {
  double angle = 0.0;
  Vec2 translation = Vec2::Zero();

  Vec2 apply(const Vec2& p) const;
  Vec2 apply_inverse(const Vec2& p) const;
  static FrameTransform identity() { return {}; }
};

struct NormalizedScene : RawScene {
  FrameTransform transform;
};

enum class ElementKind { kLane, kAgent };

struct PolyVector {
  Vec2 start = Vec2::Zero();
  Vec2 end = Vec2::Zero();
  ElementKind kind = ElementKind::kLane;
  bool is_intersection = false;
  TurnDirection turn_direction = TurnDirection::kNone;
  double timestamp_norm = 0.0;  // agent vectors: end step / (t_obs - 1)
  int element = 0;              // node index in the lanes-first ordering
};

struct ScenePolyline {
  int element = 0;
  ElementKind kind = ElementKind::kLane;
  std::vector<PolyVector> vectors;
  bool degenerate = false;  // agent with < 2 observed positions
};

struct PolylineSet {
  std::vector<ScenePolyline> polylines;  // lanes first, then agents
  int n_lanes = 0;
  int n_agents = 0;
  int aoi_node = -1;

  int n_nodes() const { return n_lanes + n_agents; }
};

enum class LaneFilterVariant { kAnyAgent, kAoiOnly };

// Translates/rotates the scene so the agent of interest sits at the origin
// heading +x at the last observed step. Throws DegenerateHeadingError when
// every observed position of the agent of interest coincides.
NormalizedScene normalize_scene(const RawScene& scene);

// Keeps lanes whose minimum Manhattan distance from any centerline point to
// any (or only the AoI's) observed agent position is strictly below radius_m.
NormalizedScene filter_lanes(const NormalizedScene& scene, double radius_m = kLaneFilterRadius,
                             LaneFilterVariant variant = LaneFilterVariant::kAnyAgent);

PolylineSet vectorize(const NormalizedScene& scene);

// Multiplies every coordinate (agents, lanes, gt_future) by s in [0.75, 1.25].
NormalizedScene augment_scale(const NormalizedScene& scene, double s);

// Adds iid Gaussian offsets to lane centerline points and observed agent
// positions; gt_future stays clean.
NormalizedScene augment_noise(const NormalizedScene& scene, double sigma, std::uint64_t seed);

}  // namespace tgf
