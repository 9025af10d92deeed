#include "tgf/scene.hpp"

#include "tgf/rng.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace tgf {

std::array<bool, kObsSteps> AgentTrack::present_mask() const {
  std::array<bool, kObsSteps> mask{};
  for (const auto& p : positions) {
    if (p.t >= 0 && p.t < kObsSteps) mask[static_cast<std::size_t>(p.t)] = true;
  }
  return mask;
}

std::optional<Vec2> AgentTrack::position_at(int t) const {
  for (const auto& p : positions) {
    if (p.t == t) return p.pos;
    if (p.t > t) break;
  }
  return std::nullopt;
}

int AgentTrack::num_observed() const {
  int n = 0;
  for (const auto& p : positions) {
    if (p.t < kObsSteps) ++n;
  }
  return n;
}

int RawScene::aoi_index() const {
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (agents[i].is_aoi) return static_cast<int>(i);
  }
  throw ValidationError("scene " + scene_id + ": no agent of interest");
}

void RawScene::validate() const {
  if (t_obs + t_fut != kTotalSteps || t_obs != kObsSteps) {
    throw ValidationError("scene " + scene_id + ": timing contract violated (t_obs=" +
                          std::to_string(t_obs) + ", t_fut=" + std::to_string(t_fut) + ")");
  }
  if (dt != kDt) {
    throw ValidationError("scene " + scene_id + ": dt must be 0.1 s");
  }
  int aoi_count = 0;
  for (const auto& agent : agents) {
    int prev_t = -1;
    for (const auto& p : agent.positions) {
      if (p.t <= prev_t) {
        throw ValidationError("scene " + scene_id + ": agent " + agent.agent_id +
                              " time indices not strictly increasing");
      }
      if (p.t < 0 || p.t >= kTotalSteps) {
        throw ValidationError("scene " + scene_id + ": agent " + agent.agent_id +
                              " time index out of range");
      }
      if (!p.pos.allFinite()) {
        throw ValidationError("scene " + scene_id + ": agent " + agent.agent_id +
                              " has non-finite position");
      }
      prev_t = p.t;
    }
    if (agent.is_aoi) {
      ++aoi_count;
      if (agent.agent_id != aoi_id) {
        throw ValidationError("scene " + scene_id + ": aoi_id mismatch");
      }
      const auto mask = agent.present_mask();
      for (int t = 0; t < kObsSteps; ++t) {
        if (!mask[static_cast<std::size_t>(t)]) {
          throw ValidationError("scene " + scene_id + ": agent of interest absent at step " +
                                std::to_string(t));
        }
      }
    }
  }
  if (aoi_count != 1) {
    throw ValidationError("scene " + scene_id + ": expected exactly one agent of interest, got " +
                          std::to_string(aoi_count));
  }
  for (const auto& lane : lanes) {
    if (lane.centerline.size() < 2) {
      throw ValidationError("scene " + scene_id + ": lane " + lane.lane_id +
                            " needs >= 2 centerline points");
    }
    for (std::size_t i = 1; i < lane.centerline.size(); ++i) {
      if (lane.centerline[i] == lane.centerline[i - 1]) {
        throw ValidationError("scene " + scene_id + ": lane " + lane.lane_id +
                              " has repeated consecutive centerline points");
      }
    }
  }
  if (!gt_future.empty() && static_cast<int>(gt_future.size()) != kFutSteps) {
    throw ValidationError("scene " + scene_id + ": gt_future must have " +
                          std::to_string(kFutSteps) + " points");
  }
}

Vec2 FrameTransform::apply(const Vec2& p) const {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2(c * p.x() - s * p.y(), s * p.x() + c * p.y()) + translation;
}

Vec2 FrameTransform::apply_inverse(const Vec2& p) const {
  const Vec2 q = p - translation;
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2(c * q.x() + s * q.y(), -s * q.x() + c * q.y());
}

namespace {

template <typename Fn>
void for_each_coordinate(RawScene& scene, Fn&& fn) {
  for (auto& agent : scene.agents) {
    for (auto& p : agent.positions) p.pos = fn(p.pos);
  }
  for (auto& lane : scene.lanes) {
    for (auto& p : lane.centerline) p = fn(p);
  }
  for (auto& p : scene.gt_future) p = fn(p);
}

}  // namespace

NormalizedScene normalize_scene(const RawScene& scene) {
  scene.validate();
  const AgentTrack& aoi = scene.aoi();

  const auto anchor = aoi.position_at(kObsSteps - 1);
  if (!anchor) {
    throw ValidationError("scene " + scene.scene_id + ": agent of interest missing step 19");
  }

  // Heading from the last two distinct observed positions.
  std::optional<Vec2> prev_distinct;
  for (int t = kObsSteps - 2; t >= 0; --t) {
    const auto p = aoi.position_at(t);
    if (p && (*p - *anchor).norm() > 0.0) {
      prev_distinct = p;
      break;
    }
  }
  if (!prev_distinct) {
    throw DegenerateHeadingError("scene " + scene.scene_id +
                                 ": agent of interest is stationary, heading undefined");
  }
  const Vec2 dir = *anchor - *prev_distinct;
  const double heading = std::atan2(dir.y(), dir.x());

  FrameTransform tf;
  tf.angle = -heading;
  const double c = std::cos(tf.angle), s = std::sin(tf.angle);
  tf.translation = -Vec2(c * anchor->x() - s * anchor->y(), s * anchor->x() + c * anchor->y());

  NormalizedScene out;
  static_cast<RawScene&>(out) = scene;
  out.transform = tf;
  for_each_coordinate(out, [&](const Vec2& p) { return tf.apply(p); });
  return out;
}

namespace {

double manhattan(const Vec2& a, const Vec2& b) {
  return std::abs(a.x() - b.x()) + std::abs(a.y() - b.y());
}

}  // namespace

NormalizedScene filter_lanes(const NormalizedScene& scene, double radius_m,
                             LaneFilterVariant variant) {
  std::vector<Vec2> probe;
  for (const auto& agent : scene.agents) {
    if (variant == LaneFilterVariant::kAoiOnly && !agent.is_aoi) continue;
    for (const auto& p : agent.positions) {
      if (p.t < kObsSteps) probe.push_back(p.pos);
    }
  }

  NormalizedScene out = scene;
  out.lanes.clear();
  for (const auto& lane : scene.lanes) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& cp : lane.centerline) {
      for (const auto& ap : probe) best = std::min(best, manhattan(cp, ap));
    }
    if (best < radius_m) out.lanes.push_back(lane);
  }
  return out;
}

PolylineSet vectorize(const NormalizedScene& scene) {
  PolylineSet set;
  set.n_lanes = static_cast<int>(scene.lanes.size());
  set.n_agents = static_cast<int>(scene.agents.size());
  set.polylines.reserve(scene.lanes.size() + scene.agents.size());

  int element = 0;
  for (const auto& lane : scene.lanes) {
    ScenePolyline poly;
    poly.element = element;
    poly.kind = ElementKind::kLane;
    for (std::size_t i = 1; i < lane.centerline.size(); ++i) {
      PolyVector v;
      v.start = lane.centerline[i - 1];
      v.end = lane.centerline[i];
      v.kind = ElementKind::kLane;
      v.is_intersection = lane.is_intersection;
      v.turn_direction = lane.turn_direction;
      v.element = element;
      poly.vectors.push_back(v);
    }
    set.polylines.push_back(std::move(poly));
    ++element;
  }

  for (std::size_t ai = 0; ai < scene.agents.size(); ++ai) {
    const auto& agent = scene.agents[ai];
    ScenePolyline poly;
    poly.element = element;
    poly.kind = ElementKind::kAgent;
    const TimedPosition* prev = nullptr;
    for (const auto& p : agent.positions) {
      if (p.t >= kObsSteps) break;
      if (prev != nullptr) {
        PolyVector v;
        v.start = prev->pos;
        v.end = p.pos;
        v.kind = ElementKind::kAgent;
        v.timestamp_norm = static_cast<double>(p.t) / (kObsSteps - 1);
        v.element = element;
        poly.vectors.push_back(v);
      }
      prev = &p;
    }
    poly.degenerate = poly.vectors.empty();
    if (agent.is_aoi) set.aoi_node = element;
    set.polylines.push_back(std::move(poly));
    ++element;
  }
  return set;
}

NormalizedScene augment_scale(const NormalizedScene& scene, double s) {
  if (!(s >= 0.75 && s <= 1.25)) {
    throw ValidationError("scale factor " + std::to_string(s) + " outside [0.75, 1.25]");
  }
  NormalizedScene out = scene;
  for_each_coordinate(out, [s](const Vec2& p) { return Vec2(s * p); });
  return out;
}

NormalizedScene augment_noise(const NormalizedScene& scene, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ValidationError("noise sigma must be >= 0");
  NormalizedScene out = scene;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  // Draw order is fixed: agents (observed steps) in order, then lanes.
  for (auto& agent : out.agents) {
    for (auto& p : agent.positions) {
      if (p.t >= kObsSteps) continue;
      p.pos.x() += rng.gaussian(0.0, sigma);
      p.pos.y() += rng.gaussian(0.0, sigma);
    }
  }
  for (auto& lane : out.lanes) {
    for (auto& p : lane.centerline) {
      p.x() += rng.gaussian(0.0, sigma);
      p.y() += rng.gaussian(0.0, sigma);
    }
  }
  return out;
}

}  // namespace tgf
