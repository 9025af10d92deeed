#pragma once

#include "tgf/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tgf {

enum class Layout { kStraight, kCurve, kTIntersection, kFourWay };

enum class Behavior {
  kConstantSpeed,
  kDecelerateYield,
  kAccelerate,
  kTurnLeft,
  kTurnRight,
  kLaneFollow
};

struct ScenarioTemplate {
  std::string name;
  Layout layout = Layout::kStraight;
  std::vector<Behavior> behaviors;  // index 0 is the agent of interest
  double speed_min = 6.0;
  double speed_max = 12.0;

  // Turns and yields need an intersection; 1..8 agents.
  void validate() const;
};

struct KinematicProfile {
  double initial_arc_length = 0.0;
  double initial_speed = 0.0;
  std::vector<double> accel;  // one entry per step interval, piecewise-constant
  std::vector<std::string> lane_path;
};

// Deterministic 50-step scene; agents follow lane centerlines under their
// kinematic profiles with a constant seeded lateral offset. A yielding agent
// approaching a shared intersection after a conflicting agent brakes to a
// near-stop until the conflict clears.
RawScene gen_scene(const ScenarioTemplate& tmpl, std::uint64_t seed);

// Named standard templates: straight, curve, yield, yield_heavy, turn_left,
// turn_right, lane_follow.
ScenarioTemplate standard_template(const std::string& name);
std::vector<std::string> standard_template_names();

struct DatasetSpec {
  std::vector<std::pair<ScenarioTemplate, int>> counts;
  double val_fraction = 0.2;
};

struct ManifestEntry {
  std::string scene_id;
  std::string file;
  std::string template_name;
  std::uint64_t seed = 0;
  std::string split;  // "train" | "val"
};

struct Manifest {
  std::uint64_t master_seed = 0;
  std::vector<ManifestEntry> entries;
};

// Writes one scene record per file plus manifest.json under dir.
Manifest gen_dataset(const DatasetSpec& spec, std::uint64_t master_seed, const std::string& dir);

}  // namespace tgf
