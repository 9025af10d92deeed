#pragma once

#include "tgf/datagen.hpp"
#include "tgf/metrics.hpp"
#include "tgf/model.hpp"
#include "tgf/scene.hpp"

#include <string>
#include <vector>

namespace tgf {

// Scene record: one JSON document per scene with scene_id, dt, t_obs, t_fut,
// aoi_id, agents[{id, steps[{t, x, y}]}], lanes[{id, centerline[{x, y}],
// is_intersection, turn_direction}], gt_future[{x, y}]. Doubles round-trip
// exactly through the shortest decimal representation.
void save_scene(const RawScene& scene, const std::string& path);
RawScene load_scene(const std::string& path);

void save_manifest(const Manifest& manifest, const std::string& path);
Manifest load_manifest(const std::string& path);

struct Dataset {
  std::vector<RawScene> train;
  std::vector<RawScene> val;
};

// Loads every record listed in dir/manifest.json.
Dataset load_dataset(const std::string& dir);

// Prediction record: scene_id, K, modes[{probability, endpoint, trajectory}],
// frame tag and, for raw-frame exports, the normalized-to-raw transform.
void save_predictions(const std::vector<ForecastOutput>& outputs, const std::string& path,
                      bool raw_frame = false);
std::vector<ForecastOutput> load_predictions(const std::string& path);

// Metrics report: one tab-separated row per scene plus an aggregate footer.
void write_metrics_report(const MetricsReport& report, const std::string& path);

std::string turn_direction_name(TurnDirection t);
TurnDirection turn_direction_from(const std::string& name);

}  // namespace tgf
