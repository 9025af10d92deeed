#include "tgf/scene_io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace tgf {

using json = nlohmann::ordered_json;

namespace {

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("parse error in " + path + ": " + e.what());
  }
  return j;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << j.dump(1) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

json point_to_json(const Vec2& p) { return json{{"x", p.x()}, {"y", p.y()}}; }

Vec2 point_from_json(const json& j, const std::string& where) {
  if (!j.contains("x") || !j.contains("y")) {
    throw IoError("scene record: missing coordinate in " + where);
  }
  return Vec2(j.at("x").get<double>(), j.at("y").get<double>());
}

}  // namespace

std::string turn_direction_name(TurnDirection t) {
  switch (t) {
    case TurnDirection::kLeft:
      return "left";
    case TurnDirection::kRight:
      return "right";
    case TurnDirection::kNone:
      break;
  }
  return "none";
}

TurnDirection turn_direction_from(const std::string& name) {
  if (name == "left") return TurnDirection::kLeft;
  if (name == "right") return TurnDirection::kRight;
  if (name == "none") return TurnDirection::kNone;
  throw IoError("unknown turn_direction: " + name);
}

void save_scene(const RawScene& scene, const std::string& path) {
  json j;
  j["scene_id"] = scene.scene_id;
  j["dt"] = scene.dt;
  j["t_obs"] = scene.t_obs;
  j["t_fut"] = scene.t_fut;
  j["aoi_id"] = scene.aoi_id;
  j["agents"] = json::array();
  for (const auto& agent : scene.agents) {
    json a;
    a["id"] = agent.agent_id;
    a["steps"] = json::array();
    for (const auto& p : agent.positions) {
      a["steps"].push_back(json{{"t", p.t}, {"x", p.pos.x()}, {"y", p.pos.y()}});
    }
    j["agents"].push_back(std::move(a));
  }
  j["lanes"] = json::array();
  for (const auto& lane : scene.lanes) {
    json l;
    l["id"] = lane.lane_id;
    l["centerline"] = json::array();
    for (const auto& p : lane.centerline) l["centerline"].push_back(point_to_json(p));
    l["is_intersection"] = lane.is_intersection;
    l["turn_direction"] = turn_direction_name(lane.turn_direction);
    j["lanes"].push_back(std::move(l));
  }
  j["gt_future"] = json::array();
  for (const auto& p : scene.gt_future) j["gt_future"].push_back(point_to_json(p));
  write_json(j, path);
}

RawScene load_scene(const std::string& path) {
  const json j = load_json(path);
  RawScene scene;
  try {
    scene.scene_id = j.at("scene_id").get<std::string>();
    scene.dt = j.at("dt").get<double>();
    scene.t_obs = j.at("t_obs").get<int>();
    scene.t_fut = j.at("t_fut").get<int>();
    scene.aoi_id = j.at("aoi_id").get<std::string>();
    for (const auto& a : j.at("agents")) {
      AgentTrack track;
      track.agent_id = a.at("id").get<std::string>();
      track.is_aoi = track.agent_id == scene.aoi_id;
      for (const auto& s : a.at("steps")) {
        track.positions.push_back(
            {s.at("t").get<int>(), Vec2(s.at("x").get<double>(), s.at("y").get<double>())});
      }
      scene.agents.push_back(std::move(track));
    }
    for (const auto& l : j.at("lanes")) {
      LaneSegment lane;
      lane.lane_id = l.at("id").get<std::string>();
      for (const auto& p : l.at("centerline")) {
        lane.centerline.push_back(point_from_json(p, "lane " + lane.lane_id));
      }
      lane.is_intersection = l.at("is_intersection").get<bool>();
      lane.turn_direction = turn_direction_from(l.at("turn_direction").get<std::string>());
      scene.lanes.push_back(std::move(lane));
    }
    for (const auto& p : j.at("gt_future")) {
      scene.gt_future.push_back(point_from_json(p, "gt_future"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("scene record " + path + ": " + e.what());
  }
  scene.validate();
  return scene;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  json j;
  j["master_seed"] = manifest.master_seed;
  j["scenes"] = json::array();
  for (const auto& e : manifest.entries) {
    j["scenes"].push_back(json{{"scene_id", e.scene_id},
                               {"file", e.file},
                               {"template", e.template_name},
                               {"seed", e.seed},
                               {"split", e.split}});
  }
  write_json(j, path);
}

Manifest load_manifest(const std::string& path) {
  const json j = load_json(path);
  Manifest manifest;
  try {
    manifest.master_seed = j.at("master_seed").get<std::uint64_t>();
    for (const auto& e : j.at("scenes")) {
      manifest.entries.push_back({e.at("scene_id").get<std::string>(),
                                  e.at("file").get<std::string>(),
                                  e.at("template").get<std::string>(),
                                  e.at("seed").get<std::uint64_t>(),
                                  e.at("split").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest " + path + ": " + e.what());
  }
  return manifest;
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const Manifest manifest = load_manifest((fs::path(dir) / "manifest.json").string());
  Dataset dataset;
  for (const auto& e : manifest.entries) {
    RawScene scene = load_scene((fs::path(dir) / e.file).string());
    if (e.split == "val") {
      dataset.val.push_back(std::move(scene));
    } else {
      dataset.train.push_back(std::move(scene));
    }
  }
  return dataset;
}

void save_predictions(const std::vector<ForecastOutput>& outputs, const std::string& path,
                      bool raw_frame) {
  json j = json::array();
  for (const auto& out : outputs) {
    json rec;
    rec["scene_id"] = out.scene_id;
    rec["K"] = static_cast<int>(out.trajectories.size());
    rec["frame"] = raw_frame ? "raw" : "normalized";
    if (raw_frame) {
      rec["transform"] = json{{"angle", out.transform.angle},
                              {"tx", out.transform.translation.x()},
                              {"ty", out.transform.translation.y()}};
    }
    rec["modes"] = json::array();
    for (std::size_t k = 0; k < out.trajectories.size(); ++k) {
      json mode;
      mode["probability"] = out.probabilities(static_cast<Eigen::Index>(k));
      const Matrix& traj = out.trajectories[k];
      const auto map_point = [&](const Vec2& p) {
        return raw_frame ? out.transform.apply_inverse(p) : p;
      };
      const Vec2 endpoint = map_point(traj.row(kFutSteps - 1).transpose());
      mode["endpoint"] = point_to_json(endpoint);
      mode["trajectory"] = json::array();
      for (int r = 0; r < traj.rows(); ++r) {
        mode["trajectory"].push_back(point_to_json(map_point(traj.row(r).transpose())));
      }
      rec["modes"].push_back(std::move(mode));
    }
    j.push_back(std::move(rec));
  }
  write_json(j, path);
}

std::vector<ForecastOutput> load_predictions(const std::string& path) {
  const json j = load_json(path);
  std::vector<ForecastOutput> outputs;
  try {
    for (const auto& rec : j) {
      ForecastOutput out;
      out.scene_id = rec.at("scene_id").get<std::string>();
      const bool raw = rec.at("frame").get<std::string>() == "raw";
      if (raw) {
        const auto& tf = rec.at("transform");
        out.transform.angle = tf.at("angle").get<double>();
        out.transform.translation =
            Vec2(tf.at("tx").get<double>(), tf.at("ty").get<double>());
      }
      const auto& modes = rec.at("modes");
      out.probabilities = Vector(modes.size());
      Eigen::Index k = 0;
      for (const auto& mode : modes) {
        out.probabilities(k) = mode.at("probability").get<double>();
        Matrix traj(kFutSteps, 2);
        const auto& steps = mode.at("trajectory");
        if (static_cast<int>(steps.size()) != kFutSteps) {
          throw IoError("prediction record " + out.scene_id + ": trajectory length mismatch");
        }
        int r = 0;
        for (const auto& p : steps) {
          Vec2 q = point_from_json(p, "trajectory");
          if (raw) q = out.transform.apply(q);  // back to the normalized frame
          traj.row(r++) = q.transpose();
        }
        out.trajectories.push_back(std::move(traj));
        ++k;
      }
      outputs.push_back(std::move(out));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("prediction file " + path + ": " + e.what());
  }
  return outputs;
}

void write_metrics_report(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "scene_id\tmin_ade\tmin_fde\tmiss\tb_min_fde\n";
  char line[256];
  for (const auto& m : report.per_scene) {
    std::snprintf(line, sizeof(line), "%s\t%.9f\t%.9f\t%d\t%.9f\n", m.scene_id.c_str(),
                  m.min_ade, m.min_fde, m.miss, m.b_min_fde);
    os << line;
  }
  std::snprintf(line, sizeof(line),
                "# aggregate scenes=%zu K=%d threshold=%.1f min_ade=%.9f min_fde=%.9f "
                "miss_rate=%.9f b_min_fde=%.9f\n",
                report.per_scene.size(), report.K, report.threshold, report.mean_min_ade,
                report.mean_min_fde, report.miss_rate, report.mean_b_min_fde);
  os << line;
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace tgf
