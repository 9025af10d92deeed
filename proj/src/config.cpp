#include "tgf/config.hpp"

#include "tgf/params.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace tgf {

using json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  model.validate();
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (epochs < 1) throw ValidationError("epochs must be positive");
  if (!(lr > 0.0)) throw ValidationError("lr must be positive");
  if (!(lr_decay_factor > 0.0)) throw ValidationError("lr_decay_factor must be positive");
  for (const int e : lr_decay_epochs) {
    if (e >= epochs) {
      throw ValidationError("decay epoch " + std::to_string(e) + " must be < epochs");
    }
    if (e < 1) throw ValidationError("decay epochs are 1-based");
  }
  if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be >= 0");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  int decays = 0;
  for (const int e : cfg.lr_decay_epochs) {
    if (epoch > e) ++decays;
  }
  // One division by factor^n keeps the stepped rates exact.
  return cfg.lr / std::pow(cfg.lr_decay_factor, static_cast<double>(decays));
}

std::string TrainConfig::canonical_string() const {
  std::ostringstream os;
  os << model.arch_string() << ";goal_loss=" << model.toggles.goal_loss
     << ";batch=" << batch_size << ";epochs=" << epochs << ";lr=" << lr << ";decay=[";
  for (const int e : lr_decay_epochs) os << e << ",";
  os << "]x" << lr_decay_factor << ";seed=" << seed << ";aug=" << augment
     << ";sigma=" << noise_sigma << ";w=(" << loss_weights.traj << "," << loss_weights.goal_reg
     << "," << loss_weights.goal_cls << ");filter="
     << (lane_filter == LaneFilterVariant::kAnyAgent ? "any_agent" : "aoi_only");
  return os.str();
}

std::uint64_t TrainConfig::config_hash() const { return fnv1a64(canonical_string()); }

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config parse error in " + path + ": " + e.what());
  }

  TrainConfig cfg;
  maybe(j, "seed", cfg.seed);
  maybe(j, "epochs", cfg.epochs);
  maybe(j, "batch_size", cfg.batch_size);
  maybe(j, "lr", cfg.lr);
  maybe(j, "lr_decay_epochs", cfg.lr_decay_epochs);
  maybe(j, "lr_decay_factor", cfg.lr_decay_factor);
  maybe(j, "k", cfg.model.K);
  maybe(j, "feature_dim", cfg.model.feature_dim);
  maybe(j, "augment", cfg.augment);
  maybe(j, "noise_sigma", cfg.noise_sigma);
  maybe(j, "per_step_state", cfg.model.per_step_state);
  maybe(j, "scene_mem_mlp", cfg.model.scene_mem_mlp);
  if (j.contains("toggles")) {
    const auto& t = j.at("toggles");
    maybe(t, "tg", cfg.model.toggles.tg);
    maybe(t, "seq_mem", cfg.model.toggles.seq_mem);
    maybe(t, "scene_mem", cfg.model.toggles.scene_mem);
    maybe(t, "goal_pred", cfg.model.toggles.goal_pred);
    maybe(t, "goal_loss", cfg.model.toggles.goal_loss);
  }
  if (j.contains("loss_weights")) {
    const auto& w = j.at("loss_weights");
    maybe(w, "traj", cfg.loss_weights.traj);
    maybe(w, "goal_reg", cfg.loss_weights.goal_reg);
    maybe(w, "goal_cls", cfg.loss_weights.goal_cls);
  }
  if (j.contains("goal_agent_source")) {
    const std::string src = j.at("goal_agent_source").get<std::string>();
    if (src == "composite") {
      cfg.model.goal_agent_source_full = true;
    } else if (src == "enhanced") {
      cfg.model.goal_agent_source_full = false;
    } else {
      throw ValidationError("goal_agent_source must be composite|enhanced, got " + src);
    }
  }
  if (j.contains("lane_filter")) {
    const std::string f = j.at("lane_filter").get<std::string>();
    if (f == "any_agent") {
      cfg.lane_filter = LaneFilterVariant::kAnyAgent;
    } else if (f == "aoi_only") {
      cfg.lane_filter = LaneFilterVariant::kAoiOnly;
    } else {
      throw ValidationError("lane_filter must be any_agent|aoi_only, got " + f);
    }
  }
  return cfg;
}

void save_config(const TrainConfig& cfg, const std::string& path) {
  json j;
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["lr_decay_epochs"] = cfg.lr_decay_epochs;
  j["lr_decay_factor"] = cfg.lr_decay_factor;
  j["k"] = cfg.model.K;
  j["feature_dim"] = cfg.model.feature_dim;
  j["augment"] = cfg.augment;
  j["noise_sigma"] = cfg.noise_sigma;
  j["toggles"] = json{{"tg", cfg.model.toggles.tg},
                      {"seq_mem", cfg.model.toggles.seq_mem},
                      {"scene_mem", cfg.model.toggles.scene_mem},
                      {"goal_pred", cfg.model.toggles.goal_pred},
                      {"goal_loss", cfg.model.toggles.goal_loss}};
  j["loss_weights"] = json{{"traj", cfg.loss_weights.traj},
                           {"goal_reg", cfg.loss_weights.goal_reg},
                           {"goal_cls", cfg.loss_weights.goal_cls}};
  j["per_step_state"] = cfg.model.per_step_state;
  j["scene_mem_mlp"] = cfg.model.scene_mem_mlp;
  j["goal_agent_source"] = cfg.model.goal_agent_source_full ? "composite" : "enhanced";
  j["lane_filter"] =
      cfg.lane_filter == LaneFilterVariant::kAnyAgent ? "any_agent" : "aoi_only";

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << j.dump(1) << "\n";
}

}  // namespace tgf
