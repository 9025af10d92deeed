#pragma once

#include "tgf/model.hpp"
#include "tgf/objective.hpp"
#include "tgf/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tgf {

struct TrainConfig {
  ModelConfig model;
  int batch_size = 64;
  int epochs = 36;
  double lr = 1e-4;
  std::vector<int> lr_decay_epochs = {24, 30};  // divide after these epochs
  double lr_decay_factor = 5.0;
  std::uint64_t seed = 0;
  bool augment = true;
  double noise_sigma = 0.2;
  LossWeights loss_weights;
  LaneFilterVariant lane_filter = LaneFilterVariant::kAnyAgent;

  void validate() const;
  std::string canonical_string() const;
  std::uint64_t config_hash() const;
};

// Learning rate for a 1-based epoch index; each listed decay epoch divides
// the base rate by the factor once that epoch has finished.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& cfg, const std::string& path);

}  // namespace tgf
