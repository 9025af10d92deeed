#pragma once

#include "tgf/config.hpp"
#include "tgf/metrics.hpp"
#include "tgf/scene_io.hpp"

#include <string>
#include <vector>

namespace tgf {

// normalize + lane filter, the shared preprocessing for every pipeline entry.
NormalizedScene preprocess(const RawScene& raw,
                           LaneFilterVariant variant = LaneFilterVariant::kAnyAgent);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double mean_train_loss = 0.0;
  int optimizer_steps = 0;
  double val_min_ade = 0.0;
  double val_min_fde = 0.0;
  double val_miss_rate = 0.0;
  double val_b_min_fde = 0.0;
  std::string checkpoint;
};

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::uint64_t arch_hash = 0;
  std::vector<EpochRecord> epochs;
  std::string best_checkpoint;
  long total_steps = 0;
  double wall_clock_sec = 0.0;
};

void save_run_record(const RunRecord& record, const std::string& path);

struct TrainCallbacks {
  // Invoked after each epoch; return false to stop early (used by the
  // acceptance harness; the CLI always runs the full schedule).
  std::function<bool(const EpochRecord&)> after_epoch;
};

// Seeded shuffling, per-scene augmentation, ordered-mean batch gradients,
// one Adam step per batch, a checkpoint per epoch, validation metrics per
// epoch, best checkpoint selected by validation b-minFDE.
RunRecord train(Model& model, const TrainConfig& cfg, const Dataset& data,
                const std::string& out_dir, const TrainCallbacks& callbacks = {});

MetricsReport evaluate(const Model& model, const std::vector<RawScene>& scenes,
                       LaneFilterVariant variant = LaneFilterVariant::kAnyAgent);

std::vector<ForecastOutput> predict_scenes(
    const Model& model, const std::vector<RawScene>& scenes,
    LaneFilterVariant variant = LaneFilterVariant::kAnyAgent);

// Metrics from prediction records against the scenes' ground truth.
MetricsReport evaluate_predictions(const std::vector<ForecastOutput>& predictions,
                                   const std::vector<RawScene>& scenes,
                                   LaneFilterVariant variant = LaneFilterVariant::kAnyAgent);

}  // namespace tgf
