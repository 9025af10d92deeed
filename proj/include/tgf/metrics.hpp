#pragma once

#include "tgf/types.hpp"

#include <string>
#include <vector>

namespace tgf {

// All four displacement metrics select the mode whose endpoint is closest to
// the ground-truth endpoint; ties break to the lowest index. A distance
// exactly equal to the miss threshold counts as a hit.

std::pair<double, int> min_fde(const std::vector<Matrix>& preds, const Matrix& gt);

double min_ade(const std::vector<Matrix>& preds, const Matrix& gt);

int miss(const std::vector<Matrix>& preds, const Matrix& gt, double threshold = kMissThreshold);

double brier_min_fde(const std::vector<Matrix>& preds, const Vector& probs, const Matrix& gt);

struct SceneMetrics {
  std::string scene_id;
  double min_ade = 0.0;
  double min_fde = 0.0;
  int miss = 0;
  double b_min_fde = 0.0;
};

SceneMetrics evaluate_scene(const std::string& scene_id, const std::vector<Matrix>& preds,
                            const Vector& probs, const Matrix& gt,
                            double threshold = kMissThreshold);

struct MetricsReport {
  std::vector<SceneMetrics> per_scene;
  double mean_min_ade = 0.0;
  double mean_min_fde = 0.0;
  double miss_rate = 0.0;
  double mean_b_min_fde = 0.0;
  int K = 0;
  double threshold = kMissThreshold;
};

MetricsReport aggregate(std::vector<SceneMetrics> per_scene, int K,
                        double threshold = kMissThreshold);

}  // namespace tgf
