#include "tgf/metrics.hpp"

#include <cmath>

namespace tgf {

namespace {

void check_shapes(const std::vector<Matrix>& preds, const Matrix& gt) {
  if (preds.empty()) throw ValidationError("metrics: need at least one mode");
  if (gt.rows() != kFutSteps || gt.cols() != 2) {
    throw ValidationError("metrics: ground truth must be 30 x 2");
  }
  for (const Matrix& p : preds) {
    if (p.rows() != kFutSteps || p.cols() != 2) {
      throw ValidationError("metrics: every mode must be 30 x 2");
    }
  }
}

double endpoint_distance(const Matrix& pred, const Matrix& gt) {
  return (pred.row(kFutSteps - 1) - gt.row(kFutSteps - 1)).norm();
}

}  // namespace

std::pair<double, int> min_fde(const std::vector<Matrix>& preds, const Matrix& gt) {
  check_shapes(preds, gt);
  int best = 0;
  double best_dist = endpoint_distance(preds[0], gt);
  for (std::size_t k = 1; k < preds.size(); ++k) {
    const double d = endpoint_distance(preds[k], gt);
    if (d < best_dist) {
      best = static_cast<int>(k);
      best_dist = d;
    }
  }
  return {best_dist, best};
}

double min_ade(const std::vector<Matrix>& preds, const Matrix& gt) {
  const int best = min_fde(preds, gt).second;
  const Matrix& p = preds[static_cast<std::size_t>(best)];
  double acc = 0.0;
  for (int r = 0; r < kFutSteps; ++r) acc += (p.row(r) - gt.row(r)).norm();
  return acc / static_cast<double>(kFutSteps);
}

int miss(const std::vector<Matrix>& preds, const Matrix& gt, double threshold) {
  if (threshold <= 0.0) throw ValidationError("miss: threshold must be positive");
  return min_fde(preds, gt).first > threshold ? 1 : 0;
}

double brier_min_fde(const std::vector<Matrix>& preds, const Vector& probs, const Matrix& gt) {
  check_shapes(preds, gt);
  if (probs.size() != static_cast<Eigen::Index>(preds.size())) {
    throw ValidationError("brier_min_fde: probability count mismatch");
  }
  if (probs.minCoeff() < 0.0 || std::abs(probs.sum() - 1.0) > 1e-6) {
    throw ValidationError("brier_min_fde: probabilities are not a valid simplex point");
  }
  const auto [fde, best] = min_fde(preds, gt);
  const double p = probs(best);
  return fde + (1.0 - p) * (1.0 - p);
}

SceneMetrics evaluate_scene(const std::string& scene_id, const std::vector<Matrix>& preds,
                            const Vector& probs, const Matrix& gt, double threshold) {
  SceneMetrics m;
  m.scene_id = scene_id;
  m.min_fde = min_fde(preds, gt).first;
  m.min_ade = min_ade(preds, gt);
  m.miss = miss(preds, gt, threshold);
  m.b_min_fde = brier_min_fde(preds, probs, gt);
  return m;
}

MetricsReport aggregate(std::vector<SceneMetrics> per_scene, int K, double threshold) {
  if (per_scene.empty()) throw ValidationError("aggregate: empty dataset");
  MetricsReport report;
  report.K = K;
  report.threshold = threshold;
  double ade = 0.0, fde = 0.0, miss_acc = 0.0, brier = 0.0;
  for (const auto& m : per_scene) {
    ade += m.min_ade;
    fde += m.min_fde;
    miss_acc += m.miss;
    brier += m.b_min_fde;
  }
  const double n = static_cast<double>(per_scene.size());
  report.mean_min_ade = ade / n;
  report.mean_min_fde = fde / n;
  report.miss_rate = miss_acc / n;
  report.mean_b_min_fde = brier / n;
  report.per_scene = std::move(per_scene);
  return report;
}

}  // namespace tgf
