#pragma once

#include "tgf/model.hpp"

#include <optional>

namespace tgf {

struct LossWeights {
  double traj = 1.0;
  double goal_reg = 1.0;
  double goal_cls = 1.0;
};

struct LossReport {
  double traj_loss = 0.0;
  double goal_reg_loss = 0.0;
  double goal_cls_loss = 0.0;
  double total = 0.0;
  int best_mode_index = -1;
  int closest_goal_index = -1;
};

// Argmin of Euclidean endpoint distance; ties break to the lowest index.
int closest_goal_index(const Matrix& refined, const Vec2& gt_end);

// (reg, cls): mean smooth-L1 over the closest refined goal's coordinates and
// the negative log score of that goal (scores floored at 1e-12).
std::pair<double, double> goal_losses(const GoalSet& goals, const Vec2& gt_end);

// Winner-takes-all smooth-L1 over the best mode's 30 x 2 residuals; the best
// mode is the one whose refined goal (or trajectory endpoint, without goals)
// is closest to the ground-truth endpoint.
double trajectory_loss(const ForecastOutput& out, const Matrix& gt);

LossReport total_loss(const ForecastOutput& out, const Matrix& gt, const LossWeights& weights,
                      const ModelToggles& toggles);

// Mode/goal selection frozen for finite-difference probes.
struct LossSelection {
  int best_mode = -1;
  int closest_goal = -1;
};

struct LossGraph {
  Var total;
  Var traj;
  Var goal_reg;  // invalid when unused
  Var goal_cls;
  LossSelection selection;
};

// Tape-building twin of total_loss; the argmin selection is treated as a
// constant during backpropagation.
LossGraph build_loss(Tape& t, const ForwardGraph& fg, const Matrix& gt,
                     const LossWeights& weights, const ModelToggles& toggles,
                     const std::optional<LossSelection>& frozen = std::nullopt);

Matrix gt_matrix(const std::vector<Vec2>& gt_future);

// Finite-difference check of the full model loss on one scene, with the
// winner-takes-all selection frozen at the evaluation point.
GradCheckReport model_grad_check(Model& model, const NormalizedScene& filtered,
                                 const LossWeights& weights, double eps = 1e-6);

}  // namespace tgf
