#include "tgf/objective.hpp"

#include <cmath>

namespace tgf {

Matrix gt_matrix(const std::vector<Vec2>& gt_future) {
  if (static_cast<int>(gt_future.size()) != kFutSteps) {
    throw ValidationError("ground-truth future must have " + std::to_string(kFutSteps) +
                          " points");
  }
  Matrix gt(kFutSteps, 2);
  for (int i = 0; i < kFutSteps; ++i) gt.row(i) = gt_future[static_cast<std::size_t>(i)];
  return gt;
}

int closest_goal_index(const Matrix& refined, const Vec2& gt_end) {
  if (refined.rows() < 1) throw ValidationError("closest_goal_index: no goals");
  int best = 0;
  double best_dist = (refined.row(0).transpose() - gt_end).norm();
  for (int i = 1; i < refined.rows(); ++i) {
    const double d = (refined.row(i).transpose() - gt_end).norm();
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

std::pair<double, double> goal_losses(const GoalSet& goals, const Vec2& gt_end) {
  const int idx = closest_goal_index(goals.refined, gt_end);
  const double reg = 0.5 * (smooth_l1(goals.refined(idx, 0) - gt_end.x()) +
                            smooth_l1(goals.refined(idx, 1) - gt_end.y()));
  const double cls = -std::log(std::max(goals.scores(idx), 1e-12));
  return {reg, cls};
}

namespace {

int best_mode_by_endpoint(const std::vector<Matrix>& trajectories, const Vec2& gt_end) {
  int best = 0;
  double best_dist = (trajectories[0].row(kFutSteps - 1).transpose() - gt_end).norm();
  for (std::size_t k = 1; k < trajectories.size(); ++k) {
    const double d = (trajectories[k].row(kFutSteps - 1).transpose() - gt_end).norm();
    if (d < best_dist) {
      best = static_cast<int>(k);
      best_dist = d;
    }
  }
  return best;
}

double mean_smooth_l1(const Matrix& pred, const Matrix& gt) {
  double acc = 0.0;
  for (int r = 0; r < pred.rows(); ++r) {
    for (int c = 0; c < pred.cols(); ++c) acc += smooth_l1(pred(r, c) - gt(r, c));
  }
  return acc / static_cast<double>(pred.size());
}

}  // namespace

double trajectory_loss(const ForecastOutput& out, const Matrix& gt) {
  const Vec2 gt_end = gt.row(kFutSteps - 1).transpose();
  const int best = out.goals ? closest_goal_index(out.goals->refined, gt_end)
                             : best_mode_by_endpoint(out.trajectories, gt_end);
  return mean_smooth_l1(out.trajectories[static_cast<std::size_t>(best)], gt);
}

LossReport total_loss(const ForecastOutput& out, const Matrix& gt, const LossWeights& weights,
                      const ModelToggles& toggles) {
  LossReport report;
  const Vec2 gt_end = gt.row(kFutSteps - 1).transpose();
  if (out.goals) {
    report.closest_goal_index = closest_goal_index(out.goals->refined, gt_end);
    report.best_mode_index = report.closest_goal_index;
  } else {
    report.best_mode_index = best_mode_by_endpoint(out.trajectories, gt_end);
  }
  report.traj_loss =
      mean_smooth_l1(out.trajectories[static_cast<std::size_t>(report.best_mode_index)], gt);
  report.total = weights.traj * report.traj_loss;
  if (out.goals && toggles.goal_pred) {
    const auto [reg, cls] = goal_losses(*out.goals, gt_end);
    report.goal_cls_loss = cls;
    report.total += weights.goal_cls * cls;
    if (toggles.goal_loss) {
      report.goal_reg_loss = reg;
      report.total += weights.goal_reg * reg;
    }
  }
  return report;
}

LossGraph build_loss(Tape& t, const ForwardGraph& fg, const Matrix& gt,
                     const LossWeights& weights, const ModelToggles& toggles,
                     const std::optional<LossSelection>& frozen) {
  if (gt.rows() != kFutSteps || gt.cols() != 2) {
    throw ValidationError("build_loss: ground truth must be 30 x 2");
  }
  const Vec2 gt_end = gt.row(kFutSteps - 1).transpose();

  LossGraph graph;
  if (frozen) {
    graph.selection = *frozen;
  } else if (fg.has_goals) {
    graph.selection.closest_goal = closest_goal_index(t.value(fg.goals.refined), gt_end);
    graph.selection.best_mode = graph.selection.closest_goal;
  } else {
    std::vector<Matrix> trajs;
    trajs.reserve(fg.trajectories.size());
    for (const Var& v : fg.trajectories) trajs.push_back(t.value(v));
    graph.selection.best_mode = best_mode_by_endpoint(trajs, gt_end);
  }

  graph.traj = t.smooth_l1_mean(
      fg.trajectories[static_cast<std::size_t>(graph.selection.best_mode)], gt);
  graph.total = t.scale(graph.traj, weights.traj);

  if (fg.has_goals && toggles.goal_pred) {
    const int idx = graph.selection.closest_goal;
    const Var refined_row = t.gather_rows(fg.goals.refined, {idx});
    graph.goal_cls = t.scale(t.log_floor(t.pick(fg.goals.scores, 0, idx), 1e-12), -1.0);
    graph.total = t.add(graph.total, t.scale(graph.goal_cls, weights.goal_cls));
    if (toggles.goal_loss) {
      graph.goal_reg = t.smooth_l1_mean(refined_row, gt_end.transpose());
      graph.total = t.add(graph.total, t.scale(graph.goal_reg, weights.goal_reg));
    }
  }
  return graph;
}

GradCheckReport model_grad_check(Model& model, const NormalizedScene& filtered,
                                 const LossWeights& weights, double eps) {
  const SceneInputs inputs = prepare_inputs(filtered);
  const Matrix gt = gt_matrix(filtered.gt_future);
  LossSelection selection;
  {
    Tape tape;
    const ParamVars pv = lift_params(tape, model.params(), /*requires_grad=*/false);
    const ForwardGraph fg = model.build(tape, pv, inputs);
    selection = build_loss(tape, fg, gt, weights, model.config().toggles).selection;
  }
  const LossBuilder builder = [&](Tape& tape, const ParamVars& pv) {
    const ForwardGraph fg = model.build(tape, pv, inputs);
    return build_loss(tape, fg, gt, weights, model.config().toggles, selection).total;
  };
  return grad_check(builder, model.params(), eps);
}

}  // namespace tgf
