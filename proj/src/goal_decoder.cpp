#include "tgf/goal_decoder.hpp"

namespace tgf {

GoalDecoderParams add_goal_decoder(ParamStore& store, int feature_dim, int K, bool goal_pred,
                                   bool scene_mem, bool agent_head_uses_composite,
                                   int composite_width) {
  if (K < 2 || K % 2 != 0) {
    throw ValidationError("goal decoder requires an even K >= 2, got " + std::to_string(K));
  }
  GoalDecoderParams p;
  p.K = K;
  p.feature_dim = feature_dim;
  const int d = feature_dim;
  const int agent_in = agent_head_uses_composite ? composite_width : 3 * d;
  if (goal_pred) {
    const int map_in = scene_mem ? 2 * d : d;
    p.map_g2 = add_mlp2(store, "decoder.map_g2", map_in, d, d);
    if (scene_mem) p.map_agg = add_affine(store, "decoder.map_agg", d, d);
    p.agent_head = add_mlp2(store, "decoder.goal_agent", agent_in, d, K);
    p.map_head = add_mlp2(store, "decoder.goal_map", d, d, K);
    p.point_encoder[0] = add_affine(store, "decoder.point0", 2 + 3 * d, d);
    p.point_encoder[1] = add_affine(store, "decoder.point1", d, d);
    p.point_encoder[2] = add_affine(store, "decoder.point2", d, d);
    p.point_cross = add_attention(store, "decoder.point_cross", d);
    p.offset_head = add_affine(store, "decoder.offset", d, 2);
    p.logit_head = add_affine(store, "decoder.logit", d, 1);
    p.traj_head = add_mlp2(store, "decoder.traj", composite_width + d, d, 2 * kFutSteps);
  } else {
    p.direct_head = add_mlp2(store, "decoder.direct", composite_width, d, K * 2 * kFutSteps);
  }
  return p;
}

Var map_feature(Tape& t, const ParamVars& pv, const GoalDecoderParams& p, Var F_T,
                const std::vector<int>& lane_rows, Var h_mem) {
  if (!p.map_g2) throw ValidationError("map_feature: goal prediction is disabled");
  const int d = p.feature_dim;
  const Var lane_pool = lane_rows.empty()
                            ? t.constant(Matrix::Zero(1, d))
                            : max_pool(t, t.gather_rows(F_T, lane_rows));
  if (p.map_agg) {
    if (!h_mem.valid()) throw ValidationError("map_feature: missing scene memory state");
    const std::array<Var, 2> parts{lane_pool, affine(t, pv, *p.map_agg, h_mem)};
    return mlp2(t, pv, *p.map_g2, t.concat_cols(parts));
  }
  return mlp2(t, pv, *p.map_g2, lane_pool);
}

namespace {

// 1 x K row of coordinates -> K/2 x 2 points.
Var reshape_pairs(Tape& t, Var row) {
  const int k = static_cast<int>(t.value(row).cols());
  std::vector<Var> points;
  points.reserve(static_cast<std::size_t>(k / 2));
  for (int i = 0; i < k / 2; ++i) {
    points.push_back(t.slice_cols(row, 2 * i, 2));
  }
  return t.concat_rows(points);
}

}  // namespace

Var propose_goals(Tape& t, const ParamVars& pv, const GoalDecoderParams& p, Var agent_slice,
                  Var map_f) {
  if (!p.agent_head) throw ValidationError("propose_goals: goal prediction is disabled");
  const Var from_agent = reshape_pairs(t, mlp2(t, pv, *p.agent_head, agent_slice));
  const Var from_map = reshape_pairs(t, mlp2(t, pv, *p.map_head, map_f));
  const std::array<Var, 2> parts{from_agent, from_map};
  return t.concat_rows(parts);
}

Var encode_goal_points(Tape& t, const ParamVars& pv, const GoalDecoderParams& p, Var points,
                       Var enhanced) {
  const int k = static_cast<int>(t.value(points).rows());
  // Tile the enhanced feature next to every point.
  const Var tiled = t.add_row_broadcast(
      t.constant(Matrix::Zero(k, t.value(enhanced).cols())), enhanced);
  const std::array<Var, 2> parts{points, tiled};
  Var x = t.concat_cols(parts);
  x = t.relu(affine(t, pv, p.point_encoder[0], x));
  x = t.relu(affine(t, pv, p.point_encoder[1], x));
  return affine(t, pv, p.point_encoder[2], x);
}

GoalGraph refine_and_score(Tape& t, const ParamVars& pv, const GoalDecoderParams& p,
                           Var proposals, Var point_feats, Var F_T) {
  if (!p.offset_head) throw ValidationError("refine_and_score: goal prediction is disabled");
  if (t.value(F_T).rows() < 1) throw ValidationError("refine_and_score: empty scene features");
  const Var ctx = cross_attention(t, pv, *p.point_cross, point_feats, F_T).output;
  GoalGraph g;
  g.proposals = proposals;
  g.refined = t.add(proposals, affine(t, pv, *p.offset_head, ctx));
  // K x 1 logits transposed into one softmax row.
  const Var logits_col = affine(t, pv, *p.logit_head, ctx);
  std::vector<Var> entries;
  for (int i = 0; i < p.K; ++i) entries.push_back(t.pick(logits_col, i, 0));
  g.logits = t.concat_cols(entries);
  g.scores = t.masked_softmax(g.logits, BoolMatrix::Constant(1, p.K, true));
  return g;
}

Var complete_trajectory(Tape& t, const ParamVars& pv, const GoalDecoderParams& p,
                        Var agent_composite, Var goal_feat) {
  if (!p.traj_head) throw ValidationError("complete_trajectory: goal prediction is disabled");
  const std::array<Var, 2> parts{agent_composite, goal_feat};
  const Var flat = mlp2(t, pv, *p.traj_head, t.concat_cols(parts));
  std::vector<Var> steps;
  steps.reserve(kFutSteps);
  for (int i = 0; i < kFutSteps; ++i) {
    steps.push_back(t.slice_cols(flat, 2 * i, 2));
  }
  return t.concat_rows(steps);
}

}  // namespace tgf
