#pragma once

#include "tgf/memory.hpp"

#include <array>
#include <optional>

namespace tgf {

// Goal proposal/refinement/scoring plus goal-conditioned trajectory
// completion. With goal prediction toggled off a direct-regression head
// emits K trajectories from the agent representation and probabilities stay
// uniform.
struct GoalDecoderParams {
  std::optional<Mlp2P> map_g2;
  std::optional<AffineP> map_agg;  // applied to h_mem inside the map feature
  std::optional<Mlp2P> agent_head;
  std::optional<Mlp2P> map_head;
  std::array<AffineP, 3> point_encoder{};
  std::optional<AttentionP> point_cross;
  std::optional<AffineP> offset_head;
  std::optional<AffineP> logit_head;
  std::optional<Mlp2P> traj_head;
  std::optional<Mlp2P> direct_head;
  int K = 0;
  int feature_dim = 0;
};

GoalDecoderParams add_goal_decoder(ParamStore& store, int feature_dim, int K, bool goal_pred,
                                   bool scene_mem, bool agent_head_uses_composite,
                                   int composite_width);

// g2(concat(max-pool of lane rows, agg(h_mem))). The h_mem term exists only
// when scene memory is on; an empty lane set contributes a zero vector.
Var map_feature(Tape& t, const ParamVars& pv, const GoalDecoderParams& p, Var F_T,
                const std::vector<int>& lane_rows, Var h_mem);

// K x 2 proposals: agent-head half first, then the map-head half.
Var propose_goals(Tape& t, const ParamVars& pv, const GoalDecoderParams& p, Var agent_slice,
                  Var map_f);

// Per point: three ReLU-separated affine layers on concat(point, enhanced).
Var encode_goal_points(Tape& t, const ParamVars& pv, const GoalDecoderParams& p, Var points,
                       Var enhanced);

struct GoalGraph {
  Var proposals;  // K x 2
  Var refined;    // K x 2
  Var logits;     // 1 x K
  Var scores;     // 1 x K, softmax of logits
};

GoalGraph refine_and_score(Tape& t, const ParamVars& pv, const GoalDecoderParams& p,
                           Var proposals, Var point_feats, Var F_T);

// 30 x 2 trajectory from concat(agent representation, goal feature).
Var complete_trajectory(Tape& t, const ParamVars& pv, const GoalDecoderParams& p,
                        Var agent_composite, Var goal_feat);

}  // namespace tgf
