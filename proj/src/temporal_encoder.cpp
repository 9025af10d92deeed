#include "tgf/temporal_encoder.hpp"

namespace tgf {

TemporalEncoderParams add_temporal_encoder(ParamStore& store, int feature_dim) {
  TemporalEncoderParams p;
  p.time = add_time_encoder(store, "temporal.time", feature_dim);
  p.attention = add_attention(store, "temporal.attention", feature_dim);
  p.g1 = add_mlp2(store, "temporal.g1", feature_dim, feature_dim, feature_dim);
  p.state_embed = add_mlp2(store, "temporal.state", 2, feature_dim, feature_dim);
  return p;
}

Matrix node_states_at(const NormalizedScene& scene, const TemporalGraph& graph, int t) {
  Matrix states = Matrix::Zero(graph.n_nodes(), 2);
  for (int a = 0; a < graph.n_agents; ++a) {
    const auto pos = scene.agents[static_cast<std::size_t>(a)].position_at(t);
    if (pos) states.row(graph.n_lanes + a) = pos->transpose();
  }
  return states;
}

Var init_node_features(Tape& t, const ParamVars& pv, const TemporalEncoderParams& p, Var ctx,
                       const Matrix& states0) {
  if (t.value(ctx).rows() != states0.rows()) {
    throw ValidationError("init_node_features: context rows misaligned with node ordering");
  }
  return t.add(ctx, mlp2(t, pv, p.state_embed, t.constant(states0)));
}

Var temporal_step(Tape& t, const ParamVars& pv, const AttentionP& attn, Var F_prev,
                  const BoolMatrix& mask, const std::vector<bool>& present) {
  const Var attended = masked_self_attention(t, pv, attn, F_prev, mask, &present).output;
  return t.where_rows(present, attended, F_prev);
}

Var fuse_time(Tape& t, const ParamVars& pv, const TemporalEncoderParams& p, Var attended,
              int t_index) {
  return mlp2(t, pv, p.g1,
              t.add_row_broadcast(attended, time_encode(t, pv, p.time, t_index)));
}

TemporalRun run_temporal(Tape& t, const ParamVars& pv, const TemporalEncoderParams& p, Var ctx,
                         const TemporalGraph& graph, const NormalizedScene& scene,
                         bool per_step_state) {
  TemporalRun run;
  run.features.reserve(kObsSteps);
  Var F = init_node_features(t, pv, p, ctx, node_states_at(scene, graph, 0));
  run.features.push_back(F);
  for (int step = 1; step < kObsSteps; ++step) {
    const auto& present = graph.steps[static_cast<std::size_t>(step)].present;
    Var attended = masked_self_attention(t, pv, p.attention, F, mask_at(graph, step), &present)
                       .output;
    if (per_step_state) {
      attended = t.add(attended,
                       mlp2(t, pv, p.state_embed,
                            t.constant(node_states_at(scene, graph, step))));
    }
    const Var fused = fuse_time(t, pv, p, attended, step);
    // Absent rows carry their previous feature forward unchanged.
    F = t.where_rows(present, fused, F);
    run.features.push_back(F);
  }
  return run;
}

}  // namespace tgf
