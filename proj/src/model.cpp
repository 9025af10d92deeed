#include "tgf/model.hpp"

#include <sstream>

namespace tgf {

void ModelConfig::validate() const {
  if (feature_dim < 4 || feature_dim % 2 != 0) {
    throw ValidationError("feature_dim must be an even value >= 4, got " +
                          std::to_string(feature_dim));
  }
  if (K < 2 || K % 2 != 0) {
    throw ValidationError("K must be an even value >= 2, got " + std::to_string(K));
  }
  if ((toggles.seq_mem || toggles.scene_mem) && !toggles.tg) {
    throw ValidationError("memory modules require the temporal graph toggle");
  }
}

int ModelConfig::composite_width() const {
  int w = 3 * feature_dim;
  if (toggles.seq_mem) w += feature_dim;
  if (toggles.scene_mem) w += feature_dim;
  return w;
}

std::string ModelConfig::arch_string() const {
  std::ostringstream os;
  os << "v1;d=" << feature_dim << ";K=" << K << ";tg=" << toggles.tg
     << ";seq=" << toggles.seq_mem << ";scene=" << toggles.scene_mem
     << ";goal=" << toggles.goal_pred << ";per_step=" << per_step_state
     << ";scene_mlp=" << scene_mem_mlp << ";goal_src_full=" << goal_agent_source_full;
  return os.str();
}

std::uint64_t ModelConfig::arch_hash() const { return fnv1a64(arch_string()); }

SceneInputs prepare_inputs(const NormalizedScene& filtered) {
  SceneInputs inputs;
  inputs.scene = filtered;
  inputs.polylines = vectorize(filtered);
  inputs.graph = build_temporal_graph(filtered);
  return inputs;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.feature_dim;
  context_ = add_context_encoder(params_, d);
  if (cfg_.toggles.tg) {
    temporal_ = add_temporal_encoder(params_, d);
  }
  memory_ = add_memory(params_, d, cfg_.toggles.seq_mem, cfg_.toggles.scene_mem,
                       cfg_.scene_mem_mlp);
  decoder_ = add_goal_decoder(params_, d, cfg_.K, cfg_.toggles.goal_pred, cfg_.toggles.scene_mem,
                              cfg_.goal_agent_source_full, cfg_.composite_width());
}

ForwardGraph Model::build(Tape& tape, const ParamVars& pv, const SceneInputs& inputs) const {
  ForwardGraph fg;
  fg.lane_rows = inputs.graph.lane_rows();
  fg.aoi_node = inputs.graph.aoi_node;

  fg.context = encode_context(tape, pv, context_, inputs.polylines);

  if (cfg_.toggles.tg) {
    const TemporalRun run = run_temporal(tape, pv, *temporal_, fg.context, inputs.graph,
                                         inputs.scene, cfg_.per_step_state);
    fg.feature_sequence = run.features;
    fg.F_T = run.features.back();
    fg.memories = run_memory(tape, pv, memory_, run.features, fg.aoi_node);
  } else {
    fg.F_T = fg.context;
  }

  fg.agent = assemble_agent_repr(tape, pv, memory_, fg.F_T, fg.aoi_node, fg.lane_rows,
                                 fg.memories);

  if (cfg_.toggles.goal_pred) {
    fg.map_f = map_feature(tape, pv, decoder_, fg.F_T, fg.lane_rows, fg.memories.h_mem);
    const Var agent_slice =
        cfg_.goal_agent_source_full ? fg.agent.composite : fg.agent.enhanced;
    const Var proposals = propose_goals(tape, pv, decoder_, agent_slice, fg.map_f);
    const Var point_feats = encode_goal_points(tape, pv, decoder_, proposals, fg.agent.enhanced);
    fg.goals = refine_and_score(tape, pv, decoder_, proposals, point_feats, fg.F_T);
    fg.has_goals = true;

    const Var refined_feats =
        encode_goal_points(tape, pv, decoder_, fg.goals.refined, fg.agent.enhanced);
    fg.trajectories.reserve(static_cast<std::size_t>(cfg_.K));
    for (int k = 0; k < cfg_.K; ++k) {
      const Var goal_feat = tape.gather_rows(refined_feats, {k});
      fg.trajectories.push_back(
          complete_trajectory(tape, pv, decoder_, fg.agent.composite, goal_feat));
    }
  } else {
    const Var flat = mlp2(tape, pv, *decoder_.direct_head, fg.agent.composite);
    fg.trajectories.reserve(static_cast<std::size_t>(cfg_.K));
    for (int k = 0; k < cfg_.K; ++k) {
      std::vector<Var> steps;
      steps.reserve(kFutSteps);
      for (int i = 0; i < kFutSteps; ++i) {
        steps.push_back(tape.slice_cols(flat, k * 2 * kFutSteps + 2 * i, 2));
      }
      fg.trajectories.push_back(tape.concat_rows(steps));
    }
  }
  return fg;
}

ForecastOutput Model::forecast(const SceneInputs& inputs) const {
  Tape tape;
  const ParamVars pv = lift_params(tape, params_, /*requires_grad=*/false);
  const ForwardGraph fg = build(tape, pv, inputs);

  ForecastOutput out;
  out.scene_id = inputs.scene.scene_id;
  out.transform = inputs.scene.transform;
  out.trajectories.reserve(fg.trajectories.size());
  for (const Var& traj : fg.trajectories) {
    const Matrix& m = tape.value(traj);
    if (!m.allFinite()) {
      throw NumericalError("forecast: non-finite trajectory for scene " + inputs.scene.scene_id);
    }
    out.trajectories.push_back(m);
  }
  if (fg.has_goals) {
    GoalSet goals;
    goals.proposals = tape.value(fg.goals.proposals);
    goals.refined = tape.value(fg.goals.refined);
    goals.scores = tape.value(fg.goals.scores).row(0).transpose();
    if (!goals.refined.allFinite() || !goals.scores.allFinite()) {
      throw NumericalError("forecast: non-finite goals for scene " + inputs.scene.scene_id);
    }
    out.probabilities = goals.scores;
    out.goals = std::move(goals);
  } else {
    out.probabilities =
        Vector::Constant(cfg_.K, 1.0 / static_cast<double>(cfg_.K));
  }
  return out;
}

ForecastOutput Model::forecast(const NormalizedScene& filtered) const {
  return forecast(prepare_inputs(filtered));
}

}  // namespace tgf
