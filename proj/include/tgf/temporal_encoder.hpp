#pragma once

#include "tgf/context_encoder.hpp"
#include "tgf/nn.hpp"
#include "tgf/temporal_graph.hpp"

#include <vector>

namespace tgf {

// Runs the per-timestep graph updates: masked self-attention from the
// previous step's features, then time-encoded fusion through g1. Parameters
// are shared across all timesteps.
struct TemporalEncoderParams {
  TimeEncoderP time;
  AttentionP attention;
  Mlp2P g1;
  Mlp2P state_embed;  // lifts a node's (x, y) state; zero state for lanes
};

TemporalEncoderParams add_temporal_encoder(ParamStore& store, int feature_dim);

// Node states at one step: N x 2 positions, zero rows for lanes and absent
// agents.
Matrix node_states_at(const NormalizedScene& scene, const TemporalGraph& graph, int t);

// F_0: context features plus the state embedding of each node's step-0 state.
Var init_node_features(Tape& t, const ParamVars& pv, const TemporalEncoderParams& p, Var ctx,
                       const Matrix& states0);

// Masked attention under the step mask; absent rows are carried from F_prev.
Var temporal_step(Tape& t, const ParamVars& pv, const AttentionP& attn, Var F_prev,
                  const BoolMatrix& mask, const std::vector<bool>& present);

// Per row: g1(attended + time_encode(t_index)).
Var fuse_time(Tape& t, const ParamVars& pv, const TemporalEncoderParams& p, Var attended,
              int t_index);

struct TemporalRun {
  std::vector<Var> features;  // F_0..F_19, each N x d
};

// per_step_state additionally injects each node's position embedding at every
// step before fusion (config option; default off).
TemporalRun run_temporal(Tape& t, const ParamVars& pv, const TemporalEncoderParams& p, Var ctx,
                         const TemporalGraph& graph, const NormalizedScene& scene,
                         bool per_step_state = false);

}  // namespace tgf
