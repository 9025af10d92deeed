#pragma once

#include "tgf/nn.hpp"
#include "tgf/temporal_encoder.hpp"

#include <array>
#include <optional>
#include <vector>

namespace tgf {

inline constexpr int kSceneMemoryLayers = 3;

// Sequential AoI memory, layered scene memory, and the cross-attention
// assembly of the enhanced agent-of-interest representation. Blocks are
// registered per toggle so parameter counts track the active variant.
struct MemoryParams {
  std::optional<GruP> seq_gru;
  std::optional<AffineP> scene_init;  // g0
  std::array<AttentionP, kSceneMemoryLayers> scene_attention{};
  std::array<LayerNormP, kSceneMemoryLayers> scene_norm{};
  std::array<Mlp2P, kSceneMemoryLayers> scene_mlp{};  // optional refinement
  std::optional<GruP> scene_gru;
  AttentionP cross_all;
  AttentionP cross_lanes;
  bool scene_mlp_enabled = false;
};

MemoryParams add_memory(ParamStore& store, int feature_dim, bool seq_enabled, bool scene_enabled,
                        bool scene_mlp_enabled);

// One GRU update of the sequential AoI memory.
Var seq_memory_update(Tape& t, const ParamVars& pv, const MemoryParams& p, Var f_t, Var h_prev);

// g0, then kSceneMemoryLayers of full self-attention + layer norm, then a
// max-pool over rows. Returns the 1 x d summary m_t.
Var scene_memory_encode(Tape& t, const ParamVars& pv, const MemoryParams& p, Var F_t);

// One GRU update of the scene memory.
Var scene_memory_update(Tape& t, const ParamVars& pv, const MemoryParams& p, Var m_t, Var h_prev);

struct MemoryRollout {
  Var h_seq;  // final state at T, invalid when the toggle is off
  Var h_mem;
};

// Rolls both memories over the feature sequence with zero-initialized states.
MemoryRollout run_memory(Tape& t, const ParamVars& pv, const MemoryParams& p,
                         const std::vector<Var>& features, int aoi_node);

struct AgentRepr {
  Var enhanced;   // 1 x 3d: AoI row, cross-att over all rows, over lane rows
  Var composite;  // enhanced plus the active memory states
  bool lane_term_zero = false;
};

AgentRepr assemble_agent_repr(Tape& t, const ParamVars& pv, const MemoryParams& p, Var F_T,
                              int aoi_node, const std::vector<int>& lane_rows,
                              const MemoryRollout& memories);

}  // namespace tgf
