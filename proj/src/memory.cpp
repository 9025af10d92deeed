#include "tgf/memory.hpp"

namespace tgf {

MemoryParams add_memory(ParamStore& store, int feature_dim, bool seq_enabled, bool scene_enabled,
                        bool scene_mlp_enabled) {
  MemoryParams p;
  if (seq_enabled) {
    p.seq_gru = add_gru(store, "memory.seq", feature_dim);
  }
  if (scene_enabled) {
    p.scene_init = add_affine(store, "memory.scene.g0", feature_dim, feature_dim);
    for (int l = 0; l < kSceneMemoryLayers; ++l) {
      const std::string base = "memory.scene.layer" + std::to_string(l);
      p.scene_attention[static_cast<std::size_t>(l)] = add_attention(store, base, feature_dim);
      p.scene_norm[static_cast<std::size_t>(l)] =
          add_layer_norm(store, base + ".norm", feature_dim);
      if (scene_mlp_enabled) {
        p.scene_mlp[static_cast<std::size_t>(l)] =
            add_mlp2(store, base + ".mlp", feature_dim, feature_dim, feature_dim);
      }
    }
    p.scene_gru = add_gru(store, "memory.scene.gru", feature_dim);
    p.scene_mlp_enabled = scene_mlp_enabled;
  }
  p.cross_all = add_attention(store, "memory.cross_all", feature_dim);
  p.cross_lanes = add_attention(store, "memory.cross_lanes", feature_dim);
  return p;
}

Var seq_memory_update(Tape& t, const ParamVars& pv, const MemoryParams& p, Var f_t, Var h_prev) {
  if (!p.seq_gru) throw ValidationError("seq_memory_update: sequential memory is disabled");
  return gru_step(t, pv, *p.seq_gru, f_t, h_prev);
}

Var scene_memory_encode(Tape& t, const ParamVars& pv, const MemoryParams& p, Var F_t) {
  if (!p.scene_init) throw ValidationError("scene_memory_encode: scene memory is disabled");
  const int d = static_cast<int>(t.value(F_t).cols());
  if (t.value(F_t).rows() < 1) {
    return t.constant(Matrix::Zero(1, d));  // flagged fallback for empty scenes
  }
  Var m = affine(t, pv, *p.scene_init, F_t);
  const int n = static_cast<int>(t.value(m).rows());
  const BoolMatrix full = BoolMatrix::Constant(n, n, true);
  for (int l = 0; l < kSceneMemoryLayers; ++l) {
    const auto& attn = p.scene_attention[static_cast<std::size_t>(l)];
    const Var attended = masked_self_attention(t, pv, attn, m, full).output;
    m = layer_norm(t, pv, p.scene_norm[static_cast<std::size_t>(l)], attended);
    if (p.scene_mlp_enabled) {
      m = mlp2(t, pv, p.scene_mlp[static_cast<std::size_t>(l)], m);
    }
  }
  return max_pool(t, m);
}

Var scene_memory_update(Tape& t, const ParamVars& pv, const MemoryParams& p, Var m_t,
                        Var h_prev) {
  if (!p.scene_gru) throw ValidationError("scene_memory_update: scene memory is disabled");
  return gru_step(t, pv, *p.scene_gru, m_t, h_prev);
}

MemoryRollout run_memory(Tape& t, const ParamVars& pv, const MemoryParams& p,
                         const std::vector<Var>& features, int aoi_node) {
  MemoryRollout out;
  if (features.empty()) throw ValidationError("run_memory: empty feature sequence");
  const int d = static_cast<int>(t.value(features.front()).cols());
  if (p.seq_gru) {
    Var h = t.constant(Matrix::Zero(1, d));
    for (const Var& F : features) {
      const Var f_aoi = t.gather_rows(F, {aoi_node});
      h = seq_memory_update(t, pv, p, f_aoi, h);
    }
    out.h_seq = h;
  }
  if (p.scene_gru) {
    Var h = t.constant(Matrix::Zero(1, d));
    for (const Var& F : features) {
      h = scene_memory_update(t, pv, p, scene_memory_encode(t, pv, p, F), h);
    }
    out.h_mem = h;
  }
  return out;
}

AgentRepr assemble_agent_repr(Tape& t, const ParamVars& pv, const MemoryParams& p, Var F_T,
                              int aoi_node, const std::vector<int>& lane_rows,
                              const MemoryRollout& memories) {
  const int d = static_cast<int>(t.value(F_T).cols());
  const Var f_aoi = t.gather_rows(F_T, {aoi_node});
  const Var over_all = cross_attention(t, pv, p.cross_all, f_aoi, F_T).output;
  AgentRepr repr;
  Var over_lanes;
  if (lane_rows.empty()) {
    over_lanes = t.constant(Matrix::Zero(1, d));
    repr.lane_term_zero = true;
  } else {
    over_lanes =
        cross_attention(t, pv, p.cross_lanes, f_aoi, t.gather_rows(F_T, lane_rows)).output;
  }
  const std::array<Var, 3> parts{f_aoi, over_all, over_lanes};
  repr.enhanced = t.concat_cols(parts);

  std::vector<Var> composite{repr.enhanced};
  if (memories.h_seq.valid()) composite.push_back(memories.h_seq);
  if (memories.h_mem.valid()) composite.push_back(memories.h_mem);
  repr.composite = composite.size() == 1 ? repr.enhanced : t.concat_cols(composite);
  return repr;
}

}  // namespace tgf
