#pragma once

#include "tgf/nn.hpp"
#include "tgf/scene.hpp"

#include <array>

namespace tgf {

// Fixed per-vector input packing: start, end, end-start, element-kind
// one-hot, intersection flag, turn-direction one-hot, normalized timestamp,
// zero-padded to kVectorFeatureDim.
inline constexpr int kVectorFeatureDim = 16;

Matrix vector_features(const PolyVector& v);

// Per-polyline subgraph (3 layers of mlp2 + polyline max-pool concat,
// L2-normalized pooled output) followed by one full self-attention pass over
// all polyline features.
struct ContextEncoderParams {
  std::array<Mlp2P, 3> subgraph;
  AttentionP global;
  int feature_dim = 0;
};

ContextEncoderParams add_context_encoder(ParamStore& store, int feature_dim);

// 1 x d unit-norm feature; empty polylines yield the zero row.
Var encode_polyline(Tape& t, const ParamVars& pv, const ContextEncoderParams& p,
                    const ScenePolyline& poly);

// One unmasked single-head self-attention pass, N x d -> N x d.
Var global_interaction(Tape& t, const ParamVars& pv, const ContextEncoderParams& p, Var features);

// Full context pass: subgraph per polyline (rows in node order), then the
// global interaction graph.
Var encode_context(Tape& t, const ParamVars& pv, const ContextEncoderParams& p,
                   const PolylineSet& set);

}  // namespace tgf
