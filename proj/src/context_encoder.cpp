#include "tgf/context_encoder.hpp"

namespace tgf {

Matrix vector_features(const PolyVector& v) {
  Matrix f = Matrix::Zero(1, kVectorFeatureDim);
  f(0, 0) = v.start.x();
  f(0, 1) = v.start.y();
  f(0, 2) = v.end.x();
  f(0, 3) = v.end.y();
  f(0, 4) = v.end.x() - v.start.x();
  f(0, 5) = v.end.y() - v.start.y();
  f(0, 6) = v.kind == ElementKind::kLane ? 1.0 : 0.0;
  f(0, 7) = v.kind == ElementKind::kAgent ? 1.0 : 0.0;
  f(0, 8) = v.is_intersection ? 1.0 : 0.0;
  f(0, 9) = v.turn_direction == TurnDirection::kNone ? 1.0 : 0.0;
  f(0, 10) = v.turn_direction == TurnDirection::kLeft ? 1.0 : 0.0;
  f(0, 11) = v.turn_direction == TurnDirection::kRight ? 1.0 : 0.0;
  f(0, 12) = v.timestamp_norm;
  return f;
}

ContextEncoderParams add_context_encoder(ParamStore& store, int feature_dim) {
  if (feature_dim < 2 || feature_dim % 2 != 0) {
    throw ValidationError("context encoder needs an even feature_dim >= 2");
  }
  ContextEncoderParams p;
  p.feature_dim = feature_dim;
  const int half = feature_dim / 2;
  p.subgraph[0] = add_mlp2(store, "context.subgraph0", kVectorFeatureDim, feature_dim, half);
  p.subgraph[1] = add_mlp2(store, "context.subgraph1", feature_dim, feature_dim, half);
  p.subgraph[2] = add_mlp2(store, "context.subgraph2", feature_dim, feature_dim, half);
  p.global = add_attention(store, "context.global", feature_dim);
  return p;
}

Var encode_polyline(Tape& t, const ParamVars& pv, const ContextEncoderParams& p,
                    const ScenePolyline& poly) {
  if (poly.vectors.empty()) {
    return t.constant(Matrix::Zero(1, p.feature_dim));
  }
  Matrix inputs(static_cast<int>(poly.vectors.size()), kVectorFeatureDim);
  for (std::size_t i = 0; i < poly.vectors.size(); ++i) {
    inputs.row(static_cast<int>(i)) = vector_features(poly.vectors[i]).row(0);
  }
  Var rows = t.constant(std::move(inputs));
  Var pooled{};
  for (const auto& layer : p.subgraph) {
    const Var encoded = mlp2(t, pv, layer, rows);
    pooled = t.colwise_max(encoded);
    const int n = static_cast<int>(t.value(encoded).rows());
    // Broadcast the polyline pool next to each vector's own feature.
    const Var tiled = t.add_row_broadcast(
        t.constant(Matrix::Zero(n, t.value(pooled).cols())), pooled);
    const std::array<Var, 2> parts{encoded, tiled};
    rows = t.concat_cols(parts);
  }
  return t.rowwise_l2_normalize(t.colwise_max(rows));
}

Var global_interaction(Tape& t, const ParamVars& pv, const ContextEncoderParams& p,
                       Var features) {
  if (t.value(features).rows() < 1) {
    throw ValidationError("global_interaction: needs at least one feature row");
  }
  return cross_attention(t, pv, p.global, features, features).output;
}

Var encode_context(Tape& t, const ParamVars& pv, const ContextEncoderParams& p,
                   const PolylineSet& set) {
  if (set.polylines.empty()) throw ValidationError("encode_context: empty polyline set");
  std::vector<Var> rows;
  rows.reserve(set.polylines.size());
  for (const auto& poly : set.polylines) {
    rows.push_back(encode_polyline(t, pv, p, poly));
  }
  return global_interaction(t, pv, p, t.concat_rows(rows));
}

}  // namespace tgf
