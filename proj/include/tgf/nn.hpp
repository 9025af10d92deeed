#pragma once

#include "tgf/params.hpp"
#include "tgf/tape.hpp"
#include "tgf/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tgf {

// Parameter-block index bundles. Each add_* registers blocks on the store
// and returns the handle used when building graphs.

struct AffineP {
  int W = -1;  // in x out
  int b = -1;  // 1 x out
};

struct LayerNormP {
  int gain = -1;
  int bias = -1;
};

// affine -> layer-norm -> ReLU -> affine
struct Mlp2P {
  AffineP first;
  LayerNormP norm;
  AffineP second;
};

struct AttentionP {
  int WQ = -1;
  int WK = -1;
  int WV = -1;
  int dim = 0;  // key length d_k
};

struct GruP {
  AffineP update;     // W_z, b_z
  int update_h = -1;  // U_z
  AffineP reset;
  int reset_h = -1;
  AffineP candidate;
  int candidate_h = -1;
};

struct TimeEncoderP {
  int omega = -1;  // 1 x d
  int phase = -1;  // 1 x d
};

AffineP add_affine(ParamStore& store, const std::string& name, int in, int out);
LayerNormP add_layer_norm(ParamStore& store, const std::string& name, int dim);
Mlp2P add_mlp2(ParamStore& store, const std::string& name, int in, int hidden, int out);
AttentionP add_attention(ParamStore& store, const std::string& name, int dim);
GruP add_gru(ParamStore& store, const std::string& name, int dim);
TimeEncoderP add_time_encoder(ParamStore& store, const std::string& name, int dim);

// --- graph builders ---

// x: N x in -> N x out, rows transformed by W then shifted by b.
Var affine(Tape& t, const ParamVars& pv, const AffineP& p, Var x);

Var layer_norm(Tape& t, const ParamVars& pv, const LayerNormP& p, Var x);

Var mlp2(Tape& t, const ParamVars& pv, const Mlp2P& p, Var x);

struct AttentionResult {
  Var output;
  Var weights;  // softmax matrix, rows over keys
};

// Single-head scaled dot-product attention over F's rows, with masked logits
// removed before the softmax. Rows whose mask is empty yield zero output.
// When `present` is given, a present node with an all-false mask row is a
// precondition violation and throws.
AttentionResult masked_self_attention(Tape& t, const ParamVars& pv, const AttentionP& p, Var F,
                                      const BoolMatrix& mask,
                                      const std::vector<bool>* present = nullptr);

// queries: M x d against context: N x d (N >= 1), full softmax per query row.
AttentionResult cross_attention(Tape& t, const ParamVars& pv, const AttentionP& p, Var queries,
                                Var context);

// One GRU cell update; x and h are 1 x d rows (or N x d batches).
Var gru_step(Tape& t, const ParamVars& pv, const GruP& p, Var x, Var h);

// Entrywise maximum over rows; N >= 1.
Var max_pool(Tape& t, Var rows);

// cos(omega * t_index * dt + phase); time enters in physical seconds.
Var time_encode(Tape& t, const ParamVars& pv, const TimeEncoderP& p, int t_index,
                double dt = kDt);

// --- verification oracle ---

// Builds the loss twice per perturbed coordinate and compares central finite
// differences against the analytic gradient from one backward pass. Returns
// the max over coordinates of |a - f| / max(1, |a|, |f|).
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_block;
  int worst_row = -1;
  int worst_col = -1;
};

using LossBuilder = std::function<Var(Tape&, const ParamVars&)>;

GradCheckReport grad_check(const LossBuilder& build_loss, ParamStore& params, double eps = 1e-6);

}  // namespace tgf
