#include "tgf/nn.hpp"

#include <array>
#include <cmath>

namespace tgf {

AffineP add_affine(ParamStore& store, const std::string& name, int in, int out) {
  AffineP p;
  p.W = store.add(name + ".W", in, out, Init::kXavier);
  p.b = store.add(name + ".b", 1, out, Init::kZero);
  return p;
}

LayerNormP add_layer_norm(ParamStore& store, const std::string& name, int dim) {
  LayerNormP p;
  p.gain = store.add(name + ".gain", 1, dim, Init::kOne);
  p.bias = store.add(name + ".bias", 1, dim, Init::kZero);
  return p;
}

Mlp2P add_mlp2(ParamStore& store, const std::string& name, int in, int hidden, int out) {
  Mlp2P p;
  p.first = add_affine(store, name + ".fc1", in, hidden);
  p.norm = add_layer_norm(store, name + ".norm", hidden);
  p.second = add_affine(store, name + ".fc2", hidden, out);
  return p;
}

AttentionP add_attention(ParamStore& store, const std::string& name, int dim) {
  AttentionP p;
  p.WQ = store.add(name + ".WQ", dim, dim, Init::kXavier);
  p.WK = store.add(name + ".WK", dim, dim, Init::kXavier);
  p.WV = store.add(name + ".WV", dim, dim, Init::kXavier);
  p.dim = dim;
  return p;
}

GruP add_gru(ParamStore& store, const std::string& name, int dim) {
  GruP p;
  p.update = add_affine(store, name + ".z", dim, dim);
  p.update_h = store.add(name + ".z.U", dim, dim, Init::kXavier);
  p.reset = add_affine(store, name + ".r", dim, dim);
  p.reset_h = store.add(name + ".r.U", dim, dim, Init::kXavier);
  p.candidate = add_affine(store, name + ".h", dim, dim);
  p.candidate_h = store.add(name + ".h.U", dim, dim, Init::kXavier);
  return p;
}

TimeEncoderP add_time_encoder(ParamStore& store, const std::string& name, int dim) {
  TimeEncoderP p;
  p.omega = store.add(name + ".omega", 1, dim, Init::kTimeFrequency);
  p.phase = store.add(name + ".phase", 1, dim, Init::kZero);
  return p;
}

Var affine(Tape& t, const ParamVars& pv, const AffineP& p, Var x) {
  return t.add_row_broadcast(t.matmul(x, pv[p.W]), pv[p.b]);
}

Var layer_norm(Tape& t, const ParamVars& pv, const LayerNormP& p, Var x) {
  return t.layer_norm_rows(x, pv[p.gain], pv[p.bias]);
}

Var mlp2(Tape& t, const ParamVars& pv, const Mlp2P& p, Var x) {
  return affine(t, pv, p.second, t.relu(layer_norm(t, pv, p.norm, affine(t, pv, p.first, x))));
}

AttentionResult masked_self_attention(Tape& t, const ParamVars& pv, const AttentionP& p, Var F,
                                      const BoolMatrix& mask,
                                      const std::vector<bool>* present) {
  const int n = static_cast<int>(t.value(F).rows());
  if (mask.rows() != n || mask.cols() != n) {
    throw ValidationError("masked_self_attention: mask must be N x N");
  }
  if (present != nullptr) {
    for (int i = 0; i < n; ++i) {
      if ((*present)[static_cast<std::size_t>(i)] && !mask.row(i).any()) {
        throw ValidationError("masked_self_attention: present node " + std::to_string(i) +
                              " has an empty attention row");
      }
    }
  }
  const Var q = t.matmul(F, pv[p.WQ]);
  const Var k = t.matmul(F, pv[p.WK]);
  const Var v = t.matmul(F, pv[p.WV]);
  const Var logits = t.scale(t.matmul_bt(q, k), 1.0 / std::sqrt(static_cast<double>(p.dim)));
  const Var weights = t.masked_softmax(logits, mask);
  return {t.matmul(weights, v), weights};
}

AttentionResult cross_attention(Tape& t, const ParamVars& pv, const AttentionP& p, Var queries,
                                Var context) {
  const int n = static_cast<int>(t.value(context).rows());
  if (n < 1) throw ValidationError("cross_attention: empty context");
  const int m = static_cast<int>(t.value(queries).rows());
  const Var q = t.matmul(queries, pv[p.WQ]);
  const Var k = t.matmul(context, pv[p.WK]);
  const Var v = t.matmul(context, pv[p.WV]);
  const Var logits = t.scale(t.matmul_bt(q, k), 1.0 / std::sqrt(static_cast<double>(p.dim)));
  const Var weights = t.masked_softmax(logits, BoolMatrix::Constant(m, n, true));
  return {t.matmul(weights, v), weights};
}

Var gru_step(Tape& t, const ParamVars& pv, const GruP& p, Var x, Var h) {
  const Var z = t.sigmoid(t.add(affine(t, pv, p.update, x), t.matmul(h, pv[p.update_h])));
  const Var r = t.sigmoid(t.add(affine(t, pv, p.reset, x), t.matmul(h, pv[p.reset_h])));
  const Var hc =
      t.tanh(t.add(affine(t, pv, p.candidate, x), t.matmul(t.cmul(r, h), pv[p.candidate_h])));
  // h' = (1 - z) .* h + z .* hc
  return t.add(t.sub(h, t.cmul(z, h)), t.cmul(z, hc));
}

Var max_pool(Tape& t, Var rows) {
  if (t.value(rows).rows() < 1) throw ValidationError("max_pool: needs at least one row");
  return t.colwise_max(rows);
}

Var time_encode(Tape& t, const ParamVars& pv, const TimeEncoderP& p, int t_index, double dt) {
  if (t_index < 0) throw ValidationError("time_encode: negative time index");
  return t.cos_encode(pv[p.omega], pv[p.phase], static_cast<double>(t_index) * dt);
}

GradCheckReport grad_check(const LossBuilder& build_loss, ParamStore& params, double eps) {
  // Analytic gradients from one recorded pass.
  params.zero_grads();
  {
    Tape tape;
    ParamVars pv = lift_params(tape, params);
    const Var loss = build_loss(tape, pv);
    tape.backward(loss);
    accumulate_param_grads(tape, pv, params);
  }

  const auto eval = [&]() {
    Tape tape;
    ParamVars pv = lift_params(tape, params, /*requires_grad=*/false);
    return tape.value(build_loss(tape, pv))(0, 0);
  };

  GradCheckReport report;
  for (int i = 0; i < params.size(); ++i) {
    auto& b = params.block(i);
    for (int r = 0; r < b.value.rows(); ++r) {
      for (int c = 0; c < b.value.cols(); ++c) {
        const double saved = b.value(r, c);
        b.value(r, c) = saved + eps;
        const double up = eval();
        b.value(r, c) = saved - eps;
        const double down = eval();
        b.value(r, c) = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double an = b.grad(r, c);
        const double err = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
        if (err > report.max_rel_error) {
          report.max_rel_error = err;
          report.worst_block = b.name;
          report.worst_row = r;
          report.worst_col = c;
        }
      }
    }
  }
  return report;
}

}  // namespace tgf
