#pragma once

#include "tgf/types.hpp"

#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace tgf {

// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Records a forward computation over dense 64-bit matrices and replays it in
// reverse for exact analytic gradients. The op set is fixed; every op's
// backward is hand-derived and finite-difference checked. Row convention:
// feature vectors are 1xd rows, feature matrices are Nxd.
class Tape {
 public:
  Var leaf(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return leaf(std::move(value), false); }
  Var scalar(double value) { return leaf(Matrix::Constant(1, 1, value), false); }

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  // Gradient of the backward() loss w.r.t. v; zero matrix if v never
  // received a gradient.
  Matrix grad(Var v) const;
  bool has_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad_init; }

  // Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // --- arithmetic ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var matmul(Var a, Var b);     // A * B
  Var matmul_bt(Var a, Var b);  // A * B^T
  Var add_row_broadcast(Var a, Var row);  // Nxd + 1xd

  // --- elementwise nonlinearities ---
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  // log(max(a, floor)) elementwise; gradient is zero on the floored branch.
  Var log_floor(Var a, double floor);

  // --- shape ---
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var a, int begin, int len);
  Var gather_rows(Var a, std::vector<int> rows);
  Var pick(Var a, int row, int col);  // 1x1
  // Rows of a where flags[i], rows of b otherwise.
  Var where_rows(const std::vector<bool>& flags, Var a, Var b);

  // --- reductions / normalizations ---
  Var sum_all(Var a);   // 1x1
  Var mean_all(Var a);  // 1x1
  Var colwise_max(Var a);  // 1 x cols; ties route gradient to the first row
  Var rowwise_l2_normalize(Var a);  // zero rows stay zero
  // Per-row layer normalization with epsilon 1e-5; gain/bias are 1xd.
  Var layer_norm_rows(Var a, Var gain, Var bias);
  // Row-wise softmax over allowed entries; all-false rows yield zero rows.
  Var masked_softmax(Var logits, BoolMatrix mask);

  // --- special ---
  // cos(omega * t_seconds + phase), omega/phase 1xd.
  Var cos_encode(Var omega, Var phase, double t_seconds);
  // Mean over all entries of smooth-L1 applied to (a - target).
  Var smooth_l1_mean(Var a, Matrix target);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool grad_init = false;
    bool requires_grad = false;
    std::function<void(Tape&)> backprop;
  };

  Var make(Matrix value, bool requires_grad, std::function<void(Tape&)> backprop);
  void accum(int id, const Matrix& g);
  const Matrix& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  void check(Var v, const char* op) const;

  // deque keeps value()/grad() references valid while later ops append nodes
  std::deque<Node> nodes_;
};

// Piecewise smooth-L1: 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
double smooth_l1(double residual);

}  // namespace tgf
