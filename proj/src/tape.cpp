#include "tgf/tape.hpp"

#include <cmath>

namespace tgf {

double smooth_l1(double residual) {
  const double ax = std::abs(residual);
  return ax < 1.0 ? 0.5 * residual * residual : ax - 0.5;
}

void Tape::check(Var v, const char* op) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw ValidationError(std::string(op) + ": invalid tape handle");
  }
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  return make(std::move(value), requires_grad, nullptr);
}

Var Tape::make(Matrix value, bool requires_grad, std::function<void(Tape&)> backprop) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.grad_init) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accum(int id, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (!n.grad_init) {
    n.grad = g;
    n.grad_init = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  check(loss, "backward");
  Node& top = nodes_[static_cast<std::size_t>(loss.id)];
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw ValidationError("backward: loss must be a 1x1 scalar");
  }
  top.grad = Matrix::Constant(1, 1, 1.0);
  top.grad_init = true;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad_init && n.backprop) n.backprop(*this);
  }
}

Var Tape::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  if (val(a.id).rows() != val(b.id).rows() || val(a.id).cols() != val(b.id).cols()) {
    throw ValidationError("add: shape mismatch");
  }
  const bool rg = needs(a) || needs(b);
  return make(val(a.id) + val(b.id), rg, [a, b, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
    t.accum(a.id, g);
    t.accum(b.id, g);
  });
}

Var Tape::sub(Var a, Var b) {
  check(a, "sub");
  check(b, "sub");
  if (val(a.id).rows() != val(b.id).rows() || val(a.id).cols() != val(b.id).cols()) {
    throw ValidationError("sub: shape mismatch");
  }
  const bool rg = needs(a) || needs(b);
  return make(val(a.id) - val(b.id), rg, [a, b, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
    t.accum(a.id, g);
    t.accum(b.id, Matrix(-g));
  });
}

Var Tape::cmul(Var a, Var b) {
  check(a, "cmul");
  check(b, "cmul");
  if (val(a.id).rows() != val(b.id).rows() || val(a.id).cols() != val(b.id).cols()) {
    throw ValidationError("cmul: shape mismatch");
  }
  const bool rg = needs(a) || needs(b);
  return make(val(a.id).cwiseProduct(val(b.id)), rg,
              [a, b, out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                t.accum(a.id, g.cwiseProduct(t.val(b.id)));
                t.accum(b.id, g.cwiseProduct(t.val(a.id)));
              });
}

Var Tape::scale(Var a, double s) {
  check(a, "scale");
  return make(s * val(a.id), needs(a), [a, s, out = static_cast<int>(nodes_.size())](Tape& t) {
    t.accum(a.id, Matrix(s * t.nodes_[static_cast<std::size_t>(out)].grad));
  });
}

Var Tape::matmul(Var a, Var b) {
  check(a, "matmul");
  check(b, "matmul");
  if (val(a.id).cols() != val(b.id).rows()) throw ValidationError("matmul: shape mismatch");
  const bool rg = needs(a) || needs(b);
  return make(val(a.id) * val(b.id), rg, [a, b, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
    t.accum(a.id, g * t.val(b.id).transpose());
    t.accum(b.id, t.val(a.id).transpose() * g);
  });
}

Var Tape::matmul_bt(Var a, Var b) {
  check(a, "matmul_bt");
  check(b, "matmul_bt");
  if (val(a.id).cols() != val(b.id).cols()) throw ValidationError("matmul_bt: shape mismatch");
  const bool rg = needs(a) || needs(b);
  return make(val(a.id) * val(b.id).transpose(), rg,
              [a, b, out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                t.accum(a.id, g * t.val(b.id));
                t.accum(b.id, g.transpose() * t.val(a.id));
              });
}

Var Tape::add_row_broadcast(Var a, Var row) {
  check(a, "add_row_broadcast");
  check(row, "add_row_broadcast");
  if (val(row.id).rows() != 1 || val(row.id).cols() != val(a.id).cols()) {
    throw ValidationError("add_row_broadcast: row must be 1 x cols(a)");
  }
  const bool rg = needs(a) || needs(row);
  Matrix out = val(a.id);
  out.rowwise() += val(row.id).row(0);
  return make(std::move(out), rg, [a, row, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
    t.accum(a.id, g);
    t.accum(row.id, Matrix(g.colwise().sum()));
  });
}

Var Tape::relu(Var a) {
  check(a, "relu");
  return make(val(a.id).cwiseMax(0.0), needs(a),
              [a, out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                const Matrix mask = (t.val(a.id).array() > 0.0).cast<double>();
                t.accum(a.id, g.cwiseProduct(mask));
              });
}

Var Tape::sigmoid(Var a) {
  check(a, "sigmoid");
  Matrix out = (1.0 / (1.0 + (-val(a.id).array()).exp())).matrix();
  return make(std::move(out), needs(a), [a, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
    const Matrix& y = t.val(out);
    t.accum(a.id, Matrix(g.array() * y.array() * (1.0 - y.array())));
  });
}

Var Tape::tanh(Var a) {
  check(a, "tanh");
  Matrix out = val(a.id).array().tanh().matrix();
  return make(std::move(out), needs(a), [a, out = static_cast<int>(nodes_.size())](Tape& t) {
    const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
    const Matrix& y = t.val(out);
    t.accum(a.id, Matrix(g.array() * (1.0 - y.array().square())));
  });
}

Var Tape::log_floor(Var a, double floor) {
  check(a, "log_floor");
  Matrix out = val(a.id).array().max(floor).log().matrix();
  return make(std::move(out), needs(a),
              [a, floor, out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                const auto& x = t.val(a.id).array();
                const Matrix dx = ((x > floor).cast<double>() / x.max(floor)).matrix();
                t.accum(a.id, g.cwiseProduct(dx));
              });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("concat_cols: empty");
  int rows = -1, cols = 0;
  bool rg = false;
  for (Var p : parts) {
    check(p, "concat_cols");
    if (rows < 0) rows = static_cast<int>(val(p.id).rows());
    if (val(p.id).rows() != rows) throw ValidationError("concat_cols: row mismatch");
    cols += static_cast<int>(val(p.id).cols());
    rg = rg || needs(p);
  }
  Matrix out(rows, cols);
  int at = 0;
  std::vector<std::pair<Var, int>> layout;
  for (Var p : parts) {
    const int w = static_cast<int>(val(p.id).cols());
    out.middleCols(at, w) = val(p.id);
    layout.emplace_back(p, at);
    at += w;
  }
  return make(std::move(out), rg,
              [layout = std::move(layout), out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                for (const auto& [p, begin] : layout) {
                  const int w = static_cast<int>(t.val(p.id).cols());
                  t.accum(p.id, Matrix(g.middleCols(begin, w)));
                }
              });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("concat_rows: empty");
  int cols = -1, rows = 0;
  bool rg = false;
  for (Var p : parts) {
    check(p, "concat_rows");
    if (cols < 0) cols = static_cast<int>(val(p.id).cols());
    if (val(p.id).cols() != cols) throw ValidationError("concat_rows: column mismatch");
    rows += static_cast<int>(val(p.id).rows());
    rg = rg || needs(p);
  }
  Matrix out(rows, cols);
  int at = 0;
  std::vector<std::pair<Var, int>> layout;
  for (Var p : parts) {
    const int h = static_cast<int>(val(p.id).rows());
    out.middleRows(at, h) = val(p.id);
    layout.emplace_back(p, at);
    at += h;
  }
  return make(std::move(out), rg,
              [layout = std::move(layout), out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                for (const auto& [p, begin] : layout) {
                  const int h = static_cast<int>(t.val(p.id).rows());
                  t.accum(p.id, Matrix(g.middleRows(begin, h)));
                }
              });
}

Var Tape::slice_cols(Var a, int begin, int len) {
  check(a, "slice_cols");
  if (begin < 0 || len < 0 || begin + len > val(a.id).cols()) {
    throw ValidationError("slice_cols: range out of bounds");
  }
  return make(val(a.id).middleCols(begin, len), needs(a),
              [a, begin, len, out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                Matrix ga = Matrix::Zero(t.val(a.id).rows(), t.val(a.id).cols());
                ga.middleCols(begin, len) = g;
                t.accum(a.id, ga);
              });
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  check(a, "gather_rows");
  Matrix out(static_cast<int>(rows.size()), val(a.id).cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= val(a.id).rows()) {
      throw ValidationError("gather_rows: index out of bounds");
    }
    out.row(static_cast<int>(i)) = val(a.id).row(rows[i]);
  }
  return make(std::move(out), needs(a),
              [a, rows = std::move(rows), out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                Matrix ga = Matrix::Zero(t.val(a.id).rows(), t.val(a.id).cols());
                for (std::size_t i = 0; i < rows.size(); ++i) {
                  ga.row(rows[i]) += g.row(static_cast<int>(i));
                }
                t.accum(a.id, ga);
              });
}

Var Tape::pick(Var a, int row, int col) {
  check(a, "pick");
  if (row < 0 || row >= val(a.id).rows() || col < 0 || col >= val(a.id).cols()) {
    throw ValidationError("pick: index out of bounds");
  }
  return make(Matrix::Constant(1, 1, val(a.id)(row, col)), needs(a),
              [a, row, col, out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                Matrix ga = Matrix::Zero(t.val(a.id).rows(), t.val(a.id).cols());
                ga(row, col) = g(0, 0);
                t.accum(a.id, ga);
              });
}

Var Tape::where_rows(const std::vector<bool>& flags, Var a, Var b) {
  check(a, "where_rows");
  check(b, "where_rows");
  if (val(a.id).rows() != val(b.id).rows() || val(a.id).cols() != val(b.id).cols() ||
      static_cast<int>(flags.size()) != val(a.id).rows()) {
    throw ValidationError("where_rows: shape mismatch");
  }
  Matrix out = val(b.id);
  for (int i = 0; i < out.rows(); ++i) {
    if (flags[static_cast<std::size_t>(i)]) out.row(i) = val(a.id).row(i);
  }
  const bool rg = needs(a) || needs(b);
  return make(std::move(out), rg,
              [flags, a, b, out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                Matrix ga = Matrix::Zero(g.rows(), g.cols());
                Matrix gb = Matrix::Zero(g.rows(), g.cols());
                for (int i = 0; i < g.rows(); ++i) {
                  if (flags[static_cast<std::size_t>(i)]) {
                    ga.row(i) = g.row(i);
                  } else {
                    gb.row(i) = g.row(i);
                  }
                }
                t.accum(a.id, ga);
                t.accum(b.id, gb);
              });
}

Var Tape::sum_all(Var a) {
  check(a, "sum_all");
  return make(Matrix::Constant(1, 1, val(a.id).sum()), needs(a),
              [a, out = static_cast<int>(nodes_.size())](Tape& t) {
                const double g = t.nodes_[static_cast<std::size_t>(out)].grad(0, 0);
                t.accum(a.id, Matrix::Constant(t.val(a.id).rows(), t.val(a.id).cols(), g));
              });
}

Var Tape::mean_all(Var a) {
  check(a, "mean_all");
  const double inv = 1.0 / static_cast<double>(val(a.id).size());
  return make(Matrix::Constant(1, 1, val(a.id).sum() * inv), needs(a),
              [a, inv, out = static_cast<int>(nodes_.size())](Tape& t) {
                const double g = t.nodes_[static_cast<std::size_t>(out)].grad(0, 0) * inv;
                t.accum(a.id, Matrix::Constant(t.val(a.id).rows(), t.val(a.id).cols(), g));
              });
}

Var Tape::colwise_max(Var a) {
  check(a, "colwise_max");
  if (val(a.id).rows() < 1) throw ValidationError("colwise_max: needs at least one row");
  const Matrix& x = val(a.id);
  Matrix out(1, x.cols());
  std::vector<int> argmax(static_cast<std::size_t>(x.cols()));
  for (int c = 0; c < x.cols(); ++c) {
    int best = 0;
    for (int r = 1; r < x.rows(); ++r) {
      if (x(r, c) > x(best, c)) best = r;
    }
    argmax[static_cast<std::size_t>(c)] = best;
    out(0, c) = x(best, c);
  }
  return make(std::move(out), needs(a),
              [a, argmax = std::move(argmax), out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                Matrix ga = Matrix::Zero(t.val(a.id).rows(), t.val(a.id).cols());
                for (int c = 0; c < ga.cols(); ++c) {
                  ga(argmax[static_cast<std::size_t>(c)], c) = g(0, c);
                }
                t.accum(a.id, ga);
              });
}

Var Tape::rowwise_l2_normalize(Var a) {
  check(a, "rowwise_l2_normalize");
  const Matrix& x = val(a.id);
  Matrix out(x.rows(), x.cols());
  std::vector<double> norms(static_cast<std::size_t>(x.rows()));
  for (int r = 0; r < x.rows(); ++r) {
    const double n = x.row(r).norm();
    norms[static_cast<std::size_t>(r)] = n;
    if (n < 1e-12) {
      out.row(r).setZero();
    } else {
      out.row(r) = x.row(r) / n;
    }
  }
  return make(std::move(out), needs(a),
              [a, norms = std::move(norms), out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                const Matrix& y = t.val(out);
                Matrix ga = Matrix::Zero(g.rows(), g.cols());
                for (int r = 0; r < g.rows(); ++r) {
                  const double n = norms[static_cast<std::size_t>(r)];
                  if (n < 1e-12) continue;
                  const double gy = g.row(r).dot(y.row(r));
                  ga.row(r) = (g.row(r) - gy * y.row(r)) / n;
                }
                t.accum(a.id, ga);
              });
}

Var Tape::layer_norm_rows(Var a, Var gain, Var bias) {
  check(a, "layer_norm_rows");
  check(gain, "layer_norm_rows");
  check(bias, "layer_norm_rows");
  const Matrix& x = val(a.id);
  const int d = static_cast<int>(x.cols());
  if (val(gain.id).rows() != 1 || val(gain.id).cols() != d || val(bias.id).rows() != 1 ||
      val(bias.id).cols() != d) {
    throw ValidationError("layer_norm_rows: gain/bias must be 1 x cols");
  }
  constexpr double kEps = 1e-5;
  Matrix xhat(x.rows(), d);
  std::vector<double> inv_std(static_cast<std::size_t>(x.rows()));
  for (int r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std[static_cast<std::size_t>(r)] = inv;
    xhat.row(r) = (x.row(r).array() - mean) * inv;
  }
  Matrix out = xhat.array().rowwise() * val(gain.id).row(0).array();
  out.rowwise() += val(bias.id).row(0);
  const bool rg = needs(a) || needs(gain) || needs(bias);
  return make(std::move(out), rg,
              [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), d,
               out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                t.accum(bias.id, Matrix(g.colwise().sum()));
                t.accum(gain.id, Matrix(g.cwiseProduct(xhat).colwise().sum()));
                if (!t.needs(a)) return;
                Matrix ga(g.rows(), d);
                const Eigen::Array<double, 1, Eigen::Dynamic> gr = t.val(gain.id).row(0).array();
                for (int r = 0; r < g.rows(); ++r) {
                  const Eigen::Array<double, 1, Eigen::Dynamic> dxhat = g.row(r).array() * gr;
                  const double m1 = dxhat.mean();
                  const double m2 = (dxhat * xhat.row(r).array()).mean();
                  ga.row(r) = (inv_std[static_cast<std::size_t>(r)] *
                               (dxhat - m1 - xhat.row(r).array() * m2))
                                  .matrix();
                }
                t.accum(a.id, ga);
              });
}

Var Tape::masked_softmax(Var logits, BoolMatrix mask) {
  check(logits, "masked_softmax");
  const Matrix& z = val(logits.id);
  if (mask.rows() != z.rows() || mask.cols() != z.cols()) {
    throw ValidationError("masked_softmax: mask shape mismatch");
  }
  Matrix out = Matrix::Zero(z.rows(), z.cols());
  for (int r = 0; r < z.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < z.cols(); ++c) {
      if (mask(r, c)) mx = std::max(mx, z(r, c));
    }
    if (!std::isfinite(mx)) continue;  // all-false row -> zero row
    double denom = 0.0;
    for (int c = 0; c < z.cols(); ++c) {
      if (mask(r, c)) {
        out(r, c) = std::exp(z(r, c) - mx);
        denom += out(r, c);
      }
    }
    out.row(r) /= denom;
  }
  return make(std::move(out), needs(logits),
              [logits, out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                const Matrix& s = t.val(out);
                Matrix gz(g.rows(), g.cols());
                for (int r = 0; r < g.rows(); ++r) {
                  const double dot = g.row(r).dot(s.row(r));
                  gz.row(r) = s.row(r).cwiseProduct(g.row(r) - Matrix::Constant(1, g.cols(), dot));
                }
                t.accum(logits.id, gz);
              });
}

Var Tape::cos_encode(Var omega, Var phase, double t_seconds) {
  check(omega, "cos_encode");
  check(phase, "cos_encode");
  if (val(omega.id).rows() != 1 || val(phase.id).rows() != 1 ||
      val(omega.id).cols() != val(phase.id).cols()) {
    throw ValidationError("cos_encode: omega/phase must be matching 1xd rows");
  }
  const Matrix arg = t_seconds * val(omega.id) + val(phase.id);
  Matrix out = arg.array().cos().matrix();
  const bool rg = needs(omega) || needs(phase);
  return make(std::move(out), rg,
              [omega, phase, arg, t_seconds, out = static_cast<int>(nodes_.size())](Tape& t) {
                const Matrix& g = t.nodes_[static_cast<std::size_t>(out)].grad;
                const Matrix msin = (-arg.array().sin()).matrix();
                t.accum(phase.id, g.cwiseProduct(msin));
                t.accum(omega.id, Matrix(t_seconds * g.cwiseProduct(msin)));
              });
}

Var Tape::smooth_l1_mean(Var a, Matrix target) {
  check(a, "smooth_l1_mean");
  const Matrix& x = val(a.id);
  if (x.rows() != target.rows() || x.cols() != target.cols()) {
    throw ValidationError("smooth_l1_mean: target shape mismatch");
  }
  double acc = 0.0;
  for (int r = 0; r < x.rows(); ++r) {
    for (int c = 0; c < x.cols(); ++c) acc += smooth_l1(x(r, c) - target(r, c));
  }
  const double inv = 1.0 / static_cast<double>(x.size());
  return make(Matrix::Constant(1, 1, acc * inv), needs(a),
              [a, target = std::move(target), inv, out = static_cast<int>(nodes_.size())](Tape& t) {
                const double g = t.nodes_[static_cast<std::size_t>(out)].grad(0, 0) * inv;
                const Matrix r = t.val(a.id) - target;
                // d/dx smooth_l1 = clamp(x, -1, 1)
                t.accum(a.id, Matrix(g * r.cwiseMax(-1.0).cwiseMin(1.0)));
              });
}

}  // namespace tgf
