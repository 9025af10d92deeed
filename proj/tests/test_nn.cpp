#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tgf/nn.hpp"
#include "tgf/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace tgf;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.gaussian();
  }
  return m;
}

void set_block(ParamStore& store, int idx, const Matrix& value) {
  store.block(idx).value = value;
}

}  // namespace

TEST_CASE("affine matches hand-computed values") {
  ParamStore store;
  const AffineP p = add_affine(store, "a", 2, 2);

  SUBCASE("zero weights and bias give zero output") {
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Var y = affine(t, pv, p, t.constant((Matrix(1, 2) << 3.0, -4.0).finished()));
    CHECK(t.value(y).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identity weights pass the input through") {
    set_block(store, p.W, Matrix::Identity(2, 2));
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Var y = affine(t, pv, p, t.constant((Matrix(1, 2) << 3.0, -4.0).finished()));
    CHECK(t.value(y)(0, 0) == 3.0);
    CHECK(t.value(y)(0, 1) == -4.0);
  }
  SUBCASE("row convention: x=(1,1) through [[1,2],[3,4]] plus (1,1) gives (4,8)") {
    // The classic column form W*x with W=[[1,2],[3,4]] equals the row form
    // x*W^T; the store holds W in (in x out) layout.
    Matrix w(2, 2);
    w << 1, 3, 2, 4;
    set_block(store, p.W, w);
    set_block(store, p.b, (Matrix(1, 2) << 1.0, 1.0).finished());
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Var y = affine(t, pv, p, t.constant((Matrix(1, 2) << 1.0, 1.0).finished()));
    CHECK(t.value(y)(0, 0) == 4.0);
    CHECK(t.value(y)(0, 1) == 8.0);
  }
  SUBCASE("shape mismatch is rejected") {
    Tape t;
    const ParamVars pv = lift_params(t, store);
    CHECK_THROWS_AS(affine(t, pv, p, t.constant(Matrix::Zero(1, 3))), ValidationError);
  }
}

TEST_CASE("mlp2 composition") {
  SUBCASE("all-zero parameters give zero output") {
    ParamStore store;
    const Mlp2P p = add_mlp2(store, "m", 3, 4, 2);
    // note: layer-norm gain stays zero here as well
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Var y = mlp2(t, pv, p, t.constant((Matrix(1, 3) << 1.0, 2.0, 3.0).finished()));
    CHECK(t.value(y).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("deterministic for a fixed input") {
    ParamStore store;
    const Mlp2P p = add_mlp2(store, "m", 3, 4, 2);
    store.initialize(17);
    Rng rng(5);
    const Matrix x = random_matrix(rng, 2, 3);
    Tape t1, t2;
    const ParamVars pv1 = lift_params(t1, store);
    const ParamVars pv2 = lift_params(t2, store);
    const Matrix a = t1.value(mlp2(t1, pv1, p, t1.constant(x)));
    const Matrix b = t2.value(mlp2(t2, pv2, p, t2.constant(x)));
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("single hidden unit against a hand evaluation") {
    ParamStore store;
    const Mlp2P p = add_mlp2(store, "m", 1, 1, 1);
    set_block(store, p.first.W, Matrix::Constant(1, 1, 2.0));
    set_block(store, p.first.b, Matrix::Constant(1, 1, 0.5));
    set_block(store, p.norm.gain, Matrix::Constant(1, 1, 1.5));
    set_block(store, p.norm.bias, Matrix::Constant(1, 1, 0.25));
    set_block(store, p.second.W, Matrix::Constant(1, 1, 3.0));
    set_block(store, p.second.b, Matrix::Constant(1, 1, -0.1));
    // Width-1 layer norm: x-hat is zero, so the output is relu(bias)*W2+b2.
    const double expected = 3.0 * std::max(0.25, 0.0) - 0.1;
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Var y = mlp2(t, pv, p, t.constant(Matrix::Constant(1, 1, 7.0)));
    CHECK(t.value(y)(0, 0) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("masked self attention") {
  ParamStore store;
  const AttentionP p = add_attention(store, "att", 2);

  SUBCASE("single node with a self-loop returns its V transform") {
    Rng rng(3);
    set_block(store, p.WQ, random_matrix(rng, 2, 2));
    set_block(store, p.WK, random_matrix(rng, 2, 2));
    const Matrix wv = random_matrix(rng, 2, 2);
    set_block(store, p.WV, wv);
    const Matrix f = random_matrix(rng, 1, 2);
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const auto res =
        masked_self_attention(t, pv, p, t.constant(f), BoolMatrix::Constant(1, 1, true));
    CHECK((t.value(res.output) - f * wv).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("diagonal-only mask returns each row's own V transform") {
    Rng rng(4);
    set_block(store, p.WQ, random_matrix(rng, 2, 2));
    set_block(store, p.WK, random_matrix(rng, 2, 2));
    const Matrix wv = random_matrix(rng, 2, 2);
    set_block(store, p.WV, wv);
    const Matrix f = random_matrix(rng, 4, 2);
    BoolMatrix mask = BoolMatrix::Constant(4, 4, false);
    for (int i = 0; i < 4; ++i) mask(i, i) = true;
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const auto res = masked_self_attention(t, pv, p, t.constant(f), mask);
    CHECK((t.value(res.output) - f * wv).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("full mask with zero Q/K and identity V averages the rows") {
    set_block(store, p.WV, Matrix::Identity(2, 2));
    Rng rng(6);
    const Matrix f = random_matrix(rng, 5, 2);
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const auto res =
        masked_self_attention(t, pv, p, t.constant(f), BoolMatrix::Constant(5, 5, true));
    const Matrix mean = f.colwise().mean();
    for (int i = 0; i < 5; ++i) {
      CHECK((t.value(res.output).row(i) - mean).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("attention rows over present nodes sum to one, masked entries are zero") {
    ParamStore big;
    const AttentionP pb = add_attention(big, "att", 6);
    big.initialize(11);
    Rng rng(12);
    const Matrix f = random_matrix(rng, 6, 6, 2.0);
    BoolMatrix mask = BoolMatrix::Constant(6, 6, false);
    for (int i = 0; i < 6; ++i) mask(i, i) = true;
    mask(0, 2) = mask(2, 0) = true;
    mask(3, 5) = mask(5, 3) = true;
    Tape t;
    const ParamVars pv = lift_params(t, big);
    const auto res = masked_self_attention(t, pv, pb, t.constant(f), mask);
    for (int i = 0; i < 6; ++i) {
      CHECK(t.value(res.weights).row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (int j = 0; j < 6; ++j) {
        if (!mask(i, j)) CHECK(t.value(res.weights)(i, j) == 0.0);
      }
    }
  }
  SUBCASE("a present node with an empty mask row violates the precondition") {
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Matrix f = Matrix::Zero(2, 2);
    BoolMatrix mask = BoolMatrix::Constant(2, 2, false);
    mask(0, 0) = true;
    const std::vector<bool> present{true, true};
    CHECK_THROWS_AS(masked_self_attention(t, pv, p, t.constant(f), mask, &present),
                    ValidationError);
  }
}

TEST_CASE("cross attention") {
  ParamStore store;
  const AttentionP p = add_attention(store, "ca", 2);

  SUBCASE("single context row is returned verbatim under identity V") {
    set_block(store, p.WV, Matrix::Identity(2, 2));
    Rng rng(7);
    const Matrix ctx = random_matrix(rng, 1, 2);
    const Matrix q = random_matrix(rng, 3, 2);
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const auto res = cross_attention(t, pv, p, t.constant(q), t.constant(ctx));
    for (int i = 0; i < 3; ++i) {
      CHECK((t.value(res.output).row(i) - ctx.row(0)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
  SUBCASE("identical context rows make the output independent of the logits") {
    ParamStore s2;
    const AttentionP p2 = add_attention(s2, "ca", 3);
    s2.initialize(9);
    Rng rng(8);
    Matrix ctx(4, 3);
    const Matrix row = random_matrix(rng, 1, 3);
    for (int i = 0; i < 4; ++i) ctx.row(i) = row;
    const Matrix q = random_matrix(rng, 2, 3);
    Tape t;
    const ParamVars pv = lift_params(t, s2);
    const auto res = cross_attention(t, pv, p2, t.constant(q), t.constant(ctx));
    const Matrix expected = row * s2.block(p2.WV).value;
    for (int i = 0; i < 2; ++i) {
      CHECK((t.value(res.output).row(i) - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("hand-set logits (0, ln 3) give weights (0.25, 0.75)") {
    set_block(store, p.WQ, Matrix::Identity(2, 2));
    set_block(store, p.WK, Matrix::Identity(2, 2));
    set_block(store, p.WV, Matrix::Identity(2, 2));
    Matrix ctx(2, 2);
    // q.k1 = 0 and q.k2/sqrt(2) = ln 3 for the query (1, 0).
    ctx << 0.0, 5.0, std::sqrt(2.0) * std::log(3.0), 7.0;
    const Matrix q = (Matrix(1, 2) << 1.0, 0.0).finished();
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const auto res = cross_attention(t, pv, p, t.constant(q), t.constant(ctx));
    CHECK(t.value(res.weights)(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(t.value(res.weights)(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
    const Matrix mix = 0.25 * ctx.row(0) + 0.75 * ctx.row(1);
    CHECK((t.value(res.output) - mix).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("empty context is rejected") {
    Tape t;
    const ParamVars pv = lift_params(t, store);
    CHECK_THROWS_AS(
        cross_attention(t, pv, p, t.constant(Matrix::Zero(1, 2)), t.constant(Matrix::Zero(0, 2))),
        ValidationError);
  }
}

TEST_CASE("gru cell") {
  ParamStore store;
  const GruP p = add_gru(store, "gru", 3);

  SUBCASE("all zeros stay zero") {
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Var h = gru_step(t, pv, p, t.constant(Matrix::Zero(1, 3)),
                           t.constant(Matrix::Zero(1, 3)));
    CHECK(t.value(h).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero parameters halve the previous state") {
    Rng rng(10);
    const Matrix h0 = random_matrix(rng, 1, 3);
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Var h = gru_step(t, pv, p, t.constant(Matrix::Zero(1, 3)), t.constant(h0));
    CHECK((t.value(h) - 0.5 * h0).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("output stays within max(|h|_inf, 1)") {
    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
      ParamStore s2;
      const GruP p2 = add_gru(s2, "g", 4);
      s2.initialize(rng.next_u64());
      const Matrix x = random_matrix(rng, 1, 4, 3.0);
      const Matrix h0 = random_matrix(rng, 1, 4, 2.0);
      Tape t;
      const ParamVars pv = lift_params(t, s2);
      const Var h = gru_step(t, pv, p2, t.constant(x), t.constant(h0));
      const double bound = std::max(h0.cwiseAbs().maxCoeff(), 1.0);
      CHECK(t.value(h).cwiseAbs().maxCoeff() <= bound + 1e-12);
    }
  }
}

TEST_CASE("max pool") {
  Tape t;
  SUBCASE("single row is returned unchanged") {
    const Matrix row = (Matrix(1, 3) << 1.0, -2.0, 0.5).finished();
    CHECK((t.value(max_pool(t, t.constant(row))) - row).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("entrywise maximum") {
    Matrix rows(2, 2);
    rows << 1.0, -2.0, 0.0, 5.0;
    const Var y = max_pool(t, t.constant(rows));
    CHECK(t.value(y)(0, 0) == 1.0);
    CHECK(t.value(y)(0, 1) == 5.0);
  }
  SUBCASE("row order does not matter") {
    Rng rng(13);
    const Matrix rows = random_matrix(rng, 5, 4);
    Matrix shuffled = rows;
    shuffled.row(0).swap(shuffled.row(4));
    shuffled.row(1).swap(shuffled.row(3));
    CHECK((t.value(max_pool(t, t.constant(rows))) -
           t.value(max_pool(t, t.constant(shuffled))))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(max_pool(t, t.constant(Matrix::Zero(0, 3))), ValidationError);
  }
}

TEST_CASE("time encoder") {
  ParamStore store;
  const TimeEncoderP p = add_time_encoder(store, "time", 4);

  SUBCASE("zero frequencies give all ones") {
    Tape t;
    const ParamVars pv = lift_params(t, store);  // omega zero until initialize()
    const Var e = time_encode(t, pv, p, 7);
    CHECK((t.value(e).array() == 1.0).all());
  }
  SUBCASE("t=0 gives all ones for any frequencies") {
    store.initialize(3);
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Var e = time_encode(t, pv, p, 0);
    CHECK((t.value(e).array() - 1.0).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("omega = pi/dt at t=1 gives all minus ones") {
    set_block(store, p.omega, Matrix::Constant(1, 4, M_PI / kDt));
    set_block(store, p.phase, Matrix::Zero(1, 4));
    Tape t;
    const ParamVars pv = lift_params(t, store);
    const Var e = time_encode(t, pv, p, 1);
    CHECK((t.value(e).array() + 1.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("negative time index is rejected") {
    Tape t;
    const ParamVars pv = lift_params(t, store);
    CHECK_THROWS_AS(time_encode(t, pv, p, -1), ValidationError);
  }
}

TEST_CASE("primitive backward passes match finite differences") {
  // Parameter-side gradients for the composite primitives.
  Rng rng(2025);
  double worst = 0.0;
  int instances = 0;

  for (int rep = 0; rep < 12; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform_index(3));
    const int d = 4 + 2 * static_cast<int>(rng.uniform_index(3));

    {
      ParamStore store;
      const Mlp2P p = add_mlp2(store, "m", d, d, d);
      store.initialize(rng.next_u64());
      store.jitter(rng.next_u64(), 0.05);
      const Matrix x = random_matrix(rng, n, d);
      const Matrix w = random_matrix(rng, n, d);
      const auto build = [&](Tape& t, const ParamVars& pv) {
        return t.sum_all(t.cmul(mlp2(t, pv, p, t.constant(x)), t.constant(w)));
      };
      const double err = grad_check(build, store).max_rel_error;
      worst = std::max(worst, err);
      CHECK(err < 1e-4);
      ++instances;
    }
    {
      ParamStore store;
      const AttentionP p = add_attention(store, "a", d);
      store.initialize(rng.next_u64());
      const Matrix f = random_matrix(rng, n, d);
      const Matrix w = random_matrix(rng, n, d);
      BoolMatrix mask = BoolMatrix::Constant(n, n, false);
      for (int i = 0; i < n; ++i) {
        mask(i, i) = true;
        for (int j = 0; j < n; ++j) {
          if (rng.uniform() < 0.5) mask(i, j) = mask(j, i) = true;
        }
      }
      const auto build = [&](Tape& t, const ParamVars& pv) {
        const auto res = masked_self_attention(t, pv, p, t.constant(f), mask);
        return t.sum_all(t.cmul(res.output, t.constant(w)));
      };
      const double err = grad_check(build, store).max_rel_error;
      worst = std::max(worst, err);
      CHECK(err < 1e-4);
      ++instances;
    }
    {
      ParamStore store;
      const AttentionP p = add_attention(store, "c", d);
      store.initialize(rng.next_u64());
      const Matrix q = random_matrix(rng, 2, d);
      const Matrix ctx = random_matrix(rng, n, d);
      const Matrix w = random_matrix(rng, 2, d);
      const auto build = [&](Tape& t, const ParamVars& pv) {
        const auto res = cross_attention(t, pv, p, t.constant(q), t.constant(ctx));
        return t.sum_all(t.cmul(res.output, t.constant(w)));
      };
      const double err = grad_check(build, store).max_rel_error;
      worst = std::max(worst, err);
      CHECK(err < 1e-4);
      ++instances;
    }
    {
      ParamStore store;
      const GruP p = add_gru(store, "g", d);
      store.initialize(rng.next_u64());
      const Matrix x = random_matrix(rng, 1, d);
      const Matrix h = random_matrix(rng, 1, d);
      const Matrix w = random_matrix(rng, 1, d);
      const auto build = [&](Tape& t, const ParamVars& pv) {
        const Var out = gru_step(t, pv, p, t.constant(x), t.constant(h));
        return t.sum_all(t.cmul(out, t.constant(w)));
      };
      const double err = grad_check(build, store).max_rel_error;
      worst = std::max(worst, err);
      CHECK(err < 1e-4);
      ++instances;
    }
    {
      ParamStore store;
      const TimeEncoderP p = add_time_encoder(store, "t", d);
      store.initialize(rng.next_u64());
      store.jitter(rng.next_u64(), 0.1);
      const Matrix w = random_matrix(rng, 1, d);
      const auto build = [&](Tape& t, const ParamVars& pv) {
        return t.sum_all(t.cmul(time_encode(t, pv, p, 3), t.constant(w)));
      };
      const double err = grad_check(build, store).max_rel_error;
      worst = std::max(worst, err);
      CHECK(err < 1e-4);
      ++instances;
    }
  }
  CHECK(instances >= 60);
  MESSAGE("primitive FD instances: ", instances, ", worst: ", worst);
}

TEST_CASE("adam optimizer") {
  SUBCASE("zero gradients leave parameters unchanged") {
    ParamStore store;
    const int i = store.add("p", 2, 2, Init::kXavier);
    store.initialize(21);
    const Matrix before = store.block(i).value;
    AdamState state = AdamState::fresh(store);
    adam_step(store, state, 0.1);
    CHECK((store.block(i).value - before).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("one step on a scalar matches the closed form") {
    ParamStore store;
    const int i = store.add("p", 1, 1, Init::kZero);
    store.block(i).value(0, 0) = 1.0;
    store.block(i).grad(0, 0) = 1.0;
    AdamState state = AdamState::fresh(store);
    adam_step(store, state, 0.1);
    // mhat = 1, vhat = 1 after bias correction; delta = -lr / (1 + eps).
    const double expected = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8));
    CHECK(store.block(i).value(0, 0) == doctest::Approx(expected).epsilon(1e-15));
  }
  SUBCASE("identical runs are bitwise identical") {
    const auto run = [&]() {
      ParamStore store;
      const int i = store.add("p", 3, 3, Init::kXavier);
      store.initialize(5);
      AdamState state = AdamState::fresh(store);
      Rng rng(77);
      for (int step = 0; step < 25; ++step) {
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) store.block(i).grad(r, c) = rng.gaussian();
        }
        adam_step(store, state, 1e-3);
      }
      return store.block(i).value;
    };
    const Matrix a = run();
    const Matrix b = run();
    CHECK((a.array() == b.array()).all());
  }
  SUBCASE("non-finite gradients name the offending block") {
    ParamStore store;
    store.add("fine", 1, 1, Init::kZero);
    const int i = store.add("broken", 1, 1, Init::kZero);
    store.block(i).grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    AdamState state = AdamState::fresh(store);
    try {
      adam_step(store, state, 0.1);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("broken") != std::string::npos);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  ParamStore store;
  add_mlp2(store, "m", 4, 8, 4);
  add_attention(store, "a", 4);
  store.initialize(33);
  const std::string path = "/tmp/tgf_test_checkpoint.ckpt";
  save_checkpoint(store, 0xDEADBEEFULL, path);

  SUBCASE("values and hash survive") {
    ParamStore loaded;
    add_mlp2(loaded, "m", 4, 8, 4);
    add_attention(loaded, "a", 4);
    CHECK(load_checkpoint(loaded, path) == 0xDEADBEEFULL);
    for (int i = 0; i < store.size(); ++i) {
      CHECK((loaded.block(i).value.array() == store.block(i).value.array()).all());
    }
  }
  SUBCASE("shape mismatch is rejected") {
    ParamStore other;
    add_mlp2(other, "m", 4, 6, 4);  // different hidden width
    add_attention(other, "a", 4);
    CHECK_THROWS_AS(load_checkpoint(other, path), ValidationError);
  }
  SUBCASE("truncated files are rejected") {
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const std::string cut = "/tmp/tgf_test_checkpoint_cut.ckpt";
    std::ofstream os(cut, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    os.close();
    ParamStore loaded;
    add_mlp2(loaded, "m", 4, 8, 4);
    add_attention(loaded, "a", 4);
    CHECK_THROWS_AS(load_checkpoint(loaded, cut), IoError);
  }
  SUBCASE("not a checkpoint") {
    const std::string junk = "/tmp/tgf_test_junk.ckpt";
    std::ofstream os(junk, std::ios::trunc);
    os << "not a checkpoint";
    os.close();
    ParamStore loaded;
    add_mlp2(loaded, "m", 4, 8, 4);
    add_attention(loaded, "a", 4);
    CHECK_THROWS_AS(load_checkpoint(loaded, junk), ValidationError);
  }
}

TEST_CASE("initialization is deterministic and shape-directed") {
  ParamStore a, b;
  add_mlp2(a, "m", 4, 8, 4);
  add_mlp2(b, "m", 4, 8, 4);
  a.initialize(99);
  b.initialize(99);
  for (int i = 0; i < a.size(); ++i) {
    CHECK((a.block(i).value.array() == b.block(i).value.array()).all());
  }
  // Xavier bound for the first weight block.
  const double bound = std::sqrt(6.0 / (4 + 8));
  CHECK(a.block(0).value.cwiseAbs().maxCoeff() <= bound);
  CHECK(a.block(0).value.cwiseAbs().maxCoeff() > 0.0);
}
