#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tgf/metrics.hpp"
#include "tgf/rng.hpp"

#include <cmath>

using namespace tgf;

namespace {

Matrix constant_mode(const Vec2& offset, const Matrix& gt) {
  Matrix m = gt;
  m.rowwise() += offset.transpose();
  return m;
}

Matrix zero_gt() { return Matrix::Zero(kFutSteps, 2); }

// Independent oracle: plain loops, no shared code with the metrics module.
struct OracleResult {
  double min_fde;
  int best;
  double min_ade;
  int miss;
  double brier;
};

OracleResult oracle(const std::vector<Matrix>& preds, const Vector& probs, const Matrix& gt,
                    double threshold) {
  OracleResult r{};
  r.best = 0;
  r.min_fde = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const double dx = preds[k](kFutSteps - 1, 0) - gt(kFutSteps - 1, 0);
    const double dy = preds[k](kFutSteps - 1, 1) - gt(kFutSteps - 1, 1);
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d < r.min_fde) {
      r.min_fde = d;
      r.best = static_cast<int>(k);
    }
  }
  double acc = 0.0;
  for (int t = 0; t < kFutSteps; ++t) {
    const double dx = preds[static_cast<std::size_t>(r.best)](t, 0) - gt(t, 0);
    const double dy = preds[static_cast<std::size_t>(r.best)](t, 1) - gt(t, 1);
    acc += std::sqrt(dx * dx + dy * dy);
  }
  r.min_ade = acc / kFutSteps;
  r.miss = r.min_fde > threshold ? 1 : 0;
  const double p = probs(r.best);
  r.brier = r.min_fde + (1.0 - p) * (1.0 - p);
  return r;
}

}  // namespace

TEST_CASE("min_fde") {
  const Matrix gt = zero_gt();
  SUBCASE("a mode ending at the gt endpoint scores zero") {
    const auto [v, i] = min_fde({constant_mode(Vec2(0.0, 0.0), gt)}, gt);
    CHECK(v == 0.0);
    CHECK(i == 0);
  }
  SUBCASE("endpoints at distances (5,1) pick 1") {
    const auto [v, i] =
        min_fde({constant_mode(Vec2(5.0, 0.0), gt), constant_mode(Vec2(0.0, 1.0), gt)}, gt);
    CHECK(v == 1.0);
    CHECK(i == 1);
  }
  SUBCASE("K=1 degenerates to that mode's endpoint distance") {
    const auto [v, i] = min_fde({constant_mode(Vec2(3.0, 4.0), gt)}, gt);
    CHECK(v == 5.0);
    CHECK(i == 0);
  }
  SUBCASE("ties break to the lowest index") {
    const auto [v, i] =
        min_fde({constant_mode(Vec2(0.0, 2.0), gt), constant_mode(Vec2(2.0, 0.0), gt)}, gt);
    CHECK(v == 2.0);
    CHECK(i == 0);
  }
}

TEST_CASE("min_ade selects by closest endpoint, not per-mode ADE") {
  const Matrix gt = zero_gt();
  // Mode A: constant (3,4), per-step distance 5. Mode B: constant (0,1),
  // per-step distance 1. B has the closer endpoint, so min_ade is 1.
  const std::vector<Matrix> preds{constant_mode(Vec2(3.0, 4.0), gt),
                                  constant_mode(Vec2(0.0, 1.0), gt)};
  CHECK(min_ade(preds, gt) == doctest::Approx(1.0).epsilon(1e-15));
  SUBCASE("perfect best mode scores zero") {
    CHECK(min_ade({gt}, gt) == 0.0);
  }
}

TEST_CASE("miss rate boundary rules") {
  const Matrix gt = zero_gt();
  CHECK(miss({constant_mode(Vec2(1.9, 0.0), gt)}, gt) == 0);
  CHECK(miss({constant_mode(Vec2(2.5, 0.0), gt), constant_mode(Vec2(0.0, 2.5), gt)}, gt) == 1);
  // Exactly on the threshold counts as a hit.
  CHECK(miss({constant_mode(Vec2(2.0, 0.0), gt)}, gt) == 0);
  CHECK_THROWS_AS(miss({gt}, gt, 0.0), ValidationError);
}

TEST_CASE("miss rate is monotone nonincreasing in the threshold") {
  Rng rng(31);
  const Matrix gt = zero_gt();
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<Matrix> preds;
    for (int k = 0; k < 4; ++k) {
      preds.push_back(
          constant_mode(Vec2(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)), gt));
    }
    int prev = 1;
    for (const double th : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      const int m = miss(preds, gt, th);
      CHECK(m <= prev);
      prev = m;
    }
  }
}

TEST_CASE("brier_min_fde") {
  const Matrix gt = zero_gt();
  SUBCASE("full confidence equals min_fde") {
    const std::vector<Matrix> preds{constant_mode(Vec2(1.0, 0.0), gt)};
    CHECK(brier_min_fde(preds, Vector::Constant(1, 1.0), gt) == 1.0);
  }
  SUBCASE("min_fde 1 with p 0.5 gives 1.25") {
    const std::vector<Matrix> preds{constant_mode(Vec2(1.0, 0.0), gt),
                                    constant_mode(Vec2(9.0, 0.0), gt)};
    CHECK(brier_min_fde(preds, Vector::Constant(2, 0.5), gt) ==
          doctest::Approx(1.25).epsilon(1e-15));
  }
  SUBCASE("uniform probabilities over six modes with zero error") {
    std::vector<Matrix> preds{gt};
    for (int k = 0; k < 5; ++k) preds.push_back(constant_mode(Vec2(5.0 + k, 0.0), gt));
    const double expected = (1.0 - 1.0 / 6.0) * (1.0 - 1.0 / 6.0);
    CHECK(brier_min_fde(preds, Vector::Constant(6, 1.0 / 6.0), gt) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("invalid simplex is rejected") {
    const std::vector<Matrix> preds{gt, gt};
    CHECK_THROWS_AS(brier_min_fde(preds, Vector::Constant(2, 0.6), gt), ValidationError);
    Vector neg(2);
    neg << 1.5, -0.5;
    CHECK_THROWS_AS(brier_min_fde(preds, neg, gt), ValidationError);
  }
  SUBCASE("the brier term lies in [0, 1]") {
    Rng rng(33);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<Matrix> preds;
      const int K = 1 + static_cast<int>(rng.uniform_index(6));
      Vector probs(K);
      double sum = 0.0;
      for (int k = 0; k < K; ++k) {
        preds.push_back(
            constant_mode(Vec2(rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0)), gt));
        probs(k) = rng.uniform(0.01, 1.0);
        sum += probs(k);
      }
      probs /= sum;
      const double spread = brier_min_fde(preds, probs, gt) - min_fde(preds, gt).first;
      CHECK(spread >= 0.0);
      CHECK(spread <= 1.0);
    }
  }
}

TEST_CASE("aggregate") {
  SceneMetrics a{"a", 1.0, 2.0, 0, 2.5};
  SceneMetrics b{"b", 3.0, 4.0, 1, 4.5};
  SUBCASE("a single scene aggregates to itself") {
    const MetricsReport r = aggregate({a}, 6);
    CHECK(r.mean_min_ade == 1.0);
    CHECK(r.mean_min_fde == 2.0);
    CHECK(r.miss_rate == 0.0);
    CHECK(r.mean_b_min_fde == 2.5);
  }
  SUBCASE("misses (0,1) give rate 0.5") {
    const MetricsReport r = aggregate({a, b}, 6);
    CHECK(r.miss_rate == 0.5);
    CHECK(r.mean_min_fde == 3.0);
  }
  SUBCASE("permutation invariance of the means") {
    const MetricsReport r1 = aggregate({a, b}, 6);
    const MetricsReport r2 = aggregate({b, a}, 6);
    CHECK(std::abs(r1.mean_min_ade - r2.mean_min_ade) < 1e-12);
    CHECK(std::abs(r1.mean_b_min_fde - r2.mean_b_min_fde) < 1e-12);
  }
  SUBCASE("empty datasets are rejected") {
    CHECK_THROWS_AS(aggregate({}, 6), ValidationError);
  }
}

TEST_CASE("metrics agree exactly with the brute-force oracle") {
  Rng rng(2027);
  const Matrix gt_base = zero_gt();
  int checked = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const int K = 1 + static_cast<int>(rng.uniform_index(8));
    Matrix gt = gt_base;
    for (int t = 0; t < kFutSteps; ++t) {
      gt(t, 0) = rng.uniform(-20.0, 20.0);
      gt(t, 1) = rng.uniform(-20.0, 20.0);
    }
    std::vector<Matrix> preds;
    Vector probs(K);
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
      Matrix m(kFutSteps, 2);
      for (int t = 0; t < kFutSteps; ++t) {
        m(t, 0) = gt(t, 0) + rng.uniform(-6.0, 6.0);
        m(t, 1) = gt(t, 1) + rng.uniform(-6.0, 6.0);
      }
      // Inject exact boundary endpoint distances and exact ties.
      if (rep % 5 == 1 && k == 0) {
        const double d = (rep % 2 == 0) ? 1.9 : (rep % 3 == 0 ? 2.0 : 2.1);
        m.row(kFutSteps - 1) = gt.row(kFutSteps - 1) + Eigen::RowVector2d(d, 0.0);
      }
      if (rep % 7 == 2 && k > 0) {
        m.row(kFutSteps - 1) = preds[0].row(kFutSteps - 1);  // tie with mode 0
      }
      preds.push_back(std::move(m));
      probs(k) = rng.uniform(0.05, 1.0);
      sum += probs(k);
    }
    probs /= sum;

    const OracleResult expect = oracle(preds, probs, gt, kMissThreshold);
    const auto [fde, best] = min_fde(preds, gt);
    CHECK(std::abs(fde - expect.min_fde) <= 1e-12);
    CHECK(best == expect.best);
    CHECK(std::abs(min_ade(preds, gt) - expect.min_ade) <= 1e-12);
    CHECK(miss(preds, gt) == expect.miss);
    CHECK(std::abs(brier_min_fde(preds, probs, gt) - expect.brier) <= 1e-12);
    ++checked;
  }
  CHECK(checked == 300);
}
