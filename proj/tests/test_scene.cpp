#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_helpers.hpp"
#include "tgf/rng.hpp"
#include "tgf/scene.hpp"

#include <cmath>

using namespace tgf;
using namespace tgf::test;

namespace {

RawScene rigid_transform(const RawScene& scene, double angle, const Vec2& shift) {
  RawScene out = scene;
  const double c = std::cos(angle), s = std::sin(angle);
  const auto apply = [&](const Vec2& p) {
    return Vec2(c * p.x() - s * p.y() + shift.x(), s * p.x() + c * p.y() + shift.y());
  };
  for (auto& agent : out.agents) {
    for (auto& p : agent.positions) p.pos = apply(p.pos);
  }
  for (auto& lane : out.lanes) {
    for (auto& p : lane.centerline) p = apply(p);
  }
  for (auto& p : out.gt_future) p = apply(p);
  return out;
}

double max_coordinate_diff(const NormalizedScene& a, const NormalizedScene& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    for (std::size_t j = 0; j < a.agents[i].positions.size(); ++j) {
      worst = std::max(worst, (a.agents[i].positions[j].pos - b.agents[i].positions[j].pos)
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  for (std::size_t i = 0; i < a.lanes.size(); ++i) {
    for (std::size_t j = 0; j < a.lanes[i].centerline.size(); ++j) {
      worst = std::max(worst,
                       (a.lanes[i].centerline[j] - b.lanes[i].centerline[j]).cwiseAbs().maxCoeff());
    }
  }
  for (std::size_t i = 0; i < a.gt_future.size(); ++i) {
    worst = std::max(worst, (a.gt_future[i] - b.gt_future[i]).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

TEST_CASE("normalize places the AoI at the origin heading +x") {
  const RawScene raw = micro_scene();
  const NormalizedScene norm = normalize_scene(raw);
  const Vec2 at19 = *norm.aoi().position_at(19);
  CHECK(at19.norm() < 1e-12);
  const Vec2 at18 = *norm.aoi().position_at(18);
  CHECK(at18.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(at18.x() < 0.0);
}

TEST_CASE("normalizing an already normalized scene is the identity") {
  const NormalizedScene norm = normalize_scene(micro_scene());
  const NormalizedScene again = normalize_scene(norm);
  CHECK(max_coordinate_diff(norm, again) < 1e-9);
  CHECK(std::abs(again.transform.angle) < 1e-12);
  CHECK(again.transform.translation.norm() < 1e-12);
}

TEST_CASE("normalization is invariant to rigid transforms of the raw input") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RawScene raw = micro_scene(2, 3, seed);
    Rng rng(seed * 31);
    const double angle = rng.uniform(-M_PI, M_PI);
    const Vec2 shift(rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0));
    const RawScene moved = rigid_transform(raw, angle, shift);
    CHECK(max_coordinate_diff(normalize_scene(raw), normalize_scene(moved)) < 1e-9);
  }
}

TEST_CASE("rotate 37 degrees translate (100,-40) matches the original normalization") {
  const RawScene raw = micro_scene(1, 2, 3);
  const RawScene moved = rigid_transform(raw, 37.0 * M_PI / 180.0, Vec2(100.0, -40.0));
  CHECK(max_coordinate_diff(normalize_scene(raw), normalize_scene(moved)) < 1e-9);
}

TEST_CASE("stationary AoI is rejected with a typed error") {
  RawScene scene = micro_scene();
  for (auto& p : scene.agents[0].positions) p.pos = Vec2(4.0, 4.0);
  CHECK_THROWS_AS(normalize_scene(scene), DegenerateHeadingError);
}

TEST_CASE("transform round-trips") {
  const NormalizedScene norm = normalize_scene(micro_scene());
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const Vec2 p(rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0));
    const Vec2 back = norm.transform.apply_inverse(norm.transform.apply(p));
    CHECK((back - p).norm() < 1e-12);
  }
}

TEST_CASE("lane filtering uses a strict 50 m Manhattan cutoff") {
  NormalizedScene scene = normalize_scene(micro_scene(0, 0));
  // AoI ends at the origin; nearest probe point for a lane placed on the
  // x-axis beyond the track is the step-19 position (0, 0).
  LaneSegment near = straight_lane("near", Vec2(49.9, 0.0), Vec2(60.0, 0.0), 3);
  LaneSegment boundary = straight_lane("boundary", Vec2(50.0, 0.0), Vec2(60.0, 0.0), 3);
  scene.lanes = {near, boundary};

  const NormalizedScene kept = filter_lanes(scene, 50.0);
  REQUIRE(kept.lanes.size() == 1);
  CHECK(kept.lanes[0].lane_id == "near");
}

TEST_CASE("lane through the AoI origin is kept") {
  NormalizedScene scene = normalize_scene(micro_scene(0, 0));
  scene.lanes = {straight_lane("through", Vec2(-5.0, 0.0), Vec2(5.0, 0.0), 3)};
  CHECK(filter_lanes(scene, 50.0).lanes.size() == 1);
}

TEST_CASE("filter_lanes is a subset and idempotent") {
  const NormalizedScene scene = normalize_scene(micro_scene(2, 4, 21));
  const NormalizedScene once = filter_lanes(scene);
  const NormalizedScene twice = filter_lanes(once);
  CHECK(once.lanes.size() <= scene.lanes.size());
  REQUIRE(twice.lanes.size() == once.lanes.size());
  for (std::size_t i = 0; i < once.lanes.size(); ++i) {
    CHECK(twice.lanes[i].lane_id == once.lanes[i].lane_id);
  }
}

TEST_CASE("aoi-only filter variant probes only the AoI track") {
  NormalizedScene scene = normalize_scene(micro_scene(0, 0));
  AgentTrack far_agent = straight_track("far", Vec2(200.0, 0.0), 10.0);
  scene.agents.push_back(far_agent);
  scene.lanes = {straight_lane("remote", Vec2(195.0, 0.0), Vec2(210.0, 0.0), 3)};
  CHECK(filter_lanes(scene, 50.0, LaneFilterVariant::kAnyAgent).lanes.size() == 1);
  CHECK(filter_lanes(scene, 50.0, LaneFilterVariant::kAoiOnly).lanes.empty());
}

TEST_CASE("vectorize emits n-1 vectors per lane polyline") {
  NormalizedScene scene = normalize_scene(micro_scene(0, 0));
  scene.lanes = {straight_lane("l", Vec2(0.0, 1.0), Vec2(10.0, 1.0), 3)};
  const PolylineSet set = vectorize(scene);
  REQUIRE(set.polylines.size() == 2);  // lane + AoI
  CHECK(set.polylines[0].vectors.size() == 2);
  CHECK(set.polylines[1].vectors.size() == kObsSteps - 1);
  // Start-of-vector continuity within a polyline.
  for (const auto& poly : set.polylines) {
    for (std::size_t i = 1; i < poly.vectors.size(); ++i) {
      CHECK((poly.vectors[i].start - poly.vectors[i - 1].end).norm() == 0.0);
    }
  }
}

TEST_CASE("agent gaps are skipped, consecutive present pairs only") {
  NormalizedScene scene = normalize_scene(micro_scene(0, 0));
  AgentTrack sparse;
  sparse.agent_id = "sparse";
  sparse.positions = {{4, Vec2(1.0, 1.0)}, {5, Vec2(2.0, 1.0)}, {9, Vec2(6.0, 1.0)}};
  scene.agents.push_back(sparse);
  const PolylineSet set = vectorize(scene);
  const auto& poly = set.polylines.back();
  REQUIRE(poly.vectors.size() == 2);
  CHECK(poly.vectors[0].start == Vec2(1.0, 1.0));
  CHECK(poly.vectors[0].end == Vec2(2.0, 1.0));
  CHECK(poly.vectors[1].start == Vec2(2.0, 1.0));
  CHECK(poly.vectors[1].end == Vec2(6.0, 1.0));
  CHECK(poly.vectors[0].timestamp_norm < poly.vectors[1].timestamp_norm);
}

TEST_CASE("agent with fewer than two observed positions is flagged") {
  NormalizedScene scene = normalize_scene(micro_scene(0, 1));
  AgentTrack lone;
  lone.agent_id = "lone";
  lone.positions = {{7, Vec2(3.0, 3.0)}};
  scene.agents.push_back(lone);
  const PolylineSet set = vectorize(scene);
  CHECK(set.polylines.back().degenerate);
  CHECK(set.polylines.back().vectors.empty());
}

TEST_CASE("vectorize is permutation-stable over the lane list") {
  NormalizedScene scene = normalize_scene(micro_scene(1, 3, 5));
  NormalizedScene swapped = scene;
  std::swap(swapped.lanes[0], swapped.lanes[2]);
  const PolylineSet a = vectorize(scene);
  const PolylineSet b = vectorize(swapped);
  // Lane 0 of `scene` is lane 2 of `swapped`; its vector sequence is intact.
  REQUIRE(a.polylines[0].vectors.size() == b.polylines[2].vectors.size());
  for (std::size_t i = 0; i < a.polylines[0].vectors.size(); ++i) {
    CHECK((a.polylines[0].vectors[i].start - b.polylines[2].vectors[i].start).norm() == 0.0);
    CHECK((a.polylines[0].vectors[i].end - b.polylines[2].vectors[i].end).norm() == 0.0);
  }
}

TEST_CASE("scale augmentation") {
  const NormalizedScene scene = normalize_scene(micro_scene());
  SUBCASE("s=1 is the identity") {
    CHECK(max_coordinate_diff(scene, augment_scale(scene, 1.0)) == 0.0);
  }
  SUBCASE("s=0.75 scales points exactly") {
    NormalizedScene probe = scene;
    probe.lanes[0].centerline[0] = Vec2(4.0, -8.0);
    const NormalizedScene scaled = augment_scale(probe, 0.75);
    CHECK(scaled.lanes[0].centerline[0] == Vec2(3.0, -6.0));
  }
  SUBCASE("origin anchor is preserved") {
    for (const double s : {0.75, 0.9, 1.1, 1.25}) {
      const NormalizedScene scaled = augment_scale(scene, s);
      CHECK((*scaled.aoi().position_at(19)).norm() == 0.0);
    }
  }
  SUBCASE("out-of-range factors are rejected") {
    CHECK_THROWS_AS(augment_scale(scene, 0.5), ValidationError);
    CHECK_THROWS_AS(augment_scale(scene, 1.3), ValidationError);
  }
  SUBCASE("gt future is scaled too") {
    const NormalizedScene scaled = augment_scale(scene, 0.8);
    CHECK((scaled.gt_future[0] - 0.8 * scene.gt_future[0]).norm() < 1e-15);
  }
}

TEST_CASE("noise augmentation") {
  const NormalizedScene scene = normalize_scene(micro_scene(2, 3));
  SUBCASE("sigma=0 is the identity") {
    CHECK(max_coordinate_diff(scene, augment_noise(scene, 0.0, 123)) == 0.0);
  }
  SUBCASE("fixed seed is deterministic") {
    const NormalizedScene a = augment_noise(scene, 0.2, 99);
    const NormalizedScene b = augment_noise(scene, 0.2, 99);
    CHECK(max_coordinate_diff(a, b) == 0.0);
  }
  SUBCASE("gt future stays clean") {
    const NormalizedScene noisy = augment_noise(scene, 0.2, 99);
    for (std::size_t i = 0; i < scene.gt_future.size(); ++i) {
      CHECK((noisy.gt_future[i] - scene.gt_future[i]).norm() == 0.0);
    }
  }
  SUBCASE("empirical spread of offsets matches sigma within 2%") {
    // Statistical oracle on the underlying sampler over 1e5 draws.
    Rng rng(2024);
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.gaussian(0.0, 0.2);
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / n;
    const double stddev = std::sqrt(sum_sq / n - mean * mean);
    CHECK(stddev == doctest::Approx(0.2).epsilon(0.02));
  }
}

TEST_CASE("scene validation catches broken invariants") {
  SUBCASE("two AoI agents") {
    RawScene scene = micro_scene();
    scene.agents[1].is_aoi = true;
    CHECK_THROWS_AS(scene.validate(), ValidationError);
  }
  SUBCASE("non-increasing time indices") {
    RawScene scene = micro_scene();
    std::swap(scene.agents[0].positions[3], scene.agents[0].positions[4]);
    CHECK_THROWS_AS(scene.validate(), ValidationError);
  }
  SUBCASE("lane with repeated points") {
    RawScene scene = micro_scene();
    scene.lanes[0].centerline[1] = scene.lanes[0].centerline[0];
    CHECK_THROWS_AS(scene.validate(), ValidationError);
  }
  SUBCASE("AoI absent at an observed step") {
    RawScene scene = micro_scene();
    auto& pos = scene.agents[0].positions;
    pos.erase(pos.begin() + 5);
    CHECK_THROWS_AS(scene.validate(), ValidationError);
  }
}
