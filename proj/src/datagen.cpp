#include "tgf/datagen.hpp"

#include "tgf/rng.hpp"
#include "tgf/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

namespace tgf {

namespace {

struct Route {
  std::string id;
  std::vector<Vec2> points;
  bool is_intersection = false;
  TurnDirection turn = TurnDirection::kNone;
  bool crosses_junction = false;  // eligible as a conflict path

  std::vector<double> cumulative;  // arc length at each point

  void finalize() {
    cumulative.resize(points.size());
    cumulative[0] = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      cumulative[i] = cumulative[i - 1] + (points[i] - points[i - 1]).norm();
    }
  }
  double length() const { return cumulative.back(); }

  Vec2 point_at(double s) const {
    if (s <= 0.0) {
      const Vec2 dir = (points[1] - points[0]).normalized();
      return points[0] + s * dir;
    }
    if (s >= length()) {
      const std::size_t n = points.size();
      const Vec2 dir = (points[n - 1] - points[n - 2]).normalized();
      return points[n - 1] + (s - length()) * dir;
    }
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    const std::size_t hi = static_cast<std::size_t>(it - cumulative.begin());
    const std::size_t lo = hi - 1;
    const double seg = cumulative[hi] - cumulative[lo];
    const double f = (s - cumulative[lo]) / seg;
    return points[lo] + f * (points[hi] - points[lo]);
  }

  Vec2 tangent_at(double s) const {
    const double h = 0.25;
    const Vec2 d = point_at(s + h) - point_at(std::max(0.0, s - h));
    const double n = d.norm();
    return n > 0.0 ? Vec2(d / n) : Vec2(1.0, 0.0);
  }

  // First arc length within `radius` of the junction center, or -1.
  double conflict_entry(const Vec2& center, double radius) const {
    for (double s = 0.0; s <= length(); s += 0.5) {
      if ((point_at(s) - center).norm() < radius) return s;
    }
    return -1.0;
  }
};

std::vector<Vec2> line_points(const Vec2& from, const Vec2& to, double spacing) {
  const double len = (to - from).norm();
  const int n = std::max(2, static_cast<int>(std::ceil(len / spacing)) + 1);
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    pts.push_back(from + (static_cast<double>(i) / (n - 1)) * (to - from));
  }
  return pts;
}

std::vector<Vec2> arc_points(const Vec2& center, double radius, double a0, double a1,
                             double spacing) {
  const double arc_len = std::abs(a1 - a0) * radius;
  const int n = std::max(3, static_cast<int>(std::ceil(arc_len / spacing)) + 1);
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double a = a0 + (static_cast<double>(i) / (n - 1)) * (a1 - a0);
    pts.push_back(center + radius * Vec2(std::cos(a), std::sin(a)));
  }
  return pts;
}

std::vector<Vec2> join(std::initializer_list<std::vector<Vec2>> parts) {
  std::vector<Vec2> out;
  for (const auto& part : parts) {
    for (const auto& p : part) {
      if (!out.empty() && (p - out.back()).norm() < 1e-9) continue;
      out.push_back(p);
    }
  }
  return out;
}

constexpr double kHalfLane = 1.75;  // lane center offset from road axis
constexpr double kJunctionRadius = 6.0;

// Stem-to-main connectors used by both intersection layouts. The stem runs
// north along x = +kHalfLane; main-road lanes sit at y = -kHalfLane (east)
// and y = +kHalfLane (west).
Route right_turn_route() {
  Route r;
  r.id = "turn_right";
  const double radius = 3.25;
  const double y_start = -kHalfLane - radius;  // arc start on the stem
  r.points = join({line_points(Vec2(kHalfLane, -90.0), Vec2(kHalfLane, y_start), 4.0),
                   arc_points(Vec2(kHalfLane + radius, y_start), radius, M_PI, M_PI / 2.0, 1.0),
                   line_points(Vec2(kHalfLane + radius, -kHalfLane), Vec2(140.0, -kHalfLane),
                               4.0)});
  r.is_intersection = true;
  r.turn = TurnDirection::kRight;
  r.crosses_junction = true;
  r.finalize();
  return r;
}

Route left_turn_route() {
  Route r;
  r.id = "turn_left";
  const double radius = kHalfLane + kHalfLane + 6.25;  // 9.75, wide sweep
  const double y_start = kHalfLane - radius;
  r.points = join({line_points(Vec2(kHalfLane, -90.0), Vec2(kHalfLane, y_start), 4.0),
                   arc_points(Vec2(kHalfLane - radius, y_start), radius, 0.0, M_PI / 2.0, 1.0),
                   line_points(Vec2(kHalfLane - radius, kHalfLane), Vec2(-140.0, kHalfLane),
                               4.0)});
  r.is_intersection = true;
  r.turn = TurnDirection::kLeft;
  r.crosses_junction = true;
  r.finalize();
  return r;
}

std::map<std::string, Route> build_routes(Layout layout) {
  std::map<std::string, Route> routes;
  const auto add = [&](Route r) {
    r.finalize();
    routes[r.id] = std::move(r);
  };

  switch (layout) {
    case Layout::kStraight: {
      Route e0{.id = "east0", .points = line_points(Vec2(-120.0, 0.0), Vec2(150.0, 0.0), 5.0)};
      Route e1{.id = "east1", .points = line_points(Vec2(-120.0, 3.5), Vec2(150.0, 3.5), 5.0)};
      Route w0{.id = "west0", .points = line_points(Vec2(150.0, 7.0), Vec2(-120.0, 7.0), 5.0)};
      add(e0);
      add(e1);
      add(w0);
      break;
    }
    case Layout::kCurve: {
      // Left-curving arcs through the origin heading east.
      const Vec2 center(0.0, 80.0);
      Route c0{.id = "curve0",
               .points = arc_points(center, 80.0, -M_PI / 2.0 - 1.1, -M_PI / 2.0 + 1.1, 3.0)};
      Route c1{.id = "curve1",
               .points = arc_points(center, 83.5, -M_PI / 2.0 - 1.1, -M_PI / 2.0 + 1.1, 3.0)};
      add(c0);
      add(c1);
      break;
    }
    case Layout::kTIntersection:
    case Layout::kFourWay: {
      Route main_e{.id = "main_east",
                   .points = line_points(Vec2(-140.0, -kHalfLane), Vec2(140.0, -kHalfLane), 5.0)};
      main_e.crosses_junction = true;
      Route main_w{.id = "main_west",
                   .points = line_points(Vec2(140.0, kHalfLane), Vec2(-140.0, kHalfLane), 5.0)};
      main_w.crosses_junction = true;
      add(main_e);
      add(main_w);
      add(right_turn_route());
      add(left_turn_route());
      if (layout == Layout::kFourWay) {
        Route through{.id = "stem_through",
                      .points = line_points(Vec2(kHalfLane, -90.0), Vec2(kHalfLane, 120.0), 5.0)};
        through.crosses_junction = true;
        add(through);
        Route south{.id = "cross_south",
                    .points = line_points(Vec2(-kHalfLane, 120.0), Vec2(-kHalfLane, -90.0), 5.0)};
        south.crosses_junction = true;
        add(south);
      } else {
        // The stem ends at the main road; approach lane only (used by
        // yielding agents that then turn right).
        add(right_turn_route());  // no-op, already present
      }
      break;
    }
  }
  return routes;
}

struct AgentPlan {
  Behavior behavior = Behavior::kConstantSpeed;
  const Route* route = nullptr;
  double s0 = 0.0;
  double v0 = 0.0;
  double lateral = 0.0;
  std::vector<double> accel;     // filled during integration
  std::vector<double> arc;       // s at each step
  std::vector<double> speed;     // v at each step
  double conflict_entry = -1.0;  // arc length entering the junction
  double nominal_conflict_time = -1.0;
};

// Integrates one agent under a per-step acceleration controller.
void integrate(AgentPlan& plan, const std::function<double(int, double, double)>& controller) {
  plan.arc.assign(kTotalSteps, 0.0);
  plan.speed.assign(kTotalSteps, 0.0);
  plan.accel.assign(kTotalSteps - 1, 0.0);
  plan.arc[0] = plan.s0;
  plan.speed[0] = plan.v0;
  for (int t = 0; t + 1 < kTotalSteps; ++t) {
    const double a = controller(t, plan.arc[static_cast<std::size_t>(t)],
                                plan.speed[static_cast<std::size_t>(t)]);
    plan.accel[static_cast<std::size_t>(t)] = a;
    double v_next = plan.speed[static_cast<std::size_t>(t)] + a * kDt;
    if (v_next < 0.0) v_next = 0.0;
    plan.arc[static_cast<std::size_t>(t + 1)] =
        plan.arc[static_cast<std::size_t>(t)] + v_next * kDt;
    plan.speed[static_cast<std::size_t>(t + 1)] = v_next;
  }
}

double time_to_reach(const AgentPlan& plan, double s_target) {
  for (int t = 0; t < kTotalSteps; ++t) {
    if (plan.arc[static_cast<std::size_t>(t)] >= s_target) return t * kDt;
  }
  return 1e9;
}

}  // namespace

void ScenarioTemplate::validate() const {
  if (behaviors.empty() || behaviors.size() > 8) {
    throw ValidationError("template " + name + ": agent count must be 1..8");
  }
  if (!(speed_min > 0.0 && speed_max >= speed_min)) {
    throw ValidationError("template " + name + ": invalid speed range");
  }
  const bool has_intersection =
      layout == Layout::kTIntersection || layout == Layout::kFourWay;
  for (const Behavior b : behaviors) {
    if ((b == Behavior::kTurnLeft || b == Behavior::kTurnRight ||
         b == Behavior::kDecelerateYield) &&
        !has_intersection) {
      throw ValidationError("template " + name +
                            ": turn/yield behaviors require an intersection layout");
    }
  }
}

RawScene gen_scene(const ScenarioTemplate& tmpl, std::uint64_t seed) {
  tmpl.validate();
  Rng rng(seed);
  const auto routes = build_routes(tmpl.layout);
  const Vec2 junction(0.0, 0.0);

  const auto pick_route = [&](std::initializer_list<const char*> ids) -> const Route* {
    const std::size_t i = static_cast<std::size_t>(rng.uniform_index(ids.size()));
    return &routes.at(*(ids.begin() + static_cast<std::ptrdiff_t>(i)));
  };

  std::vector<AgentPlan> plans(tmpl.behaviors.size());
  for (std::size_t i = 0; i < tmpl.behaviors.size(); ++i) {
    AgentPlan& plan = plans[i];
    plan.behavior = tmpl.behaviors[i];
    plan.v0 = rng.uniform(tmpl.speed_min, tmpl.speed_max);
    plan.lateral = rng.uniform(-0.3, 0.3);

    switch (tmpl.layout) {
      case Layout::kStraight:
        plan.route = pick_route({"east0", "east1", "west0"});
        break;
      case Layout::kCurve:
        plan.route = pick_route({"curve0", "curve1"});
        break;
      case Layout::kTIntersection:
      case Layout::kFourWay:
        switch (plan.behavior) {
          case Behavior::kTurnLeft:
            plan.route = &routes.at("turn_left");
            break;
          case Behavior::kTurnRight:
            plan.route = &routes.at("turn_right");
            break;
          case Behavior::kDecelerateYield:
            plan.route = tmpl.layout == Layout::kFourWay
                             ? pick_route({"stem_through", "turn_right", "turn_left"})
                             : pick_route({"turn_right", "turn_left"});
            break;
          default:
            plan.route = tmpl.layout == Layout::kFourWay
                             ? pick_route({"main_east", "main_west", "cross_south"})
                             : pick_route({"main_east", "main_west"});
            break;
        }
        break;
    }

    plan.conflict_entry = plan.route->crosses_junction
                              ? plan.route->conflict_entry(junction, kJunctionRadius)
                              : -1.0;

    // Placement: event-driven behaviors reach the junction shortly after the
    // observation window; the rest start at a seeded offset along the route.
    const bool junction_bound = plan.behavior == Behavior::kTurnLeft ||
                                plan.behavior == Behavior::kTurnRight ||
                                plan.behavior == Behavior::kDecelerateYield;
    if (junction_bound && plan.conflict_entry > 0.0) {
      const double arrive_at = i == 0 ? rng.uniform(2.2, 3.0) : rng.uniform(0.8, 3.4);
      plan.s0 = std::max(0.0, plan.conflict_entry - plan.v0 * arrive_at);
    } else if (plan.conflict_entry > 0.0) {
      // Through traffic crosses anywhere around the observation boundary.
      const double arrive_at = rng.uniform(0.8, 3.4);
      plan.s0 = std::max(0.0, plan.conflict_entry - plan.v0 * arrive_at);
    } else {
      plan.s0 = rng.uniform(0.1, 0.45) * plan.route->length();
    }
  }

  // Non-yield agents integrate first so yield agents can react to them.
  for (auto& plan : plans) {
    if (plan.behavior == Behavior::kDecelerateYield) continue;
    const double accel_rate = plan.behavior == Behavior::kAccelerate ? rng.uniform(0.8, 1.8)
                              : plan.behavior == Behavior::kLaneFollow
                                  ? rng.uniform(-0.4, 0.4)
                                  : 0.0;
    integrate(plan, [accel_rate](int, double, double) { return accel_rate; });
    if (plan.conflict_entry > 0.0) {
      plan.nominal_conflict_time = time_to_reach(plan, plan.conflict_entry);
    }
  }

  for (auto& plan : plans) {
    if (plan.behavior != Behavior::kDecelerateYield) continue;
    // Earliest conflicting arrival among agents that reach the junction first.
    double other_clear = -1.0;
    for (const auto& other : plans) {
      if (&other == &plan || other.arc.empty() || other.conflict_entry < 0.0) continue;
      const double t_enter = other.nominal_conflict_time;
      const double t_mine = (plan.conflict_entry - plan.s0) / std::max(plan.v0, 0.1);
      if (t_enter < t_mine) {
        const double t_exit = time_to_reach(other, other.conflict_entry + 2.0 * kJunctionRadius);
        other_clear = std::max(other_clear, std::min(t_exit + 0.3, 4.5));
      }
    }
    const double stop_line = plan.conflict_entry - 2.0;
    const double comfort_brake = 2.5;
    integrate(plan, [&](int t, double s, double v) {
      const double now = t * kDt;
      if (other_clear < 0.0 || now >= other_clear) {
        // Clear: resume cruise speed.
        return v < plan.v0 ? 1.5 : 0.0;
      }
      const double gap = stop_line - s;
      if (gap <= 0.0) return 0.0;
      if (v * v >= 2.0 * comfort_brake * gap) {
        // Brake to a near-stop at the stop line.
        return -std::min(v * v / (2.0 * std::max(gap, 0.3)), 6.0);
      }
      return 0.0;
    });
    if (plan.conflict_entry > 0.0) {
      plan.nominal_conflict_time = time_to_reach(plan, plan.conflict_entry);
    }
  }

  // Materialize tracks.
  RawScene scene;
  scene.scene_id = tmpl.name + "_" + std::to_string(seed);
  scene.aoi_id = "agent0";
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const AgentPlan& plan = plans[i];
    AgentTrack track;
    track.agent_id = "agent" + std::to_string(i);
    track.is_aoi = i == 0;

    // Late appearance / early exit for some background agents.
    int from = 0, to = kTotalSteps;
    if (i != 0 && rng.uniform() < 0.25) {
      if (rng.uniform() < 0.5) {
        from = 1 + static_cast<int>(rng.uniform_index(10));
      } else {
        to = kObsSteps - 1 - static_cast<int>(rng.uniform_index(8));
      }
    }
    for (int t = from; t < to; ++t) {
      const double s = plan.arc[static_cast<std::size_t>(t)];
      const Vec2 tangent = plan.route->tangent_at(s);
      const Vec2 normal(-tangent.y(), tangent.x());
      track.positions.push_back({t, plan.route->point_at(s) + plan.lateral * normal});
    }
    if (i == 0) {
      for (int t = kObsSteps; t < kTotalSteps; ++t) {
        scene.gt_future.push_back(
            track.positions[static_cast<std::size_t>(t)].pos);
      }
    }
    scene.agents.push_back(std::move(track));
  }

  for (const auto& [id, route] : routes) {
    LaneSegment lane;
    lane.lane_id = id;
    lane.centerline = route.points;
    lane.is_intersection = route.is_intersection;
    lane.turn_direction = route.turn;
    scene.lanes.push_back(std::move(lane));
  }

  scene.validate();
  return scene;
}

ScenarioTemplate standard_template(const std::string& name) {
  ScenarioTemplate t;
  t.name = name;
  if (name == "straight") {
    t.layout = Layout::kStraight;
    t.behaviors = {Behavior::kConstantSpeed, Behavior::kConstantSpeed, Behavior::kLaneFollow};
  } else if (name == "curve") {
    t.layout = Layout::kCurve;
    t.behaviors = {Behavior::kLaneFollow, Behavior::kConstantSpeed};
  } else if (name == "yield") {
    t.layout = Layout::kTIntersection;
    t.behaviors = {Behavior::kDecelerateYield, Behavior::kConstantSpeed};
  } else if (name == "yield_heavy") {
    t.layout = Layout::kFourWay;
    t.behaviors = {Behavior::kDecelerateYield, Behavior::kConstantSpeed,
                   Behavior::kConstantSpeed, Behavior::kLaneFollow};
  } else if (name == "turn_left") {
    t.layout = Layout::kTIntersection;
    t.behaviors = {Behavior::kTurnLeft, Behavior::kConstantSpeed};
  } else if (name == "turn_right") {
    t.layout = Layout::kTIntersection;
    t.behaviors = {Behavior::kTurnRight, Behavior::kConstantSpeed};
  } else if (name == "lane_follow") {
    t.layout = Layout::kStraight;
    t.behaviors = {Behavior::kLaneFollow, Behavior::kAccelerate};
  } else {
    throw ValidationError("unknown template: " + name);
  }
  return t;
}

std::vector<std::string> standard_template_names() {
  return {"straight", "curve", "yield", "yield_heavy", "turn_left", "turn_right", "lane_follow"};
}

Manifest gen_dataset(const DatasetSpec& spec, std::uint64_t master_seed, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir + ": " + ec.message());

  Manifest manifest;
  manifest.master_seed = master_seed;

  std::size_t index = 0;
  for (const auto& [tmpl, count] : spec.counts) {
    if (count < 0) throw ValidationError("negative scene count for template " + tmpl.name);
    for (int i = 0; i < count; ++i, ++index) {
      const std::uint64_t seed = derive_seed(master_seed, index);
      RawScene scene = gen_scene(tmpl, seed);
      char id[32];
      std::snprintf(id, sizeof(id), "s%06zu", index);
      scene.scene_id = id;
      const std::string file = std::string(id) + ".json";
      save_scene(scene, (fs::path(dir) / file).string());
      manifest.entries.push_back({scene.scene_id, file, tmpl.name, seed, "train"});
    }
  }

  // Exact seeded split: the first ceil(n * val_fraction) of a shuffled order
  // become validation scenes.
  if (!manifest.entries.empty() && spec.val_fraction > 0.0) {
    std::vector<std::size_t> order(manifest.entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(derive_seed(master_seed, 0xA55A5AA5ULL));
    split_rng.shuffle(order);
    const std::size_t n_val = static_cast<std::size_t>(
        std::ceil(spec.val_fraction * static_cast<double>(order.size())));
    for (std::size_t i = 0; i < n_val && i < order.size(); ++i) {
      manifest.entries[order[i]].split = "val";
    }
  }

  save_manifest(manifest, (fs::path(dir) / "manifest.json").string());
  return manifest;
}

}  // namespace tgf
