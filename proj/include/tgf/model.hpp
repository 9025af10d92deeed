#pragma once

#include "tgf/context_encoder.hpp"
#include "tgf/goal_decoder.hpp"
#include "tgf/memory.hpp"
#include "tgf/temporal_encoder.hpp"
#include "tgf/temporal_graph.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tgf {

struct ModelToggles {
  bool tg = true;
  bool seq_mem = true;
  bool scene_mem = true;
  bool goal_pred = true;
  bool goal_loss = true;
};

struct ModelConfig {
  int feature_dim = 128;
  int K = 6;
  ModelToggles toggles;
  bool per_step_state = false;
  bool scene_mem_mlp = false;
  // Agent-side goal head reads the full composite representation; when false
  // it is restricted to the enhanced 3d slice.
  bool goal_agent_source_full = true;

  void validate() const;
  int composite_width() const;
  // Canonical string over every field that changes parameter shapes or the
  // forward computation; hashed into checkpoints.
  std::string arch_string() const;
  std::uint64_t arch_hash() const;
};

// Per-scene preprocessed inputs shared by training and inference.
struct SceneInputs {
  NormalizedScene scene;
  PolylineSet polylines;
  TemporalGraph graph;
};

SceneInputs prepare_inputs(const NormalizedScene& filtered);

struct ForwardGraph {
  Var context;
  std::vector<Var> feature_sequence;  // empty when the temporal graph is off
  Var F_T;
  MemoryRollout memories;
  AgentRepr agent;
  GoalGraph goals;  // populated when goal prediction is on
  Var map_f;        // valid when goal prediction is on
  bool has_goals = false;
  std::vector<Var> trajectories;  // K entries of 30 x 2
  std::vector<int> lane_rows;
  int aoi_node = -1;
};

struct GoalSet {
  Matrix proposals;  // K x 2
  Matrix refined;    // K x 2
  Vector scores;     // K, sums to 1
};

struct ForecastOutput {
  std::string scene_id;
  std::vector<Matrix> trajectories;  // K of 30 x 2, normalized frame
  std::optional<GoalSet> goals;
  Vector probabilities;  // K; uniform when goal prediction is off
  FrameTransform transform;
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::uint64_t arch_hash() const { return cfg_.arch_hash(); }

  void initialize(std::uint64_t seed) { params_.initialize(seed); }

  ForwardGraph build(Tape& tape, const ParamVars& pv, const SceneInputs& inputs) const;

  ForecastOutput forecast(const SceneInputs& inputs) const;
  ForecastOutput forecast(const NormalizedScene& filtered) const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
  ContextEncoderParams context_;
  std::optional<TemporalEncoderParams> temporal_;
  MemoryParams memory_;
  GoalDecoderParams decoder_;
};

}  // namespace tgf
