#pragma once

#include "tgf/rng.hpp"
#include "tgf/tape.hpp"
#include "tgf/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tgf {

enum class Init { kZero, kOne, kXavier, kTimeFrequency };

struct ParamBlock {
  std::string name;
  Matrix value;
  Matrix grad;
  Init init = Init::kZero;
};

// Ordered registry of named parameter blocks. Registration order is the flat
// index used for optimizer state, initialization draws, and checkpoints.
class ParamStore {
 public:
  int add(const std::string& name, int rows, int cols, Init init);
  int index_of(const std::string& name) const;

  ParamBlock& block(int idx) { return blocks_[static_cast<std::size_t>(idx)]; }
  const ParamBlock& block(int idx) const { return blocks_[static_cast<std::size_t>(idx)]; }
  int size() const { return static_cast<int>(blocks_.size()); }
  std::size_t scalar_count() const;

  void zero_grads();
  void scale_grads(double s);
  // Draws every block's values in registration order from one stream.
  void initialize(std::uint64_t seed);
  // Adds uniform noise to every entry. Gradient checks run at a jittered
  // point: zero-initialized biases put layer-norm outputs of all-zero input
  // rows exactly on the ReLU kink, where one-sided derivatives differ.
  void jitter(std::uint64_t seed, double scale = 0.05);

 private:
  std::vector<ParamBlock> blocks_;
  std::map<std::string, int> index_;
};

// Per-tape leaf handles for every block, in registration order.
struct ParamVars {
  std::vector<Var> vars;
  Var operator[](int idx) const { return vars[static_cast<std::size_t>(idx)]; }
};

// requires_grad=false skips backward bookkeeping for inference-only passes.
ParamVars lift_params(Tape& tape, const ParamStore& store, bool requires_grad = true);

// Adds each leaf's tape gradient into the store's grad buffers.
void accumulate_param_grads(const Tape& tape, const ParamVars& vars, ParamStore& store);

// Bias-corrected Adam with beta1=0.9, beta2=0.999, eps=1e-8.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;

  static AdamState fresh(const ParamStore& store);
};

void adam_step(ParamStore& params, AdamState& state, double lr);

// Checkpoint: versioned flat little-endian record of named blocks plus the
// architecture hash of the config that built them.
void save_checkpoint(const ParamStore& params, std::uint64_t arch_hash, const std::string& path);
// Loads into an already-registered store; shapes and names must match.
// Returns the stored arch hash.
std::uint64_t load_checkpoint(ParamStore& params, const std::string& path);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace tgf
