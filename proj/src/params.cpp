#include "tgf/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace tgf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts need byte swaps");

int ParamStore::add(const std::string& name, int rows, int cols, Init init) {
  if (index_.count(name) > 0) throw ValidationError("duplicate parameter block: " + name);
  ParamBlock b;
  b.name = name;
  b.value = Matrix::Zero(rows, cols);
  b.grad = Matrix::Zero(rows, cols);
  b.init = init;
  blocks_.push_back(std::move(b));
  const int idx = static_cast<int>(blocks_.size()) - 1;
  index_[name] = idx;
  return idx;
}

int ParamStore::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter block: " + name);
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.value.size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& b : blocks_) b.grad.setZero();
}

void ParamStore::scale_grads(double s) {
  for (auto& b : blocks_) b.grad *= s;
}

void ParamStore::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& b : blocks_) {
    switch (b.init) {
      case Init::kZero:
        b.value.setZero();
        break;
      case Init::kOne:
        b.value.setOnes();
        break;
      case Init::kXavier: {
        const double bound =
            std::sqrt(6.0 / static_cast<double>(b.value.rows() + b.value.cols()));
        for (int r = 0; r < b.value.rows(); ++r) {
          for (int c = 0; c < b.value.cols(); ++c) b.value(r, c) = rng.uniform(-bound, bound);
        }
        break;
      }
      case Init::kTimeFrequency: {
        // Log-spaced angular frequencies covering periods 0.2 s .. 40 s.
        const int d = static_cast<int>(b.value.cols());
        for (int c = 0; c < d; ++c) {
          const double frac = d > 1 ? static_cast<double>(c) / (d - 1) : 0.0;
          const double period = 0.2 * std::pow(200.0, frac);
          b.value(0, c) = 2.0 * M_PI / period;
        }
        break;
      }
    }
    b.grad.setZero();
  }
}

void ParamStore::jitter(std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& b : blocks_) {
    for (int r = 0; r < b.value.rows(); ++r) {
      for (int c = 0; c < b.value.cols(); ++c) b.value(r, c) += rng.uniform(-scale, scale);
    }
  }
}

ParamVars lift_params(Tape& tape, const ParamStore& store, bool requires_grad) {
  ParamVars pv;
  pv.vars.reserve(static_cast<std::size_t>(store.size()));
  for (int i = 0; i < store.size(); ++i) {
    pv.vars.push_back(tape.leaf(store.block(i).value, requires_grad));
  }
  return pv;
}

void accumulate_param_grads(const Tape& tape, const ParamVars& vars, ParamStore& store) {
  for (int i = 0; i < store.size(); ++i) {
    const Var v = vars[i];
    if (tape.has_grad(v)) store.block(i).grad += tape.grad(v);
  }
}

AdamState AdamState::fresh(const ParamStore& store) {
  AdamState s;
  s.m.reserve(static_cast<std::size_t>(store.size()));
  s.v.reserve(static_cast<std::size_t>(store.size()));
  for (int i = 0; i < store.size(); ++i) {
    const auto& b = store.block(i);
    s.m.push_back(Matrix::Zero(b.value.rows(), b.value.cols()));
    s.v.push_back(Matrix::Zero(b.value.rows(), b.value.cols()));
  }
  s.step = 0;
  return s;
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  if (static_cast<int>(state.m.size()) != params.size()) {
    throw ValidationError("adam_step: state does not match parameter store");
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (int i = 0; i < params.size(); ++i) {
    auto& b = params.block(i);
    if (!b.grad.allFinite()) {
      throw NumericalError("adam_step: non-finite gradient in block " + b.name);
    }
    Matrix& m = state.m[static_cast<std::size_t>(i)];
    Matrix& v = state.v[static_cast<std::size_t>(i)];
    m = kBeta1 * m + (1.0 - kBeta1) * b.grad;
    v = kBeta2 * v + (1.0 - kBeta2) * b.grad.cwiseProduct(b.grad);
    const Matrix mhat = m / c1;
    const Matrix vhat = v / c2;
    b.value -= lr * mhat.cwiseQuotient(vhat.cwiseSqrt() + Matrix::Constant(vhat.rows(), vhat.cols(), kEps));
  }
}

namespace {

constexpr char kMagic[4] = {'T', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const ParamStore& params, std::uint64_t arch_hash, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, arch_hash);
  write_pod(os, static_cast<std::uint64_t>(params.size()));
  for (int i = 0; i < params.size(); ++i) {
    const auto& b = params.block(i);
    write_pod(os, static_cast<std::uint32_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    write_pod(os, static_cast<std::uint64_t>(b.value.rows()));
    write_pod(os, static_cast<std::uint64_t>(b.value.cols()));
    for (int r = 0; r < b.value.rows(); ++r) {
      for (int c = 0; c < b.value.cols(); ++c) write_pod(os, b.value(r, c));
    }
  }
  if (!os) throw IoError("checkpoint write failed: " + path);
}

std::uint64_t load_checkpoint(ParamStore& params, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError("not a checkpoint file: " + path);
  }
  std::uint32_t version = 0;
  read_pod(is, version);
  if (version != kVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint64_t arch_hash = 0;
  read_pod(is, arch_hash);
  std::uint64_t count = 0;
  read_pod(is, count);
  if (count != static_cast<std::uint64_t>(params.size())) {
    throw ValidationError("checkpoint block count mismatch: file has " + std::to_string(count) +
                          ", model expects " + std::to_string(params.size()));
  }
  for (int i = 0; i < params.size(); ++i) {
    auto& b = params.block(i);
    std::uint32_t name_len = 0;
    read_pod(is, name_len);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw IoError("checkpoint truncated");
    std::uint64_t rows = 0, cols = 0;
    read_pod(is, rows);
    read_pod(is, cols);
    if (name != b.name || rows != static_cast<std::uint64_t>(b.value.rows()) ||
        cols != static_cast<std::uint64_t>(b.value.cols())) {
      throw ValidationError("checkpoint block mismatch at " + b.name);
    }
    for (int r = 0; r < b.value.rows(); ++r) {
      for (int c = 0; c < b.value.cols(); ++c) read_pod(is, b.value(r, c));
    }
  }
  return arch_hash;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace tgf
