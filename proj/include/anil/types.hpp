#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace anil {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Parameters split into a task-adapted block `w` and a shared block `phi`.
// Either block may be empty; dimensions are fixed by the task family.
struct SplitParameters {
  Vector w;
  Vector phi;

  Index n_w() const { return w.size(); }
  Index n_phi() const { return phi.size(); }

  bool is_finite() const { return w.allFinite() && phi.allFinite(); }

  // Euclidean norm of the concatenated parameter vector.
  double joint_norm() const { return std::sqrt(w.squaredNorm() + phi.squaredNorm()); }

  Vector concat() const {
    Vector z(w.size() + phi.size());
    z << w, phi;
    return z;
  }
};

// Cumulative oracle-entry counters. Each derivative evaluation charges the
// number of scalar entries it produces, so counters depend only on dimensions
// and step counts, never on wall time or sparsity of the underlying data.
struct OpCount {
  std::int64_t grad_w_entries = 0;
  std::int64_t grad_phi_entries = 0;
  std::int64_t hessian_entries = 0;
  std::int64_t mixed_entries = 0;

  std::int64_t gradient_total() const { return grad_w_entries + grad_phi_entries; }
  std::int64_t second_order_total() const { return hessian_entries + mixed_entries; }

  OpCount& operator+=(const OpCount& o) {
    grad_w_entries += o.grad_w_entries;
    grad_phi_entries += o.grad_phi_entries;
    hessian_entries += o.hessian_entries;
    mixed_entries += o.mixed_entries;
    return *this;
  }
  friend OpCount operator+(OpCount a, const OpCount& b) { return a += b; }
  friend bool operator==(const OpCount& a, const OpCount& b) {
    return a.grad_w_entries == b.grad_w_entries && a.grad_phi_entries == b.grad_phi_entries &&
           a.hessian_entries == b.hessian_entries && a.mixed_entries == b.mixed_entries;
  }
};

// Invalid configuration or input data. Messages name the offending field and
// the constraint so callers can fix the configuration without reading code.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values produced by an iterative computation. `step` is the
// 0-based index of the update that produced the first non-finite iterate.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step_index, const std::string& msg)
      : std::runtime_error(msg), step(step_index) {}
  int step;
};

inline void check_config(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline void check_dims(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Named RNG streams so that independent sampling purposes draw from disjoint
// deterministic sequences even when configured with the same base seed.
enum class RngStream : std::uint32_t {
  kTasks = 0x7461736b,   // family sampling
  kEvalPool = 0x6576616c,  // held-out evaluation pool
  kBatch = 0x62617463,   // per-iteration batch draws
  kInit = 0x696e6974,    // parameter initialization
  kProbe = 0x70726f62,   // smoothness probe perturbations
  kPoints = 0x706f696e,  // random evaluation points in tests/checks
};

inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace anil
