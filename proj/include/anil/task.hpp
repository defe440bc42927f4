#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "anil/types.hpp"

namespace anil {

enum class Geometry { kStronglyConvex, kNonconvex };

const char* to_string(Geometry g);

// Declared constants of a synthetic task family. The sampler certifies that
// every drawn task respects these bounds (see Certificates) and refuses specs
// that cannot be satisfied, so downstream theory checks may treat the fields
// as valid curvature/Lipschitz constants rather than wishes.
struct TaskFamilySpec {
  Geometry geometry = Geometry::kStronglyConvex;
  double mu = 1.0;           // strong convexity of the adapted loss in w; 0 iff nonconvex
  double smoothness_L = 1.0; // bound on Hessian blocks of both losses
  double lipschitz_M = 0.0;  // bound on outer-loss gradient norms over the operating region
  double rho = 0.0;          // Lipschitz constant of the adapted-loss Hessian in (w, phi)
  double tau = 0.0;          // Lipschitz constant of the adapted-loss mixed partial
  Index n_w = 1;
  Index n_phi = 0;
  std::uint64_t seed = 0;
  double nonconvexity_amplitude = 0.0;  // sinusoid weight; 0 for strongly convex
  // Ball radius around the origin (in the concatenated parameter space) on
  // which lipschitz_M is certified. Runs abort if iterates leave this ball.
  double operating_radius = 50.0;
};

// Throws ConfigError naming the offending field if the spec is inconsistent
// or cannot be realized by the sampler.
void validate_spec(const TaskFamilySpec& spec);

// One loss of the two-level objective:
//   l(w, phi) = 1/2 w'Aw + w'B phi + 1/2 phi'C phi + c_w'w + c_phi'phi
//               + sum_j sine[j] * sin(w[j])
// Adapted-level losses keep C and c_phi at zero; they would never enter the
// adaptation dynamics or the meta-gradient anyway.
struct LossParams {
  Matrix A;     // n_w x n_w, symmetric
  Matrix B;     // n_w x n_phi
  Matrix C;     // n_phi x n_phi, symmetric
  Vector c_w;   // n_w
  Vector c_phi; // n_phi
  Vector sine;  // n_w, per-coordinate sinusoid weights

  Index n_w() const { return A.rows(); }
  Index n_phi() const { return B.cols(); }

  double value(const Vector& w, const Vector& phi) const;
  Vector grad_w(const Vector& w, const Vector& phi) const;
  Vector grad_phi(const Vector& w, const Vector& phi) const;
  // Hessian in w: A - diag(sine .* sin(w)). Equals A wherever all sin(w_j)
  // vanish, e.g. at w = 0.
  Matrix hessian_w(const Vector& w) const;
  // Mixed partial d(grad_w)/d(phi) transposed to (n_phi x n_w); constant B'.
  Matrix mixed(const Vector& w, const Vector& phi) const;
};

// Bounds measured on the sampled data at construction time. Kept with the
// instance so consumers can audit the declared family constants.
struct Certificates {
  double inner_a_min = 0.0;        // smallest eigenvalue of the adapted-loss A
  double inner_a_max = 0.0;        // largest eigenvalue of the adapted-loss A
  double inner_b_norm = 0.0;       // spectral norm of the adapted-loss coupling
  double outer_joint_norm = 0.0;   // spectral norm of the outer-loss joint Hessian
  double required_m = 0.0;         // sup of outer gradient norm on the operating ball
  double witness_min_eig = 0.0;    // min eigenvalue of the adapted Hessian at the
                                   // maximal-curvature-loss point (nonconvex only)
};

struct TaskInstance {
  std::int64_t task_id = 0;
  Geometry geometry = Geometry::kStronglyConvex;
  double mu = 0.0;            // copied family constants, used by closed-form bounds
  double smoothness_L = 0.0;
  LossParams inner;           // adapted-level loss (support data)
  LossParams outer;           // meta-level loss (query data)
  Certificates cert;

  Index n_w() const { return inner.n_w(); }
  Index n_phi() const { return inner.n_phi(); }
};

// Derivative oracles of the adapted-level loss. All throw
// std::invalid_argument on dimension mismatch.
double inner_loss_value(const TaskInstance& t, const SplitParameters& p);
Vector inner_loss_grad_w(const TaskInstance& t, const SplitParameters& p);
Matrix inner_loss_hessian_w(const TaskInstance& t, const SplitParameters& p);
// Returned as (n_phi x n_w): row i holds d(grad_w)/d(phi_i).
Matrix inner_loss_mixed(const TaskInstance& t, const SplitParameters& p);

// Meta-level loss oracles.
double outer_loss_value(const TaskInstance& t, const SplitParameters& p);
Vector outer_loss_grad_w(const TaskInstance& t, const SplitParameters& p);
Vector outer_loss_grad_phi(const TaskInstance& t, const SplitParameters& p);

// Draws one task from the family using the supplied engine. Validates the
// spec on every call; prefer sample_task_family for bulk draws.
TaskInstance sample_task(const TaskFamilySpec& spec, std::mt19937_64& rng, std::int64_t task_id);

// Deterministic: identical spec (including seed) yields bit-identical tasks.
std::vector<TaskInstance> sample_task_family(const TaskFamilySpec& spec, int count);

// Pool drawn from the family with a seed stream disjoint from training draws.
std::vector<TaskInstance> sample_eval_pool(const TaskFamilySpec& spec, int count);

// Re-expresses a task so that the full concatenated parameter vector is the
// adapted block and the shared block is empty. Adapting the result with plain
// gradient steps is exactly full-parameter adaptation of the original task.
// With n_phi == 0 this is the identity on the stored data.
TaskInstance flatten_for_full_adaptation(const TaskInstance& t);

// True while (w, phi) stays inside the certified operating ball.
bool in_operating_region(const TaskFamilySpec& spec, const SplitParameters& p);

}  // namespace anil
