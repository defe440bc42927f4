#pragma once

#include <vector>

#include "anil/task.hpp"
#include "anil/types.hpp"

namespace anil {

struct InnerLoopConfig {
  double alpha = 0.1;  // adaptation stepsize
  int num_steps = 1;   // N; 0 means no adaptation
  // Cap coefficient for nonconvex runs: alpha must satisfy alpha <= c_alpha/N.
  // 0 selects the default 1/(2 * smoothness_L). Raise it deliberately to run
  // outside the guaranteed regime (e.g. to demonstrate divergence).
  double c_alpha = 0.0;
};

// Basic field checks; family-dependent stepsize constraints live in
// validate_inner_for_family.
void validate_inner(const InnerLoopConfig& cfg);

// Enforces the geometry-specific stepsize regime against a family spec:
// nonconvex families require alpha <= c_alpha / max(N, 1).
void validate_inner_for_family(const InnerLoopConfig& cfg, const TaskFamilySpec& spec);

// Stepsize prescribed by the convergence analysis: mu/L^2 for strongly convex
// families, c_alpha / max(N, 1) for nonconvex ones.
double scheduled_inner_stepsize(const TaskFamilySpec& spec, const InnerLoopConfig& cfg);

// Full record of one adaptation run: iterates[m] is w_m, so the vector has
// num_steps + 1 entries and iterates.front() is the starting point.
struct InnerLoopTrace {
  std::int64_t task_id = 0;
  Vector phi_snapshot;           // shared block, held fixed during adaptation
  InnerLoopConfig config;
  std::vector<Vector> iterates;
  OpCount ops;                   // num_steps gradient evaluations in w

  const Vector& final_w() const { return iterates.back(); }
};

// One gradient step on the adapted block. Shared by the loop and by replay
// checks so recomputation is bit-identical.
Vector inner_step(const TaskInstance& t, const Vector& w, const Vector& phi, double alpha);

// Runs num_steps gradient steps on the adapted-level loss from p, holding
// p.phi fixed. Throws DivergenceError (with the step index) on the first
// non-finite iterate and std::invalid_argument on dimension mismatch or a
// non-finite starting point.
InnerLoopTrace run_inner_loop(const TaskInstance& t, const SplitParameters& p,
                              const InnerLoopConfig& cfg);

// Largest absolute deviation when every stored transition is recomputed via
// inner_step; exactly 0.0 for a trace produced by run_inner_loop.
double replay_max_deviation(const TaskInstance& t, const InnerLoopTrace& trace);

// Two adaptation runs compared step by step against the geometric contraction
// bound q^(t/2) * |w1 - w2| + alpha*L*|phi1 - phi2| / (1 - sqrt(q)) with
// q = 1 - 2*alpha*mu + alpha^2*L^2.
struct ContractionStep {
  int t = 0;
  double lhs = 0.0;    // measured iterate distance
  double bound = 0.0;
  bool violated = false;
};

struct ContractionReport {
  double q = 0.0;
  std::vector<ContractionStep> steps;  // t = 0 .. num_steps
  int num_violations = 0;
  double max_gap = 0.0;  // max over t of lhs - bound (negative when all hold)
};

// Requires a strongly convex task and 0 < q < 1; throws ConfigError otherwise.
ContractionReport contraction_check(const TaskInstance& t, const SplitParameters& p1,
                                    const SplitParameters& p2, const InnerLoopConfig& cfg);

}  // namespace anil
