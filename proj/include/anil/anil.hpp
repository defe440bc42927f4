#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anil/meta_gradient.hpp"
#include "anil/task.hpp"

namespace anil {

// Outer stepsize selection. The schedules implement the N-dependent choices
// under which the convergence guarantees hold: strongly convex families scale
// the adapted-block stepsize by (1 - mu^2/L^2)^(-N/2) and keep the shared
// block constant; nonconvex families scale both blocks by 1/N.
enum class StepsizeRule { kManual, kStronglyConvexSchedule, kNonconvexSchedule };

// Inner stepsize selection: manual keeps inner.alpha as configured, schedule
// resolves it from the family (mu/L^2, or c_alpha/N for nonconvex).
enum class AlphaRule { kManual, kSchedule };

enum class Termination { kCompleted, kDiverged, kLeftRegion };

const char* to_string(StepsizeRule r);
const char* to_string(AlphaRule r);
const char* to_string(Termination t);

struct OuterConfig {
  double beta_w = 0.01;        // used when stepsize_rule == kManual
  double beta_phi = 0.01;
  int batch_size = 8;
  int max_outer_iters = 100;   // K
  InnerLoopConfig inner;
  AlphaRule alpha_rule = AlphaRule::kManual;
  std::uint64_t seed = 0;
  StepsizeRule stepsize_rule = StepsizeRule::kManual;
  double rule_scale_w = 0.01;  // schedule prefactors
  double rule_scale_phi = 0.01;
  int eval_interval = 1;       // telemetry/crossing cadence
  int frozen_pool_size = 0;    // > 0 trains on a frozen pool of that size
  bool enforce_operating_region = true;
  bool record_trajectory = false;
  double init_scale = 1.0;     // norm of the drawn starting point
};

void validate_outer(const OuterConfig& cfg);

// Where training tasks come from: fresh draws from a family (the default,
// matching the population objective) or a frozen finite pool (exactness tests
// and deterministic full-batch runs).
class TaskSource {
 public:
  static TaskSource from_family(const TaskFamilySpec& spec);
  static TaskSource from_pool(std::vector<TaskInstance> pool);
  static TaskSource from_pool(std::vector<TaskInstance> pool, const TaskFamilySpec& spec);

  bool frozen() const { return frozen_; }
  const std::optional<TaskFamilySpec>& spec() const { return spec_; }
  const std::vector<TaskInstance>& pool() const { return pool_; }

 private:
  std::optional<TaskFamilySpec> spec_;
  std::vector<TaskInstance> pool_;
  bool frozen_ = false;
};

struct TelemetryRow {
  int iter = 0;
  double batch_grad_w_sq = 0.0;   // squared norms of the mini-batch average
  double batch_grad_phi_sq = 0.0;
  double pop_grad_w_sq = 0.0;     // squared norms over the evaluation pool
  double pop_grad_phi_sq = 0.0;
  OpCount ops;                    // cumulative training cost incl. this batch
  double elapsed_ms = 0.0;
};

struct CrossingRecord {
  bool reached = false;
  int iter = -1;    // first iterate whose population norms are both < target
  OpCount ops;      // training cost spent producing that iterate
};

struct RunRecord {
  std::vector<TelemetryRow> rows;
  SplitParameters final_params;
  Termination reason = Termination::kCompleted;
  int terminated_at = -1;          // iteration index when not kCompleted
  std::string diagnostic;
  CrossingRecord crossing;
  double final_pop_grad_w_sq = -1.0;   // -1 when the final state is not evaluable
  double final_pop_grad_phi_sq = -1.0;
  double beta_w = 0.0;             // resolved stepsizes actually used
  double beta_phi = 0.0;
  double alpha = 0.0;              // resolved adaptation config actually used
  int num_steps = 0;
  OpCount total_ops;
  double elapsed_ms = 0.0;
  std::vector<SplitParameters> trajectory;  // init + post-update states, when recorded
};

// Pool-averaged meta-gradient blocks at p, and their squared norms. The
// accumulation order matches the mini-batch average inside the optimizer, so
// a frozen-pool full-batch step sees bit-identical vectors.
std::pair<Vector, Vector> population_meta_gradient(const std::vector<TaskInstance>& pool,
                                                   const SplitParameters& p,
                                                   const InnerLoopConfig& cfg,
                                                   OpCount* ops = nullptr);
std::pair<double, double> population_meta_grad_norms(const std::vector<TaskInstance>& pool,
                                                     const SplitParameters& p,
                                                     const InnerLoopConfig& cfg);

// Resolved outer stepsizes for adaptation depth n_steps. Schedules other than
// kManual need a family spec (ConfigError otherwise).
std::pair<double, double> resolve_outer_stepsizes(const OuterConfig& cfg,
                                                  const std::optional<TaskFamilySpec>& spec,
                                                  int n_steps);

// Resolved adaptation config (applies alpha_rule against the family).
InnerLoopConfig resolve_inner(const OuterConfig& cfg,
                              const std::optional<TaskFamilySpec>& spec);

// Deterministic starting point: a vector of norm init_scale drawn from the
// kInit stream of `seed`, split into the two blocks.
SplitParameters draw_initial_parameters(Index n_w, Index n_phi, std::uint64_t seed,
                                        double init_scale);

// Mini-batch meta-optimization of the two-level objective: per iteration,
// draw batch_size tasks, adapt each from the current parameters, average the
// exact per-task meta-gradients and take one step on each block. Telemetry
// rows are recorded every eval_interval iterations (at most max_outer_iters
// rows); population norms come from eval_pool, whose cost is not charged to
// the run. With epsilon_target > 0 the first iterate whose population norms
// are both below the target is recorded in crossing (the run still continues
// to max_outer_iters). Terminates early with reason kDiverged on non-finite
// values and kLeftRegion when enforce_operating_region is set and the
// parameters leave the family's certified ball.
RunRecord anil_run(const TaskSource& source, const OuterConfig& cfg,
                   const SplitParameters& init, const std::vector<TaskInstance>& eval_pool,
                   double epsilon_target = 0.0);

// Full-parameter adaptation baseline: every task is re-expressed so the whole
// concatenated vector is adapted (shared block empty), then optimized by the
// same outer loop under beta_w. Each adaptation step therefore charges
// (n_w + n_phi)^2 Hessian entries. With n_phi == 0 the re-expression is the
// identity and the run is bit-identical to anil_run.
RunRecord maml_run(const TaskSource& source, const OuterConfig& cfg, const Vector& init_z,
                   const std::vector<TaskInstance>& eval_pool, double epsilon_target = 0.0);

}  // namespace anil
