#include "anil/anil.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <tuple>

#include "anil/inner_loop.hpp"

namespace anil {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Per-task meta-gradient with full cost accounting (adaptation + assembly).
MetaGradient charged_meta_gradient(const TaskInstance& t, const SplitParameters& p,
                                   const InnerLoopConfig& cfg) {
  const InnerLoopTrace trace = run_inner_loop(t, p, cfg);
  MetaGradient mg = meta_gradient(t, trace);
  mg.ops += trace.ops;
  return mg;
}

}  // namespace

const char* to_string(StepsizeRule r) {
  switch (r) {
    case StepsizeRule::kManual: return "manual";
    case StepsizeRule::kStronglyConvexSchedule: return "strongly_convex_schedule";
    case StepsizeRule::kNonconvexSchedule: return "nonconvex_schedule";
  }
  return "unknown";
}

const char* to_string(AlphaRule r) {
  switch (r) {
    case AlphaRule::kManual: return "manual";
    case AlphaRule::kSchedule: return "schedule";
  }
  return "unknown";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kCompleted: return "completed";
    case Termination::kDiverged: return "diverged";
    case Termination::kLeftRegion: return "left_operating_region";
  }
  return "unknown";
}

void validate_outer(const OuterConfig& cfg) {
  check_config(cfg.batch_size >= 1, "batch_size must be at least 1");
  check_config(cfg.max_outer_iters >= 1, "max_outer_iters must be at least 1");
  check_config(cfg.eval_interval >= 1, "eval_interval must be at least 1");
  check_config(cfg.frozen_pool_size >= 0, "frozen_pool_size must be nonnegative");
  check_config(cfg.init_scale > 0.0, "init_scale must be positive");
  if (cfg.stepsize_rule == StepsizeRule::kManual) {
    check_config(cfg.beta_w > 0.0, "beta_w must be positive");
    check_config(cfg.beta_phi > 0.0, "beta_phi must be positive");
  } else {
    check_config(cfg.rule_scale_w > 0.0, "rule_scale_w must be positive");
    check_config(cfg.rule_scale_phi > 0.0, "rule_scale_phi must be positive");
  }
  validate_inner(cfg.inner);
}

TaskSource TaskSource::from_family(const TaskFamilySpec& spec) {
  validate_spec(spec);
  TaskSource s;
  s.spec_ = spec;
  s.frozen_ = false;
  return s;
}

TaskSource TaskSource::from_pool(std::vector<TaskInstance> pool) {
  check_config(!pool.empty(), "task pool must not be empty");
  TaskSource s;
  s.pool_ = std::move(pool);
  s.frozen_ = true;
  return s;
}

TaskSource TaskSource::from_pool(std::vector<TaskInstance> pool, const TaskFamilySpec& spec) {
  validate_spec(spec);
  TaskSource s = from_pool(std::move(pool));
  s.spec_ = spec;
  return s;
}

std::pair<Vector, Vector> population_meta_gradient(const std::vector<TaskInstance>& pool,
                                                   const SplitParameters& p,
                                                   const InnerLoopConfig& cfg, OpCount* ops) {
  check_config(!pool.empty(), "task pool must not be empty");
  Vector sum_w = Vector::Zero(p.n_w());
  Vector sum_phi = Vector::Zero(p.n_phi());
  for (const TaskInstance& t : pool) {
    const MetaGradient mg = charged_meta_gradient(t, p, cfg);
    sum_w += mg.grad_w;
    sum_phi += mg.grad_phi;
    if (ops != nullptr) *ops += mg.ops;
  }
  const double inv = 1.0 / static_cast<double>(pool.size());
  return {sum_w * inv, sum_phi * inv};
}

std::pair<double, double> population_meta_grad_norms(const std::vector<TaskInstance>& pool,
                                                     const SplitParameters& p,
                                                     const InnerLoopConfig& cfg) {
  const auto [gw, gphi] = population_meta_gradient(pool, p, cfg);
  return {gw.squaredNorm(), gphi.squaredNorm()};
}

std::pair<double, double> resolve_outer_stepsizes(const OuterConfig& cfg,
                                                  const std::optional<TaskFamilySpec>& spec,
                                                  int n_steps) {
  switch (cfg.stepsize_rule) {
    case StepsizeRule::kManual:
      check_config(cfg.beta_w > 0.0, "beta_w must be positive");
      check_config(cfg.beta_phi > 0.0, "beta_phi must be positive");
      return {cfg.beta_w, cfg.beta_phi};
    case StepsizeRule::kStronglyConvexSchedule: {
      check_config(spec.has_value(),
                   "strongly_convex_schedule requires a task family spec");
      check_config(spec->geometry == Geometry::kStronglyConvex,
                   "strongly_convex_schedule requires a strongly convex family");
      check_config(spec->mu < spec->smoothness_L,
                   "strongly_convex_schedule requires mu strictly below smoothness_L");
      check_config(cfg.rule_scale_w > 0.0, "rule_scale_w must be positive");
      check_config(cfg.rule_scale_phi > 0.0, "rule_scale_phi must be positive");
      const double ratio = spec->mu / spec->smoothness_L;
      const double xi = 1.0 - ratio * ratio;
      const double beta_w = cfg.rule_scale_w * std::pow(xi, -0.5 * n_steps);
      return {beta_w, cfg.rule_scale_phi};
    }
    case StepsizeRule::kNonconvexSchedule: {
      check_config(cfg.rule_scale_w > 0.0, "rule_scale_w must be positive");
      check_config(cfg.rule_scale_phi > 0.0, "rule_scale_phi must be positive");
      const double inv_n = 1.0 / static_cast<double>(std::max(n_steps, 1));
      return {cfg.rule_scale_w * inv_n, cfg.rule_scale_phi * inv_n};
    }
  }
  throw ConfigError("unknown stepsize rule");
}

InnerLoopConfig resolve_inner(const OuterConfig& cfg,
                              const std::optional<TaskFamilySpec>& spec) {
  InnerLoopConfig inner = cfg.inner;
  if (cfg.alpha_rule == AlphaRule::kSchedule) {
    check_config(spec.has_value(), "alpha schedule requires a task family spec");
    inner.alpha = scheduled_inner_stepsize(*spec, inner);
  }
  validate_inner(inner);
  if (spec.has_value()) validate_inner_for_family(inner, *spec);
  return inner;
}

SplitParameters draw_initial_parameters(Index n_w, Index n_phi, std::uint64_t seed,
                                        double init_scale) {
  check_dims(n_w >= 1, "n_w must be at least 1");
  check_dims(n_phi >= 0, "n_phi must be nonnegative");
  check_config(init_scale > 0.0, "init_scale must be positive");
  std::mt19937_64 rng = make_rng(seed, RngStream::kInit);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n_w + n_phi);
  for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  z *= init_scale / z.norm();
  SplitParameters p;
  p.w = z.head(n_w);
  p.phi = z.tail(n_phi);
  return p;
}

namespace {

// Shared outer loop. When flatten is set, every training draw is re-expressed
// for full-parameter adaptation before use (the eval pool and init are
// expected to be re-expressed already).
RunRecord run_outer(const TaskSource& source, const OuterConfig& cfg,
                    const SplitParameters& init, const std::vector<TaskInstance>& eval_pool,
                    double epsilon_target, bool flatten) {
  validate_outer(cfg);
  check_config(!eval_pool.empty(), "eval_pool must not be empty");
  check_config(epsilon_target >= 0.0, "epsilon_target must be nonnegative");
  check_dims(init.w.size() == eval_pool.front().n_w(),
             "init adapted block does not match task dimension");
  check_dims(init.phi.size() == eval_pool.front().n_phi(),
             "init shared block does not match task dimension");
  if (source.frozen()) {
    check_dims(source.pool().front().n_w() == eval_pool.front().n_w() &&
                   source.pool().front().n_phi() == eval_pool.front().n_phi(),
               "training pool dimensions do not match eval pool");
  }

  const std::optional<TaskFamilySpec>& spec = source.spec();
  const InnerLoopConfig inner = resolve_inner(cfg, spec);
  const auto [beta_w, beta_phi] = resolve_outer_stepsizes(cfg, spec, inner.num_steps);

  RunRecord rec;
  rec.beta_w = beta_w;
  rec.beta_phi = beta_phi;
  rec.alpha = inner.alpha;
  rec.num_steps = inner.num_steps;

  // A positive frozen_pool_size freezes the family's training draws into a
  // fixed pool up front, making every batch come from the same finite set.
  std::vector<TaskInstance> materialized;
  const std::vector<TaskInstance>* train_pool = source.frozen() ? &source.pool() : nullptr;
  if (!source.frozen() && cfg.frozen_pool_size > 0) {
    materialized = sample_task_family(*spec, cfg.frozen_pool_size);
    if (flatten) {
      for (TaskInstance& t : materialized) t = flatten_for_full_adaptation(t);
    }
    train_pool = &materialized;
  }

  std::mt19937_64 batch_rng = make_rng(cfg.seed, RngStream::kBatch);
  int fresh_task_id = 0;
  const auto draw_batch = [&]() {
    std::vector<TaskInstance> batch;
    batch.reserve(cfg.batch_size);
    if (train_pool != nullptr) {
      const auto& pool = *train_pool;
      if (static_cast<std::size_t>(cfg.batch_size) == pool.size()) {
        batch = pool;  // full batch, in pool order
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(pool[pick(batch_rng)]);
      }
    } else {
      for (int b = 0; b < cfg.batch_size; ++b) {
        TaskInstance t = sample_task(*spec, batch_rng, fresh_task_id++);
        if (flatten) t = flatten_for_full_adaptation(t);
        batch.push_back(std::move(t));
      }
    }
    return batch;
  };

  SplitParameters p = init;
  if (cfg.record_trajectory) rec.trajectory.push_back(p);
  const Clock::time_point start = Clock::now();
  OpCount cumulative;

  const int K = cfg.max_outer_iters;
  for (int k = 0; k < K; ++k) {
    try {
      const bool eval_iter = (k % cfg.eval_interval == 0);
      double pop_w_sq = 0.0;
      double pop_phi_sq = 0.0;
      if (eval_iter) {
        std::tie(pop_w_sq, pop_phi_sq) = population_meta_grad_norms(eval_pool, p, inner);
        if (epsilon_target > 0.0 && !rec.crossing.reached && pop_w_sq < epsilon_target &&
            pop_phi_sq < epsilon_target) {
          rec.crossing.reached = true;
          rec.crossing.iter = k;
          rec.crossing.ops = cumulative;  // cost of producing the iterate, pre-batch
        }
      }

      const std::vector<TaskInstance> batch = draw_batch();
      OpCount batch_ops;
      const auto [avg_w, avg_phi] = population_meta_gradient(batch, p, inner, &batch_ops);
      cumulative += batch_ops;

      if (eval_iter) {
        TelemetryRow row;
        row.iter = k;
        row.batch_grad_w_sq = avg_w.squaredNorm();
        row.batch_grad_phi_sq = avg_phi.squaredNorm();
        row.pop_grad_w_sq = pop_w_sq;
        row.pop_grad_phi_sq = pop_phi_sq;
        row.ops = cumulative;
        row.elapsed_ms = ms_since(start);
        rec.rows.push_back(row);
      }

      p.w -= beta_w * avg_w;
      p.phi -= beta_phi * avg_phi;
      if (cfg.record_trajectory) rec.trajectory.push_back(p);

      if (!p.is_finite()) {
        rec.reason = Termination::kDiverged;
        rec.terminated_at = k;
        std::ostringstream msg;
        msg << "parameters became non-finite after update at iteration " << k;
        rec.diagnostic = msg.str();
        break;
      }
      if (cfg.enforce_operating_region && spec.has_value() &&
          !in_operating_region(*spec, p)) {
        rec.reason = Termination::kLeftRegion;
        rec.terminated_at = k;
        std::ostringstream msg;
        msg << "parameter norm " << p.joint_norm() << " left the operating region (radius "
            << spec->operating_radius << ") at iteration " << k;
        rec.diagnostic = msg.str();
        break;
      }
    } catch (const DivergenceError& e) {
      rec.reason = Termination::kDiverged;
      rec.terminated_at = k;
      rec.diagnostic = e.what();
      break;
    }
  }

  rec.final_params = p;
  rec.total_ops = cumulative;
  if (p.is_finite()) {
    try {
      std::tie(rec.final_pop_grad_w_sq, rec.final_pop_grad_phi_sq) =
          population_meta_grad_norms(eval_pool, p, inner);
      if (rec.reason == Termination::kCompleted && epsilon_target > 0.0 &&
          !rec.crossing.reached && rec.final_pop_grad_w_sq < epsilon_target &&
          rec.final_pop_grad_phi_sq < epsilon_target) {
        rec.crossing.reached = true;
        rec.crossing.iter = K;
        rec.crossing.ops = cumulative;
      }
    } catch (const DivergenceError& e) {
      if (rec.reason == Termination::kCompleted) {
        rec.reason = Termination::kDiverged;
        rec.terminated_at = K;
        rec.diagnostic = e.what();
      }
    }
  }
  rec.elapsed_ms = ms_since(start);
  return rec;
}

}  // namespace

RunRecord anil_run(const TaskSource& source, const OuterConfig& cfg,
                   const SplitParameters& init, const std::vector<TaskInstance>& eval_pool,
                   double epsilon_target) {
  return run_outer(source, cfg, init, eval_pool, epsilon_target, /*flatten=*/false);
}

RunRecord maml_run(const TaskSource& source, const OuterConfig& cfg, const Vector& init_z,
                   const std::vector<TaskInstance>& eval_pool, double epsilon_target) {
  TaskSource flat_source = source;
  if (source.frozen()) {
    std::vector<TaskInstance> pool;
    pool.reserve(source.pool().size());
    for (const TaskInstance& t : source.pool()) pool.push_back(flatten_for_full_adaptation(t));
    flat_source = source.spec().has_value() ? TaskSource::from_pool(std::move(pool), *source.spec())
                                            : TaskSource::from_pool(std::move(pool));
  }
  std::vector<TaskInstance> flat_eval;
  flat_eval.reserve(eval_pool.size());
  for (const TaskInstance& t : eval_pool) flat_eval.push_back(flatten_for_full_adaptation(t));
  SplitParameters init;
  init.w = init_z;
  init.phi = Vector(0);
  return run_outer(flat_source, cfg, init, flat_eval, epsilon_target, /*flatten=*/true);
}

}  // namespace anil
