#include "anil/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "anil/inner_loop.hpp"
#include "anil/io.hpp"
#include "anil/meta_gradient.hpp"

namespace anil {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kGradTolStronglyConvex = 1e-6;
constexpr double kGradTolNonconvex = 1e-5;
constexpr double kItersBand = 1.05;  // allowed relative increase in iters-to-target
constexpr double kOpsBand = 0.95;    // allowed relative decrease in ops-to-target

Experiment experiment_from_string(const std::string& s, const std::string& path) {
  if (s == "grad_check") return Experiment::kGradCheck;
  if (s == "contraction") return Experiment::kContraction;
  if (s == "smoothness_scaling") return Experiment::kSmoothnessScaling;
  if (s == "convergence_sweep") return Experiment::kConvergenceSweep;
  if (s == "complexity_compare") return Experiment::kComplexityCompare;
  throw ConfigError(path + ": unknown experiment: " + s);
}

Geometry geometry_from_string(const std::string& s, const std::string& path) {
  if (s == "strongly_convex") return Geometry::kStronglyConvex;
  if (s == "nonconvex") return Geometry::kNonconvex;
  throw ConfigError(path + ": unknown geometry: " + s);
}

StepsizeRule rule_from_string(const std::string& s, const std::string& path) {
  if (s == "manual") return StepsizeRule::kManual;
  if (s == "strongly_convex_schedule") return StepsizeRule::kStronglyConvexSchedule;
  if (s == "nonconvex_schedule") return StepsizeRule::kNonconvexSchedule;
  throw ConfigError(path + ": unknown stepsize rule: " + s);
}

AlphaRule alpha_rule_from_string(const std::string& s, const std::string& path) {
  if (s == "manual") return AlphaRule::kManual;
  if (s == "schedule") return AlphaRule::kSchedule;
  throw ConfigError(path + ": unknown alpha rule: " + s);
}

// Strict object reader: typed lookups, required/optional fields, and an
// unknown-field check on finish(). Errors carry the full field path.
class FieldReader {
 public:
  FieldReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) {
      throw ConfigError((path_.empty() ? std::string("config") : path_) +
                        ": expected an object");
    }
  }

  std::string full_path(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  double num(const char* key, double dflt) {
    const json* v = find(key);
    if (v == nullptr) return dflt;
    require(v->is_number(), key, "expected a number");
    return v->get<double>();
  }

  double num_req(const char* key) {
    const json* v = find(key);
    require(v != nullptr, key, "missing required field");
    require(v->is_number(), key, "expected a number");
    return v->get<double>();
  }

  int integer(const char* key, int dflt) {
    const json* v = find(key);
    if (v == nullptr) return dflt;
    require(v->is_number_integer(), key, "expected an integer");
    return v->get<int>();
  }

  Index index_req(const char* key) {
    const json* v = find(key);
    require(v != nullptr, key, "missing required field");
    require(v->is_number_integer(), key, "expected an integer");
    return v->get<Index>();
  }

  std::uint64_t uint(const char* key, std::uint64_t dflt) {
    const json* v = find(key);
    if (v == nullptr) return dflt;
    require(v->is_number_integer(), key, "expected a nonnegative integer");
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    const std::int64_t sv = v->get<std::int64_t>();
    require(sv >= 0, key, "expected a nonnegative integer");
    return static_cast<std::uint64_t>(sv);
  }

  bool boolean(const char* key, bool dflt) {
    const json* v = find(key);
    if (v == nullptr) return dflt;
    require(v->is_boolean(), key, "expected a boolean");
    return v->get<bool>();
  }

  std::string str_req(const char* key) {
    const json* v = find(key);
    require(v != nullptr, key, "missing required field");
    require(v->is_string(), key, "expected a string");
    return v->get<std::string>();
  }

  std::string str(const char* key, const std::string& dflt) {
    const json* v = find(key);
    if (v == nullptr) return dflt;
    require(v->is_string(), key, "expected a string");
    return v->get<std::string>();
  }

  std::vector<int> int_list(const char* key, std::vector<int> dflt) {
    const json* v = find(key);
    if (v == nullptr) return dflt;
    require(v->is_array(), key, "expected an array of integers");
    std::vector<int> out;
    for (const json& e : *v) {
      require(e.is_number_integer(), key, "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  const json* child(const char* key) {
    const json* v = find(key);
    if (v == nullptr) return nullptr;
    require(v->is_object(), key, "expected an object");
    return v;
  }

  void finish() {
    for (const auto& item : j_.items()) {
      if (std::find(used_.begin(), used_.end(), item.key()) == used_.end()) {
        throw ConfigError(full_path(item.key().c_str()) + ": unknown field");
      }
    }
  }

 private:
  const json* find(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.push_back(key);
    return &*it;
  }

  void require(bool ok, const char* key, const char* why) {
    if (!ok) throw ConfigError(full_path(key) + ": " + why);
  }

  const json& j_;
  std::string path_;
  std::vector<std::string> used_;
};

TaskFamilySpec parse_family(const json& j, const std::string& path) {
  FieldReader r(j, path);
  TaskFamilySpec s;
  s.geometry = geometry_from_string(r.str_req("geometry"), r.full_path("geometry"));
  s.mu = r.num_req("mu");
  s.smoothness_L = r.num_req("smoothness_L");
  s.lipschitz_M = r.num_req("lipschitz_M");
  s.n_w = r.index_req("n_w");
  s.n_phi = r.index_req("n_phi");
  s.rho = r.num("rho", s.rho);
  s.tau = r.num("tau", s.tau);
  s.seed = r.uint("seed", s.seed);
  s.nonconvexity_amplitude = r.num("nonconvexity_amplitude", s.nonconvexity_amplitude);
  s.operating_radius = r.num("operating_radius", s.operating_radius);
  r.finish();
  try {
    validate_spec(s);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return s;
}

OuterConfig parse_outer(const json& j, const std::string& path) {
  FieldReader r(j, path);
  OuterConfig o;
  o.beta_w = r.num("beta_w", o.beta_w);
  o.beta_phi = r.num("beta_phi", o.beta_phi);
  o.batch_size = r.integer("batch_size", o.batch_size);
  o.max_outer_iters = r.integer("max_outer_iters", o.max_outer_iters);
  o.seed = r.uint("seed", o.seed);
  o.stepsize_rule = rule_from_string(r.str("stepsize_rule", "manual"),
                                     r.full_path("stepsize_rule"));
  o.rule_scale_w = r.num("rule_scale_w", o.rule_scale_w);
  o.rule_scale_phi = r.num("rule_scale_phi", o.rule_scale_phi);
  o.eval_interval = r.integer("eval_interval", o.eval_interval);
  o.frozen_pool_size = r.integer("frozen_pool_size", o.frozen_pool_size);
  o.enforce_operating_region = r.boolean("enforce_operating_region", o.enforce_operating_region);
  o.record_trajectory = r.boolean("record_trajectory", o.record_trajectory);
  o.init_scale = r.num("init_scale", o.init_scale);
  if (const json* inner = r.child("inner")) {
    FieldReader ri(*inner, path + ".inner");
    o.inner.alpha = ri.num("alpha", o.inner.alpha);
    o.inner.num_steps = ri.integer("num_steps", o.inner.num_steps);
    o.inner.c_alpha = ri.num("c_alpha", o.inner.c_alpha);
    o.alpha_rule = alpha_rule_from_string(ri.str("alpha_rule", "manual"),
                                          ri.full_path("alpha_rule"));
    ri.finish();
  }
  r.finish();
  try {
    validate_outer(o);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return o;
}

void validate_experiment_fields(const ExperimentConfig& cfg) {
  check_config(cfg.num_tasks >= 1, "num_tasks must be at least 1");
  check_config(cfg.fd_step > 0.0, "fd_step must be positive");
  check_config(!cfg.check_depths.empty(), "check_depths must not be empty");
  for (int n : cfg.check_depths) check_config(n >= 0, "check_depths entries must be nonnegative");
  check_config(cfg.contraction_steps >= 1, "contraction_steps must be at least 1");
  check_config(!cfg.probe_depths.empty(), "probe_depths must not be empty");
  check_config(cfg.probe_pool_size >= 1, "probe_pool_size must be at least 1");
  check_config(cfg.probe_pairs >= 1, "probe_pairs must be at least 1");
  check_config(cfg.probe_pair_scale > 0.0, "probe_pair_scale must be positive");
  check_config(cfg.probe_alpha >= 0.0, "probe_alpha must be nonnegative");
  check_config(!cfg.n_sweep.empty(), "n_sweep must not be empty");
  for (std::size_t i = 0; i < cfg.n_sweep.size(); ++i) {
    check_config(cfg.n_sweep[i] >= 0, "n_sweep entries must be nonnegative");
    if (i > 0) check_config(cfg.n_sweep[i] > cfg.n_sweep[i - 1], "n_sweep must be strictly increasing");
  }
  check_config(cfg.epsilon_target >= 0.0, "epsilon_target must be nonnegative");
  check_config(cfg.eval_pool_size >= 1, "eval_pool_size must be at least 1");
}

std::string csv_int(std::int64_t v) { return std::to_string(v); }

// One telemetry CSV per optimization run; these carry wall-clock timings and
// are excluded from the byte-replay contract.
std::string telemetry_csv(const RunRecord& rec) {
  std::string csv =
      "iter,grad_w_sq,grad_phi_sq,pop_grad_w_sq,pop_grad_phi_sq,"
      "grad_entries,second_order_entries,elapsed_ms\n";
  for (const TelemetryRow& r : rec.rows) {
    csv += csv_int(r.iter) + "," + format_double(r.batch_grad_w_sq) + "," +
           format_double(r.batch_grad_phi_sq) + "," + format_double(r.pop_grad_w_sq) + "," +
           format_double(r.pop_grad_phi_sq) + "," + csv_int(r.ops.gradient_total()) + "," +
           csv_int(r.ops.second_order_total()) + "," + format_double(r.elapsed_ms) + "\n";
  }
  return csv;
}

SplitParameters draw_unit_point(Index n_w, Index n_phi, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n_w + n_phi);
  double norm = 0.0;
  do {
    for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    norm = z.norm();
  } while (norm < 1e-12);
  z /= norm;
  SplitParameters p;
  p.w = z.head(n_w);
  p.phi = z.tail(n_phi);
  return p;
}

ExperimentOutputs run_grad_check(const ExperimentConfig& cfg) {
  const TaskFamilySpec& fam = cfg.family;
  const std::vector<TaskInstance> tasks = sample_task_family(fam, cfg.num_tasks);
  const std::optional<TaskFamilySpec> spec(fam);
  const double tol = fam.geometry == Geometry::kStronglyConvex ? kGradTolStronglyConvex
                                                               : kGradTolNonconvex;
  std::mt19937_64 point_rng = make_rng(cfg.outer.seed, RngStream::kPoints);

  ExperimentOutputs out;
  out.results_csv = "geometry,n_steps,tasks,max_rel_err_w,max_rel_err_phi,tolerance,pass\n";
  std::ostringstream summary;
  summary << "experiment: grad_check\n"
          << "geometry: " << to_string(fam.geometry) << "\n";
  bool all_pass = true;
  for (int n_steps : cfg.check_depths) {
    OuterConfig oc = cfg.outer;
    oc.inner.num_steps = n_steps;
    const InnerLoopConfig icfg = resolve_inner(oc, spec);
    double max_w = 0.0;
    double max_phi = 0.0;
    for (const TaskInstance& t : tasks) {
      const SplitParameters p = draw_unit_point(t.n_w(), t.n_phi(), point_rng);
      const InnerLoopTrace trace = run_inner_loop(t, p, icfg);
      const MetaGradient mg = meta_gradient(t, trace);
      const MetaGradient fd = fd_meta_grad(t, p, icfg, cfg.fd_step);
      max_w = std::max(max_w, relative_error(mg.grad_w, fd.grad_w));
      max_phi = std::max(max_phi, relative_error(mg.grad_phi, fd.grad_phi));
    }
    const bool pass = max_w <= tol && max_phi <= tol;
    all_pass = all_pass && pass;
    out.results_csv += std::string(to_string(fam.geometry)) + "," + csv_int(n_steps) + "," +
                       csv_int(cfg.num_tasks) + "," + format_double(max_w) + "," +
                       format_double(max_phi) + "," + format_double(tol) + "," +
                       (pass ? "1" : "0") + "\n";
    summary << "depth " << n_steps << ": max_rel_err_w=" << format_double(max_w)
            << " max_rel_err_phi=" << format_double(max_phi) << " tol=" << format_double(tol)
            << (pass ? " pass" : " FAIL") << "\n";
  }
  out.exit_code = all_pass ? kExitPass : kExitTrendFail;
  summary << "result: " << (all_pass ? "pass" : "fail") << "\n";
  out.summary = summary.str();
  return out;
}

ExperimentOutputs run_contraction(const ExperimentConfig& cfg) {
  const TaskFamilySpec& fam = cfg.family;
  const std::vector<TaskInstance> tasks = sample_task_family(fam, cfg.num_tasks);
  const std::optional<TaskFamilySpec> spec(fam);
  OuterConfig oc = cfg.outer;
  oc.inner.num_steps = cfg.contraction_steps;
  const InnerLoopConfig icfg = resolve_inner(oc, spec);
  std::mt19937_64 point_rng = make_rng(cfg.outer.seed, RngStream::kPoints);

  ExperimentOutputs out;
  out.results_csv = "task_id,q,steps,violations,max_gap\n";
  std::ostringstream summary;
  summary << "experiment: contraction\n"
          << "geometry: " << to_string(fam.geometry) << "\n";
  int total_violations = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();
  for (const TaskInstance& t : tasks) {
    const SplitParameters p1 = draw_unit_point(t.n_w(), t.n_phi(), point_rng);
    const SplitParameters p2 = draw_unit_point(t.n_w(), t.n_phi(), point_rng);
    const ContractionReport rep = contraction_check(t, p1, p2, icfg);
    total_violations += rep.num_violations;
    worst_gap = std::max(worst_gap, rep.max_gap);
    out.results_csv += csv_int(t.task_id) + "," + format_double(rep.q) + "," +
                       csv_int(cfg.contraction_steps) + "," + csv_int(rep.num_violations) + "," +
                       format_double(rep.max_gap) + "\n";
  }
  out.exit_code = total_violations == 0 ? kExitPass : kExitTrendFail;
  summary << "tasks: " << cfg.num_tasks << "\n"
          << "steps per task: " << cfg.contraction_steps << "\n"
          << "total violations: " << total_violations << "\n"
          << "max gap (lhs - bound): " << format_double(worst_gap) << "\n"
          << "result: " << (total_violations == 0 ? "pass" : "fail") << "\n";
  out.summary = summary.str();
  return out;
}

ExperimentOutputs run_smoothness(const ExperimentConfig& cfg) {
  ScalingConfig sc;
  sc.n_values = cfg.probe_depths;
  sc.pool_size = cfg.probe_pool_size;
  sc.num_pairs = cfg.probe_pairs;
  sc.pair_scale = cfg.probe_pair_scale;
  sc.seed = cfg.outer.seed;
  sc.alpha = cfg.probe_alpha;
  const ScalingReport rep = smoothness_scaling_report(cfg.family, sc);

  ExperimentOutputs out;
  out.results_csv = "block,N,estimate,theory_bound,pass\n";
  for (const ScalingRow& row : rep.rows) {
    out.results_csv += std::string(to_string(row.block)) + "," + csv_int(row.n_steps) + "," +
                       format_double(row.estimate) + "," + format_double(row.theory_bound) + "," +
                       (row.pass ? "1" : "0") + "\n";
  }
  std::ostringstream summary;
  summary << "experiment: smoothness_scaling\n"
          << "geometry: " << to_string(rep.geometry) << "\n"
          << "alpha: " << format_double(rep.alpha) << "\n"
          << "bounds: " << (rep.bounds_ok ? "pass" : "FAIL") << "\n";
  if (rep.geometry == Geometry::kStronglyConvex) {
    summary << "adapted-block decay factor: " << format_double(rep.ww_decay_factor)
            << " (limit " << format_double(rep.ww_decay_limit) << ") "
            << (rep.ww_decay_ok ? "pass" : "FAIL") << "\n"
            << "shared-block plateau spread: " << format_double(rep.phiphi_spread)
            << " (limit " << format_double(rep.phiphi_spread_limit) << ") "
            << (rep.phiphi_plateau_ok ? "pass" : "FAIL") << "\n";
  } else {
    summary << "min growth ratio: " << format_double(rep.min_growth_ratio) << " (threshold "
            << format_double(rep.growth_threshold) << ") " << (rep.growth_ok ? "pass" : "FAIL")
            << "\n";
  }
  summary << "result: " << (rep.all_ok ? "pass" : "fail") << "\n";
  out.exit_code = rep.all_ok ? kExitPass : kExitTrendFail;
  out.summary = summary.str();
  return out;
}

struct SweepEntry {
  int n_steps = 0;
  RunRecord rec;
};

ExperimentOutputs run_convergence_sweep(const ExperimentConfig& cfg) {
  check_config(cfg.epsilon_target > 0.0, "convergence_sweep requires a positive epsilon_target");
  const TaskFamilySpec& fam = cfg.family;
  const std::vector<TaskInstance> eval_pool = sample_eval_pool(fam, cfg.eval_pool_size);
  const SplitParameters init =
      draw_initial_parameters(fam.n_w, fam.n_phi, cfg.outer.seed, cfg.outer.init_scale);
  const TaskSource source = TaskSource::from_family(fam);

  ExperimentOutputs out;
  out.results_csv =
      "n_steps,reached,iters_to_target,grad_entries_to_target,"
      "second_order_entries_to_target,final_pop_grad_w_sq,final_pop_grad_phi_sq,termination\n";
  std::ostringstream summary;
  summary << "experiment: convergence_sweep\n"
          << "geometry: " << to_string(fam.geometry) << "\n"
          << "epsilon_target: " << format_double(cfg.epsilon_target) << "\n"
          << "eval_pool_hash: " << content_hash_hex(pool_to_json(eval_pool).dump()) << "\n";

  std::vector<SweepEntry> entries;
  bool any_abnormal = false;
  for (int n : cfg.n_sweep) {
    OuterConfig oc = cfg.outer;
    oc.inner.num_steps = n;
    SweepEntry e;
    e.n_steps = n;
    e.rec = anil_run(source, oc, init, eval_pool, cfg.epsilon_target);
    const RunRecord& rec = e.rec;
    any_abnormal = any_abnormal || rec.reason != Termination::kCompleted;
    const bool reached = rec.crossing.reached;
    out.results_csv += csv_int(n) + "," + (reached ? "1" : "0") + "," +
                       csv_int(reached ? rec.crossing.iter : -1) + "," +
                       csv_int(reached ? rec.crossing.ops.gradient_total() : -1) + "," +
                       csv_int(reached ? rec.crossing.ops.second_order_total() : -1) + "," +
                       format_double(rec.final_pop_grad_w_sq) + "," +
                       format_double(rec.final_pop_grad_phi_sq) + "," + to_string(rec.reason) +
                       "\n";
    summary << "depth " << n << ": " << to_string(rec.reason);
    if (reached) {
      summary << ", target at iter " << rec.crossing.iter << " ("
              << rec.crossing.ops.second_order_total() << " second-order entries)";
    } else {
      summary << ", target not reached";
    }
    summary << ", beta_w=" << format_double(rec.beta_w)
            << ", alpha=" << format_double(rec.alpha) << "\n";
    out.extra_files.emplace_back("runs/sweep_n" + std::to_string(n) + ".csv",
                                 telemetry_csv(rec));
    entries.push_back(std::move(e));
  }

  if (any_abnormal) {
    summary << "note: at least one depth terminated abnormally (recorded per depth)\n";
  }

  bool all_reached = !any_abnormal;
  for (const SweepEntry& e : entries) all_reached = all_reached && e.rec.crossing.reached;
  bool trend_ok = all_reached;
  if (!all_reached) {
    summary << "check: every depth completes and reaches the target: FAIL\n";
  }

  if (all_reached && fam.geometry == Geometry::kStronglyConvex) {
    bool non_increasing = true;
    for (std::size_t i = 1; i < entries.size(); ++i) {
      non_increasing = non_increasing &&
                       entries[i].rec.crossing.iter <=
                           static_cast<double>(entries[i - 1].rec.crossing.iter) * kItersBand;
    }
    summary << "check: iters-to-target non-increasing (5% band): "
            << (non_increasing ? "pass" : "FAIL") << "\n";

    bool saturation = true;
    if (entries.size() >= 4) {
      const auto iters = [&](std::size_t i) { return entries[i].rec.crossing.iter; };
      const int early_gain = iters(0) - iters(1);
      const int late_gain = iters(entries.size() - 2) - iters(entries.size() - 1);
      saturation = early_gain > late_gain;
      summary << "check: early depth gain (" << early_gain << ") exceeds late depth gain ("
              << late_gain << "): " << (saturation ? "pass" : "FAIL") << "\n";
    }

    bool interior = true;
    if (entries.size() >= 3) {
      std::size_t argmin = 0;
      for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].rec.crossing.ops.second_order_total() <
            entries[argmin].rec.crossing.ops.second_order_total()) {
          argmin = i;
        }
      }
      interior = argmin != 0 && argmin != entries.size() - 1;
      summary << "check: second-order ops minimized at interior depth (argmin n_steps="
              << entries[argmin].n_steps << "): " << (interior ? "pass" : "FAIL") << "\n";
    }
    trend_ok = non_increasing && saturation && interior;
  } else if (all_reached) {
    bool non_decreasing = true;
    for (std::size_t i = 1; i < entries.size(); ++i) {
      non_decreasing =
          non_decreasing &&
          static_cast<double>(entries[i].rec.crossing.ops.second_order_total()) >=
              static_cast<double>(entries[i - 1].rec.crossing.ops.second_order_total()) * kOpsBand;
    }
    summary << "check: second-order ops-to-target non-decreasing (5% band): "
            << (non_decreasing ? "pass" : "FAIL") << "\n";
    trend_ok = non_decreasing;
  }

  out.exit_code = trend_ok ? kExitPass : kExitTrendFail;
  summary << "result: " << (trend_ok ? "pass" : "fail") << "\n";
  out.summary = summary.str();
  return out;
}

ExperimentOutputs run_complexity_compare(const ExperimentConfig& cfg) {
  const TaskFamilySpec& fam = cfg.family;
  const std::vector<TaskInstance> eval_pool = sample_eval_pool(fam, cfg.eval_pool_size);
  const SplitParameters init =
      draw_initial_parameters(fam.n_w, fam.n_phi, cfg.outer.seed, cfg.outer.init_scale);
  const TaskSource source = TaskSource::from_family(fam);

  const RunRecord split_rec = anil_run(source, cfg.outer, init, eval_pool, cfg.epsilon_target);
  const RunRecord full_rec =
      maml_run(source, cfg.outer, init.concat(), eval_pool, cfg.epsilon_target);

  const std::int64_t B = cfg.outer.batch_size;
  const std::int64_t K = cfg.outer.max_outer_iters;
  const std::int64_t N = split_rec.num_steps;
  const std::int64_t n_w = fam.n_w;
  const std::int64_t n_phi = fam.n_phi;
  const std::int64_t expected_split = B * K * N * (n_w * n_w + n_w * n_phi);
  const std::int64_t expected_full = B * K * N * (n_w + n_phi) * (n_w + n_phi);

  ExperimentOutputs out;
  out.results_csv =
      "method,n_steps,batch_size,iters,grad_entries,hessian_entries,mixed_entries,"
      "second_order_total,expected_second_order,final_pop_grad_w_sq,final_pop_grad_phi_sq\n";
  const auto row = [&](const char* method, const RunRecord& rec, std::int64_t expected) {
    out.results_csv += std::string(method) + "," + csv_int(N) + "," + csv_int(B) + "," +
                       csv_int(K) + "," + csv_int(rec.total_ops.gradient_total()) + "," +
                       csv_int(rec.total_ops.hessian_entries) + "," +
                       csv_int(rec.total_ops.mixed_entries) + "," +
                       csv_int(rec.total_ops.second_order_total()) + "," + csv_int(expected) +
                       "," + format_double(rec.final_pop_grad_w_sq) + "," +
                       format_double(rec.final_pop_grad_phi_sq) + "\n";
  };
  row("anil", split_rec, expected_split);
  row("maml", full_rec, expected_full);
  out.extra_files.emplace_back("runs/compare_anil.csv", telemetry_csv(split_rec));
  out.extra_files.emplace_back("runs/compare_maml.csv", telemetry_csv(full_rec));

  const bool completed = split_rec.reason == Termination::kCompleted &&
                         full_rec.reason == Termination::kCompleted;
  const bool counts_ok = split_rec.total_ops.second_order_total() == expected_split &&
                         full_rec.total_ops.second_order_total() == expected_full;
  std::ostringstream summary;
  summary << "experiment: complexity_compare\n"
          << "geometry: " << to_string(fam.geometry) << "\n"
          << "eval_pool_hash: " << content_hash_hex(pool_to_json(eval_pool).dump()) << "\n"
          << "batch_size=" << B << " iters=" << K << " n_steps=" << N << " n_w=" << n_w
          << " n_phi=" << n_phi << "\n"
          << "split adaptation second-order entries: "
          << split_rec.total_ops.second_order_total() << " (expected " << expected_split << ")\n"
          << "full adaptation second-order entries: " << full_rec.total_ops.second_order_total()
          << " (expected " << expected_full << ")\n";
  if (!completed) {
    summary << "result: divergence\n";
    out.exit_code = kExitDivergence;
  } else {
    summary << "result: " << (counts_ok ? "pass" : "fail") << "\n";
    out.exit_code = counts_ok ? kExitPass : kExitTrendFail;
  }
  out.summary = summary.str();
  return out;
}

}  // namespace

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::kGradCheck: return "grad_check";
    case Experiment::kContraction: return "contraction";
    case Experiment::kSmoothnessScaling: return "smoothness_scaling";
    case Experiment::kConvergenceSweep: return "convergence_sweep";
    case Experiment::kComplexityCompare: return "complexity_compare";
  }
  return "unknown";
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  FieldReader r(j, "");
  ExperimentConfig cfg;
  cfg.experiment = experiment_from_string(r.str_req("experiment"), "experiment");
  cfg.output_dir = r.str("output_dir", cfg.output_dir);
  const json* fam = r.child("family");
  if (fam == nullptr) throw ConfigError("family: missing required field");
  cfg.family = parse_family(*fam, "family");
  if (const json* outer = r.child("outer")) cfg.outer = parse_outer(*outer, "outer");
  cfg.num_tasks = r.integer("num_tasks", cfg.num_tasks);
  cfg.fd_step = r.num("fd_step", cfg.fd_step);
  cfg.check_depths = r.int_list("check_depths", cfg.check_depths);
  cfg.contraction_steps = r.integer("contraction_steps", cfg.contraction_steps);
  cfg.probe_depths = r.int_list("probe_depths", cfg.probe_depths);
  cfg.probe_pool_size = r.integer("probe_pool_size", cfg.probe_pool_size);
  cfg.probe_pairs = r.integer("probe_pairs", cfg.probe_pairs);
  cfg.probe_pair_scale = r.num("probe_pair_scale", cfg.probe_pair_scale);
  cfg.probe_alpha = r.num("probe_alpha", cfg.probe_alpha);
  cfg.n_sweep = r.int_list("n_sweep", cfg.n_sweep);
  cfg.epsilon_target = r.num("epsilon_target", cfg.epsilon_target);
  cfg.eval_pool_size = r.integer("eval_pool_size", cfg.eval_pool_size);
  r.finish();
  validate_experiment_fields(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cannot parse config file ") + path + ": " + e.what());
  }
  return parse_config(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = to_string(cfg.experiment);
  j["output_dir"] = cfg.output_dir;
  j["family"] = spec_to_json(cfg.family);
  json outer;
  outer["beta_w"] = cfg.outer.beta_w;
  outer["beta_phi"] = cfg.outer.beta_phi;
  outer["batch_size"] = cfg.outer.batch_size;
  outer["max_outer_iters"] = cfg.outer.max_outer_iters;
  outer["seed"] = cfg.outer.seed;
  outer["stepsize_rule"] = to_string(cfg.outer.stepsize_rule);
  outer["rule_scale_w"] = cfg.outer.rule_scale_w;
  outer["rule_scale_phi"] = cfg.outer.rule_scale_phi;
  outer["eval_interval"] = cfg.outer.eval_interval;
  outer["frozen_pool_size"] = cfg.outer.frozen_pool_size;
  outer["enforce_operating_region"] = cfg.outer.enforce_operating_region;
  outer["record_trajectory"] = cfg.outer.record_trajectory;
  outer["init_scale"] = cfg.outer.init_scale;
  json inner;
  inner["alpha"] = cfg.outer.inner.alpha;
  inner["num_steps"] = cfg.outer.inner.num_steps;
  inner["c_alpha"] = cfg.outer.inner.c_alpha;
  inner["alpha_rule"] = to_string(cfg.outer.alpha_rule);
  outer["inner"] = std::move(inner);
  j["outer"] = std::move(outer);
  j["num_tasks"] = cfg.num_tasks;
  j["fd_step"] = cfg.fd_step;
  j["check_depths"] = cfg.check_depths;
  j["contraction_steps"] = cfg.contraction_steps;
  j["probe_depths"] = cfg.probe_depths;
  j["probe_pool_size"] = cfg.probe_pool_size;
  j["probe_pairs"] = cfg.probe_pairs;
  j["probe_pair_scale"] = cfg.probe_pair_scale;
  j["probe_alpha"] = cfg.probe_alpha;
  j["n_sweep"] = cfg.n_sweep;
  j["epsilon_target"] = cfg.epsilon_target;
  j["eval_pool_size"] = cfg.eval_pool_size;
  return j;
}

ExperimentOutputs compute_experiment(const ExperimentConfig& cfg) {
  validate_spec(cfg.family);
  validate_outer(cfg.outer);
  validate_experiment_fields(cfg);
  switch (cfg.experiment) {
    case Experiment::kGradCheck: return run_grad_check(cfg);
    case Experiment::kContraction: return run_contraction(cfg);
    case Experiment::kSmoothnessScaling: return run_smoothness(cfg);
    case Experiment::kConvergenceSweep: return run_convergence_sweep(cfg);
    case Experiment::kComplexityCompare: return run_complexity_compare(cfg);
  }
  throw ConfigError("unknown experiment");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.output_dir = cfg.output_dir;
  ExperimentOutputs out;
  try {
    out = compute_experiment(cfg);
  } catch (const ConfigError& e) {
    result.exit_code = kExitConfigError;
    result.summary = std::string("config error: ") + e.what() + "\n";
    return result;
  } catch (const DivergenceError& e) {
    result.exit_code = kExitDivergence;
    result.summary = std::string("divergence: ") + e.what() + "\n";
    return result;
  }

  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  write_text_file((dir / "results.csv").string(), out.results_csv);
  write_text_file((dir / "summary.txt").string(), out.summary);
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["experiment"] = to_string(cfg.experiment);
  manifest["config"] = config_to_json(cfg);
  manifest["results_file"] = "results.csv";
  manifest["results_hash"] = content_hash_hex(out.results_csv);
  write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  for (const auto& [rel_path, content] : out.extra_files) {
    const fs::path p = dir / rel_path;
    fs::create_directories(p.parent_path());
    write_text_file(p.string(), content);
  }
  result.exit_code = out.exit_code;
  result.summary = out.summary;
  return result;
}

ReplayReport replay_from_manifest(const std::string& manifest_path) {
  ReplayReport rep;
  try {
    const json manifest = json::parse(read_text_file(manifest_path));
    const int version = manifest.at("format_version").get<int>();
    check_config(version == kFormatVersion, "unsupported manifest format_version");
    const ExperimentConfig cfg = parse_config(manifest.at("config"));
    const std::string recorded_hash = manifest.at("results_hash").get<std::string>();
    const std::string results_file = manifest.value("results_file", "results.csv");
    const fs::path original_path = fs::path(manifest_path).parent_path() / results_file;
    const std::string original = read_text_file(original_path.string());

    const ExperimentOutputs out = compute_experiment(cfg);
    const bool hash_ok = content_hash_hex(out.results_csv) == recorded_hash;
    const bool bytes_ok = out.results_csv == original;
    rep.identical = hash_ok && bytes_ok;
    std::ostringstream detail;
    detail << "recorded hash: " << recorded_hash << "\n"
           << "replayed hash: " << content_hash_hex(out.results_csv) << "\n"
           << "hash match: " << (hash_ok ? "yes" : "no") << "\n"
           << "bytes match: " << (bytes_ok ? "yes" : "no") << " (" << original.size()
           << " original bytes, " << out.results_csv.size() << " replayed bytes)\n";
    rep.detail = detail.str();
  } catch (const std::exception& e) {
    rep.identical = false;
    rep.detail = std::string("replay failed: ") + e.what() + "\n";
  }
  return rep;
}

ExperimentConfig default_config(Experiment e, Geometry g) {
  ExperimentConfig cfg;
  cfg.experiment = e;

  TaskFamilySpec fam;
  if (g == Geometry::kStronglyConvex) {
    fam.geometry = Geometry::kStronglyConvex;
    fam.mu = 0.5;
    fam.smoothness_L = 1.0;
    fam.lipschitz_M = 100.0;
    fam.rho = 0.0;
    fam.tau = 0.0;
    fam.n_w = 4;
    fam.n_phi = 8;
    fam.seed = 20240901;
    fam.nonconvexity_amplitude = 0.0;
  } else {
    fam.geometry = Geometry::kNonconvex;
    fam.mu = 0.0;
    fam.smoothness_L = 1.0;
    fam.lipschitz_M = 100.0;
    fam.nonconvexity_amplitude = 0.4;
    fam.rho = 0.4;
    fam.tau = 0.4;
    fam.n_w = 4;
    fam.n_phi = 8;
    fam.seed = 20240902;
  }
  cfg.family = fam;

  cfg.outer.seed = 7;
  cfg.outer.inner.alpha = 0.1;
  cfg.outer.inner.num_steps = 3;

  switch (e) {
    case Experiment::kGradCheck:
      cfg.num_tasks = 100;
      cfg.check_depths = {0, 1, 2, 5, 10};
      cfg.fd_step = 1e-5;
      // Derivative exactness does not need the convergence-guaranteed regime, so
      // admit alpha = 0.1 at the deepest nonconvex check depth (cap c_alpha/N).
      if (g == Geometry::kNonconvex) cfg.outer.inner.c_alpha = 1.0;
      break;
    case Experiment::kContraction:
      cfg.num_tasks = 100;
      cfg.contraction_steps = 10;
      cfg.outer.inner.alpha = 0.5;  // q = 1 - 2 alpha mu + alpha^2 L^2 = 0.75
      break;
    case Experiment::kSmoothnessScaling:
      cfg.probe_depths = {1, 2, 3, 5, 7, 10};
      cfg.probe_pool_size = 32;
      cfg.probe_pairs = 64;
      cfg.probe_pair_scale = 1e-2;
      cfg.probe_alpha = g == Geometry::kStronglyConvex ? 0.0 : 0.35;
      if (g == Geometry::kNonconvex) {
        // Stronger sinusoidal term keeps probe pairs inside the expanding
        // region longer, making the depth-driven growth of the sensitivity
        // estimates stand out well clear of the measurement's pool averaging.
        cfg.family.nonconvexity_amplitude = 0.52;
        cfg.family.rho = 0.52;
        cfg.family.tau = 0.52;
      }
      break;
    case Experiment::kConvergenceSweep:
      cfg.eval_pool_size = 256;
      cfg.outer.batch_size = 32;
      cfg.outer.eval_interval = 1;
      cfg.outer.init_scale = 2.0;
      if (g == Geometry::kStronglyConvex) {
        cfg.n_sweep = {1, 3, 5, 7, 10};
        cfg.epsilon_target = 1e-3;
        cfg.outer.max_outer_iters = 2000;
        cfg.outer.stepsize_rule = StepsizeRule::kStronglyConvexSchedule;
        // Shared-block steps large enough that its crossing sets a fast
        // floor; adapted-block steps small enough that depth-1 runs are
        // adapted-block-limited. Depth then buys a steep iteration cliff and
        // the second-order cost is minimized at an interior depth.
        cfg.outer.rule_scale_w = 0.1;
        cfg.outer.rule_scale_phi = 0.6;
        cfg.outer.alpha_rule = AlphaRule::kSchedule;
      } else {
        cfg.n_sweep = {1, 2, 5, 10};
        cfg.epsilon_target = 1e-3;
        cfg.outer.max_outer_iters = 2000;
        cfg.outer.stepsize_rule = StepsizeRule::kNonconvexSchedule;
        cfg.outer.rule_scale_w = 0.5;
        cfg.outer.rule_scale_phi = 0.5;
        cfg.outer.alpha_rule = AlphaRule::kSchedule;
        cfg.outer.inner.c_alpha = 0.5;
      }
      break;
    case Experiment::kComplexityCompare:
      cfg.eval_pool_size = 64;
      cfg.outer.batch_size = 8;
      cfg.outer.max_outer_iters = 100;
      cfg.outer.inner.num_steps = 3;
      cfg.outer.beta_w = 0.05;
      cfg.outer.beta_phi = 0.05;
      cfg.outer.eval_interval = 10;
      break;
  }
  return cfg;
}

}  // namespace anil
