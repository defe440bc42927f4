#include "anil/inner_loop.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace anil {
namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

void validate_inner(const InnerLoopConfig& cfg) {
  check_config(cfg.alpha > 0.0, "alpha must be positive");
  check_config(cfg.num_steps >= 0, "num_steps must be nonnegative");
  check_config(cfg.c_alpha >= 0.0, "c_alpha must be nonnegative");
}

void validate_inner_for_family(const InnerLoopConfig& cfg, const TaskFamilySpec& spec) {
  validate_inner(cfg);
  if (spec.geometry != Geometry::kNonconvex) return;
  const double c_alpha = cfg.c_alpha > 0.0 ? cfg.c_alpha : 0.5 / spec.smoothness_L;
  const double cap = c_alpha / std::max(cfg.num_steps, 1);
  check_config(cfg.alpha <= cap * (1.0 + 1e-12),
               "alpha exceeds the nonconvex stepsize cap c_alpha/num_steps (alpha=" +
                   num(cfg.alpha) + ", cap=" + num(cap) +
                   "); raise c_alpha to run outside the guaranteed regime");
}

double scheduled_inner_stepsize(const TaskFamilySpec& spec, const InnerLoopConfig& cfg) {
  if (spec.geometry == Geometry::kStronglyConvex)
    return spec.mu / (spec.smoothness_L * spec.smoothness_L);
  const double c_alpha = cfg.c_alpha > 0.0 ? cfg.c_alpha : 0.5 / spec.smoothness_L;
  return c_alpha / std::max(cfg.num_steps, 1);
}

Vector inner_step(const TaskInstance& t, const Vector& w, const Vector& phi, double alpha) {
  return w - alpha * t.inner.grad_w(w, phi);
}

InnerLoopTrace run_inner_loop(const TaskInstance& t, const SplitParameters& p,
                              const InnerLoopConfig& cfg) {
  validate_inner(cfg);
  check_dims(p.w.size() == t.n_w() && p.phi.size() == t.n_phi(),
             "run_inner_loop: parameter dimensions do not match task");
  check_dims(p.is_finite(), "run_inner_loop: non-finite starting point");

  InnerLoopTrace trace;
  trace.task_id = t.task_id;
  trace.phi_snapshot = p.phi;
  trace.config = cfg;
  trace.iterates.reserve(static_cast<std::size_t>(cfg.num_steps) + 1);
  trace.iterates.push_back(p.w);
  for (int m = 0; m < cfg.num_steps; ++m) {
    Vector next = inner_step(t, trace.iterates.back(), p.phi, cfg.alpha);
    trace.ops.grad_w_entries += t.n_w();
    if (!next.allFinite())
      throw DivergenceError(m, "adaptation diverged: non-finite iterate after step " +
                                   std::to_string(m) + " of task " +
                                   std::to_string(t.task_id));
    trace.iterates.push_back(std::move(next));
  }
  return trace;
}

double replay_max_deviation(const TaskInstance& t, const InnerLoopTrace& trace) {
  double worst = 0.0;
  for (std::size_t m = 0; m + 1 < trace.iterates.size(); ++m) {
    Vector redo = inner_step(t, trace.iterates[m], trace.phi_snapshot, trace.config.alpha);
    worst = std::max(worst, (redo - trace.iterates[m + 1]).cwiseAbs().maxCoeff());
  }
  return worst;
}

ContractionReport contraction_check(const TaskInstance& t, const SplitParameters& p1,
                                    const SplitParameters& p2, const InnerLoopConfig& cfg) {
  check_config(t.geometry == Geometry::kStronglyConvex,
               "contraction_check requires strongly_convex geometry");
  const double alpha = cfg.alpha;
  const double mu = t.mu;
  const double L = t.smoothness_L;
  const double q = 1.0 - 2.0 * alpha * mu + alpha * alpha * L * L;
  check_config(q > 0.0, "contraction precondition violated: 1 - 2*alpha*mu + alpha^2*L^2 = " +
                            num(q) + " must be positive");
  check_config(q < 1.0, "no contraction: 1 - 2*alpha*mu + alpha^2*L^2 = " + num(q) +
                            " must be below 1");

  InnerLoopTrace t1 = run_inner_loop(t, p1, cfg);
  InnerLoopTrace t2 = run_inner_loop(t, p2, cfg);
  const double dw = (p1.w - p2.w).norm();
  const double dphi = (p1.phi - p2.phi).norm();
  const double phi_term = dphi > 0.0 ? alpha * L * dphi / (1.0 - std::sqrt(q)) : 0.0;

  ContractionReport report;
  report.q = q;
  report.max_gap = -std::numeric_limits<double>::infinity();
  for (int step = 0; step <= cfg.num_steps; ++step) {
    ContractionStep row;
    row.t = step;
    row.lhs = (t1.iterates[static_cast<std::size_t>(step)] -
               t2.iterates[static_cast<std::size_t>(step)])
                  .norm();
    row.bound = std::pow(q, 0.5 * step) * dw + phi_term;
    row.violated = row.lhs > row.bound + 1e-9 * std::max(1.0, row.bound);
    report.max_gap = std::max(report.max_gap, row.lhs - row.bound);
    if (row.violated) ++report.num_violations;
    report.steps.push_back(row);
  }
  return report;
}

}  // namespace anil
