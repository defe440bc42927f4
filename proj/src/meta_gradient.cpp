#include "anil/meta_gradient.hpp"

#include <algorithm>
#include <cmath>

namespace anil {
namespace {

void check_trace(const TaskInstance& t, const InnerLoopTrace& trace) {
  check_dims(trace.task_id == t.task_id, "meta_gradient: trace belongs to a different task");
  check_dims(!trace.iterates.empty() &&
                 trace.iterates.size() == static_cast<std::size_t>(trace.config.num_steps) + 1,
             "meta_gradient: trace length inconsistent with its num_steps");
  check_dims(trace.iterates.front().size() == t.n_w() && trace.phi_snapshot.size() == t.n_phi(),
             "meta_gradient: trace dimensions do not match task");
}

// Backward sweep shared by all variants. Starting from the outer gradient at
// the adapted point, walks the trace from step N-1 down to 0, accumulating the
// mixed-partial terms (when phi_acc is given) before applying each
// (I - alpha H_m) factor.
Vector backward_sweep(const TaskInstance& t, const InnerLoopTrace& trace, Vector v,
                      Vector* phi_acc, OpCount& ops) {
  const double alpha = trace.config.alpha;
  const Vector& phi = trace.phi_snapshot;
  for (int m = trace.config.num_steps - 1; m >= 0; --m) {
    const Vector& wm = trace.iterates[static_cast<std::size_t>(m)];
    if (phi_acc != nullptr) {
      phi_acc->noalias() += t.inner.mixed(wm, phi) * v;
      ops.mixed_entries += t.n_phi() * t.n_w();
    }
    Matrix h = t.inner.hessian_w(wm);
    ops.hessian_entries += t.n_w() * t.n_w();
    v -= alpha * (h * v);
  }
  return v;
}

}  // namespace

MetaGradient meta_gradient(const TaskInstance& t, const InnerLoopTrace& trace) {
  check_trace(t, trace);
  const SplitParameters adapted{trace.final_w(), trace.phi_snapshot};

  MetaGradient mg;
  Vector g_d = outer_loss_grad_w(t, adapted);
  mg.ops.grad_w_entries += t.n_w();
  Vector phi_acc = Vector::Zero(t.n_phi());
  mg.grad_w = backward_sweep(t, trace, std::move(g_d), &phi_acc, mg.ops);
  mg.grad_phi = -trace.config.alpha * phi_acc + outer_loss_grad_phi(t, adapted);
  mg.ops.grad_phi_entries += t.n_phi();
  return mg;
}

Vector meta_grad_w(const TaskInstance& t, const InnerLoopTrace& trace, OpCount* ops) {
  check_trace(t, trace);
  OpCount local;
  Vector g_d = outer_loss_grad_w(t, {trace.final_w(), trace.phi_snapshot});
  local.grad_w_entries += t.n_w();
  Vector g = backward_sweep(t, trace, std::move(g_d), nullptr, local);
  if (ops != nullptr) *ops += local;
  return g;
}

Vector meta_grad_phi(const TaskInstance& t, const InnerLoopTrace& trace, OpCount* ops) {
  check_trace(t, trace);
  OpCount local;
  const SplitParameters adapted{trace.final_w(), trace.phi_snapshot};
  Vector g_d = outer_loss_grad_w(t, adapted);
  local.grad_w_entries += t.n_w();
  Vector phi_acc = Vector::Zero(t.n_phi());
  backward_sweep(t, trace, std::move(g_d), &phi_acc, local);
  Vector g = -trace.config.alpha * phi_acc + outer_loss_grad_phi(t, adapted);
  local.grad_phi_entries += t.n_phi();
  if (ops != nullptr) *ops += local;
  return g;
}

MetaGradient fd_meta_grad(const TaskInstance& t, const SplitParameters& p,
                          const InnerLoopConfig& cfg, double h) {
  check_config(h > 0.0, "fd_meta_grad: h must be positive");
  check_dims(p.w.size() == t.n_w() && p.phi.size() == t.n_phi(),
             "fd_meta_grad: parameter dimensions do not match task");

  MetaGradient mg;
  auto meta_value = [&](const Vector& w, const Vector& phi) {
    InnerLoopTrace trace = run_inner_loop(t, {w, phi}, cfg);
    mg.ops += trace.ops;
    return outer_loss_value(t, {trace.final_w(), phi});
  };

  mg.grad_w.resize(t.n_w());
  for (Index j = 0; j < t.n_w(); ++j) {
    Vector wp = p.w, wm = p.w;
    wp(j) += h;
    wm(j) -= h;
    mg.grad_w(j) = (meta_value(wp, p.phi) - meta_value(wm, p.phi)) / (2.0 * h);
  }
  mg.grad_phi.resize(t.n_phi());
  for (Index j = 0; j < t.n_phi(); ++j) {
    Vector pp = p.phi, pm = p.phi;
    pp(j) += h;
    pm(j) -= h;
    mg.grad_phi(j) = (meta_value(p.w, pp) - meta_value(p.w, pm)) / (2.0 * h);
  }
  return mg;
}

double relative_error(const Vector& analytic, const Vector& reference) {
  return (analytic - reference).norm() / std::max(1.0, analytic.norm());
}

}  // namespace anil
