#pragma once

#include "anil/inner_loop.hpp"
#include "anil/task.hpp"
#include "anil/types.hpp"

namespace anil {

// Exact derivative of the meta objective  phi, w -> outer_loss(w_N(w, phi), phi)
// for one task, computed from a stored adaptation trace.
//
// Unrolling the adaptation recursion gives, with H_m the adapted-loss Hessian
// at iterate m and X_m its mixed partial,
//   grad_w   = (I - a H_0)(I - a H_1) ... (I - a H_{N-1}) g_D
//   grad_phi = -a * sum_m X_m (I - a H_{m+1}) ... (I - a H_{N-1}) g_D
//              + outer grad in phi,
// where g_D is the outer gradient in w at the adapted point. Both blocks fall
// out of one backward sweep over the trace, so a full MetaGradient charges the
// N Hessian evaluations once: ops holds exactly N*n_w^2 hessian_entries and
// N*n_w*n_phi mixed_entries (plus the two outer gradient evaluations).
struct MetaGradient {
  Vector grad_w;
  Vector grad_phi;
  OpCount ops;
};

MetaGradient meta_gradient(const TaskInstance& t, const InnerLoopTrace& trace);

// Single-block variants. Each runs its own backward sweep and charges its own
// oracle calls (N Hessians for the w block; N Hessians + N mixed partials for
// the phi block). When both blocks are needed, meta_gradient is cheaper.
Vector meta_grad_w(const TaskInstance& t, const InnerLoopTrace& trace, OpCount* ops = nullptr);
Vector meta_grad_phi(const TaskInstance& t, const InnerLoopTrace& trace, OpCount* ops = nullptr);

// Independent oracle: central differences through the full adaptation run.
// Perturbs every coordinate of w and phi by +-h, reruns the adaptation and
// evaluates the outer loss; uses only loss values and first-order adaptation,
// never the second-derivative oracles. Inner-loop divergence at a perturbed
// point propagates as DivergenceError.
MetaGradient fd_meta_grad(const TaskInstance& t, const SplitParameters& p,
                          const InnerLoopConfig& cfg, double h = 1e-5);

// |a - b| / max(1, |a|); the denominator guard keeps the metric meaningful
// near zero gradients.
double relative_error(const Vector& analytic, const Vector& reference);

}  // namespace anil
