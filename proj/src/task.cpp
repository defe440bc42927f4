#include "anil/task.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace anil {
namespace {

// Fixed shape choices of the sampler. Couplings are kept well below the
// diagonal curvature so that cross-block effects perturb rather than dominate
// the two-level dynamics; the outer joint Hessian is drawn positive
// semidefinite so the meta objective of a quadratic family stays convex.
constexpr double kCouplingFrac = 0.15;        // |B| relative to smoothness_L
// Nonconvex adapted losses get a stronger coupling so depth-dependent effects
// routed through the mixed partial are visible above the constant meta-level
// curvature; the joint inner Hessian norm stays below smoothness_L since
// |A| <= L - amplitude and amplitude <= L/1.9.
constexpr double kCouplingFracNcInner = 0.30;
constexpr double kInnerLinearFrac = 0.10;     // adapted-loss linear term scale
constexpr double kOuterLinearFrac = 0.20;     // meta-loss linear term scale
constexpr double kOuterEigLo = 0.30;          // outer w-block eigenvalue range
constexpr double kOuterEigHi = 0.85;
// Nonconvex adapted curvature keeps its smallest eigenvalue well below the
// sinusoid amplitude (relative band below), so around the maximal-curvature
// point the total Hessian is clearly indefinite and adaptation paths linger
// in the expanding region instead of being pulled straight out of it.
constexpr double kNcBottomEigLo = 0.02;       // bottom eigenvalue, relative to amplitude
constexpr double kNcBottomEigHi = 0.30;
// The nonconvex meta-level shared-block curvature is kept flat so that
// depth-dependent sensitivity (entering through the adaptation trajectory)
// dominates the measured smoothness instead of being buried under it.
constexpr double kOuterPhiEigLoNc = 0.01;
constexpr double kOuterPhiEigHiNc = 0.04;
constexpr double kEigMargin = 1e-9;           // keeps draws strictly interior

std::string num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

double draw_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) g(i, j) = gauss(rng);
  return g;
}

Vector gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = gauss(rng);
  return v;
}

Matrix random_orthogonal(Index n, std::mt19937_64& rng) {
  Matrix g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

Matrix symmetric_from_eigenvalues(const Vector& eigs, std::mt19937_64& rng) {
  const Index n = eigs.size();
  Matrix v = random_orthogonal(n, rng);
  Matrix a = v * eigs.asDiagonal() * v.transpose();
  return 0.5 * (a + a.transpose());
}

double spectral_norm(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double symmetric_norm(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(m.rows() - 1)));
}

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Matrix scaled_to_norm(Matrix m, double target) {
  const double s = spectral_norm(m);
  if (s > 0.0) m *= target / s;
  return m;
}

// Adapted-loss curvature matrix. Strongly convex: eigenvalues interior to
// [mu, L] (exactly mu*I when mu == L). Nonconvex: the smallest eigenvalue is
// forced below the sinusoid amplitude so an indefinite point always exists,
// and the largest stays at or below L - amplitude so the total Hessian norm
// respects L everywhere.
Matrix draw_inner_curvature(const TaskFamilySpec& spec, std::mt19937_64& rng) {
  const Index n = spec.n_w;
  if (spec.geometry == Geometry::kStronglyConvex) {
    if (spec.smoothness_L - spec.mu <= kEigMargin * std::max(1.0, spec.smoothness_L))
      return spec.mu * Matrix::Identity(n, n);
    Vector eigs(n);
    for (Index i = 0; i < n; ++i) {
      const double u = kEigMargin + (1.0 - 2.0 * kEigMargin) * draw_unit(rng);
      eigs(i) = spec.mu + u * (spec.smoothness_L - spec.mu);
    }
    return symmetric_from_eigenvalues(eigs, rng);
  }
  const double amp = spec.nonconvexity_amplitude;
  const double hi = spec.smoothness_L - amp;
  Vector eigs(n);
  eigs(0) = amp * (kNcBottomEigLo + (kNcBottomEigHi - kNcBottomEigLo) * draw_unit(rng));
  for (Index i = 1; i < n; ++i) eigs(i) = eigs(0) + (hi - eigs(0)) * draw_unit(rng);
  return symmetric_from_eigenvalues(eigs, rng);
}

Vector draw_scaled_direction(Index n, double max_norm, std::mt19937_64& rng) {
  if (n == 0) return Vector(0);
  Vector v = gaussian_vector(n, rng);
  const double nrm = v.norm();
  if (nrm > 0.0) v *= (max_norm * draw_unit(rng)) / nrm;
  return v;
}

}  // namespace

const char* to_string(Geometry g) {
  return g == Geometry::kStronglyConvex ? "strongly_convex" : "nonconvex";
}

void validate_spec(const TaskFamilySpec& spec) {
  check_config(spec.n_w >= 1, "n_w must be at least 1");
  check_config(spec.n_phi >= 0, "n_phi must be nonnegative");
  check_config(spec.smoothness_L > 0.0, "smoothness_L must be positive");
  check_config(spec.lipschitz_M > 0.0, "lipschitz_M must be positive");
  check_config(spec.rho >= 0.0, "rho must be nonnegative");
  check_config(spec.tau >= 0.0, "tau must be nonnegative");
  check_config(spec.operating_radius > 0.0, "operating_radius must be positive");
  if (spec.geometry == Geometry::kStronglyConvex) {
    check_config(spec.mu > 0.0, "mu must be positive for strongly_convex geometry");
    check_config(spec.mu <= spec.smoothness_L,
                 "mu exceeds smoothness_L (mu=" + num(spec.mu) +
                     ", smoothness_L=" + num(spec.smoothness_L) + ")");
    check_config(spec.nonconvexity_amplitude == 0.0,
                 "nonconvexity_amplitude must be 0 for strongly_convex geometry");
  } else {
    check_config(spec.mu == 0.0, "mu must be 0 for nonconvex geometry");
    check_config(spec.nonconvexity_amplitude > 0.0,
                 "nonconvexity_amplitude must be positive for nonconvex geometry");
    // 0.9*amplitude (largest admissible bottom eigenvalue) must stay at or
    // below L - amplitude (eigenvalue ceiling), i.e. amplitude <= L / 1.9.
    check_config(spec.nonconvexity_amplitude <= spec.smoothness_L / 1.9,
                 "nonconvexity_amplitude too large: requires nonconvexity_amplitude <= "
                 "smoothness_L/1.9 (nonconvexity_amplitude=" +
                     num(spec.nonconvexity_amplitude) +
                     ", smoothness_L=" + num(spec.smoothness_L) + ")");
    check_config(spec.rho >= spec.nonconvexity_amplitude,
                 "rho must be at least nonconvexity_amplitude (rho=" + num(spec.rho) +
                     ", nonconvexity_amplitude=" + num(spec.nonconvexity_amplitude) + ")");
  }
}

double LossParams::value(const Vector& w, const Vector& phi) const {
  double v = 0.5 * w.dot(A * w) + c_w.dot(w);
  if (n_phi() > 0) v += w.dot(B * phi) + 0.5 * phi.dot(C * phi) + c_phi.dot(phi);
  v += sine.dot(w.array().sin().matrix());
  return v;
}

Vector LossParams::grad_w(const Vector& w, const Vector& phi) const {
  Vector g = A * w + B * phi + c_w;
  g += (sine.array() * w.array().cos()).matrix();
  return g;
}

Vector LossParams::grad_phi(const Vector& w, const Vector& phi) const {
  return B.transpose() * w + C * phi + c_phi;
}

Matrix LossParams::hessian_w(const Vector& w) const {
  Matrix h = A;
  h.diagonal() -= (sine.array() * w.array().sin()).matrix();
  return h;
}

Matrix LossParams::mixed(const Vector& /*w*/, const Vector& /*phi*/) const {
  return B.transpose();
}

namespace {

void check_point(const TaskInstance& t, const SplitParameters& p, const char* op) {
  check_dims(p.w.size() == t.n_w() && p.phi.size() == t.n_phi(),
             std::string(op) + ": parameter dimensions (" + std::to_string(p.w.size()) + ", " +
                 std::to_string(p.phi.size()) + ") do not match task (" +
                 std::to_string(t.n_w()) + ", " + std::to_string(t.n_phi()) + ")");
}

}  // namespace

double inner_loss_value(const TaskInstance& t, const SplitParameters& p) {
  check_point(t, p, "inner_loss_value");
  return t.inner.value(p.w, p.phi);
}

Vector inner_loss_grad_w(const TaskInstance& t, const SplitParameters& p) {
  check_point(t, p, "inner_loss_grad_w");
  return t.inner.grad_w(p.w, p.phi);
}

Matrix inner_loss_hessian_w(const TaskInstance& t, const SplitParameters& p) {
  check_point(t, p, "inner_loss_hessian_w");
  return t.inner.hessian_w(p.w);
}

Matrix inner_loss_mixed(const TaskInstance& t, const SplitParameters& p) {
  check_point(t, p, "inner_loss_mixed");
  return t.inner.mixed(p.w, p.phi);
}

double outer_loss_value(const TaskInstance& t, const SplitParameters& p) {
  check_point(t, p, "outer_loss_value");
  return t.outer.value(p.w, p.phi);
}

Vector outer_loss_grad_w(const TaskInstance& t, const SplitParameters& p) {
  check_point(t, p, "outer_loss_grad_w");
  return t.outer.grad_w(p.w, p.phi);
}

Vector outer_loss_grad_phi(const TaskInstance& t, const SplitParameters& p) {
  check_point(t, p, "outer_loss_grad_phi");
  return t.outer.grad_phi(p.w, p.phi);
}

TaskInstance sample_task(const TaskFamilySpec& spec, std::mt19937_64& rng, std::int64_t task_id) {
  validate_spec(spec);
  const Index nw = spec.n_w;
  const Index np = spec.n_phi;
  const double L = spec.smoothness_L;

  TaskInstance t;
  t.task_id = task_id;
  t.geometry = spec.geometry;
  t.mu = spec.mu;
  t.smoothness_L = L;

  // Adapted-level loss: curvature, coupling, linear term, sinusoid.
  const double inner_coupling =
      (spec.geometry == Geometry::kNonconvex ? kCouplingFracNcInner : kCouplingFrac) * L;
  t.inner.A = draw_inner_curvature(spec, rng);
  t.inner.B = np > 0 ? scaled_to_norm(gaussian_matrix(nw, np, rng), inner_coupling)
                     : Matrix(nw, 0);
  t.inner.C = Matrix::Zero(np, np);
  t.inner.c_w = draw_scaled_direction(nw, kInnerLinearFrac * L, rng);
  t.inner.c_phi = Vector::Zero(np);
  t.inner.sine = spec.geometry == Geometry::kNonconvex
                     ? Vector::Constant(nw, spec.nonconvexity_amplitude)
                     : Vector::Zero(nw);

  // Meta-level loss: positive semidefinite joint curvature (w-block, phi-block,
  // then a coupling small enough to keep the joint matrix PSD), linear term.
  Vector aw_eigs(nw);
  for (Index i = 0; i < nw; ++i)
    aw_eigs(i) = L * (kOuterEigLo + (kOuterEigHi - kOuterEigLo) * draw_unit(rng));
  t.outer.A = symmetric_from_eigenvalues(aw_eigs, rng);
  const double phi_lo = spec.geometry == Geometry::kNonconvex ? kOuterPhiEigLoNc : kOuterEigLo;
  const double phi_hi = spec.geometry == Geometry::kNonconvex ? kOuterPhiEigHiNc : kOuterEigHi;
  if (np > 0) {
    Vector cp_eigs(np);
    for (Index i = 0; i < np; ++i)
      cp_eigs(i) = L * (phi_lo + (phi_hi - phi_lo) * draw_unit(rng));
    t.outer.C = symmetric_from_eigenvalues(cp_eigs, rng);
    const double bd_cap =
        0.9 * std::sqrt(min_eigenvalue(t.outer.A) * min_eigenvalue(t.outer.C));
    t.outer.B = scaled_to_norm(gaussian_matrix(nw, np, rng),
                               std::min(kCouplingFrac * L, bd_cap));
  } else {
    t.outer.C = Matrix(0, 0);
    t.outer.B = Matrix(nw, 0);
  }
  Vector c_joint = draw_scaled_direction(nw + np, kOuterLinearFrac * L, rng);
  t.outer.c_w = c_joint.head(nw);
  t.outer.c_phi = c_joint.tail(np);
  t.outer.sine = Vector::Zero(nw);

  // Certificates: measured bounds the declared family constants must cover.
  Eigen::SelfAdjointEigenSolver<Matrix> es(t.inner.A, Eigen::EigenvaluesOnly);
  t.cert.inner_a_min = es.eigenvalues()(0);
  t.cert.inner_a_max = es.eigenvalues()(nw - 1);
  t.cert.inner_b_norm = spectral_norm(t.inner.B);
  Matrix joint(nw + np, nw + np);
  joint.topLeftCorner(nw, nw) = t.outer.A;
  joint.topRightCorner(nw, np) = t.outer.B;
  joint.bottomLeftCorner(np, nw) = t.outer.B.transpose();
  joint.bottomRightCorner(np, np) = t.outer.C;
  t.cert.outer_joint_norm = symmetric_norm(joint);
  t.cert.required_m = t.cert.outer_joint_norm * spec.operating_radius + c_joint.norm();
  check_config(t.cert.required_m <= spec.lipschitz_M,
               "lipschitz_M too small for operating_radius: task " + std::to_string(task_id) +
                   " requires at least " + num(t.cert.required_m) +
                   " (lipschitz_M=" + num(spec.lipschitz_M) + ")");
  if (spec.geometry == Geometry::kNonconvex) {
    Matrix worst = t.inner.A;
    worst.diagonal() -= t.inner.sine;  // adapted Hessian with every sin(w_j) at 1
    t.cert.witness_min_eig = min_eigenvalue(worst);
  }
  return t;
}

std::vector<TaskInstance> sample_task_family(const TaskFamilySpec& spec, int count) {
  check_config(count >= 1, "count must be at least 1");
  validate_spec(spec);
  std::mt19937_64 rng = make_rng(spec.seed, RngStream::kTasks);
  std::vector<TaskInstance> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) tasks.push_back(sample_task(spec, rng, i));
  return tasks;
}

std::vector<TaskInstance> sample_eval_pool(const TaskFamilySpec& spec, int count) {
  check_config(count >= 1, "count must be at least 1");
  validate_spec(spec);
  std::mt19937_64 rng = make_rng(spec.seed, RngStream::kEvalPool);
  std::vector<TaskInstance> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) tasks.push_back(sample_task(spec, rng, i));
  return tasks;
}

TaskInstance flatten_for_full_adaptation(const TaskInstance& t) {
  const Index nw = t.n_w();
  const Index np = t.n_phi();
  const Index nz = nw + np;
  auto flatten = [&](const LossParams& l) {
    LossParams f;
    f.A.resize(nz, nz);
    f.A.topLeftCorner(nw, nw) = l.A;
    f.A.topRightCorner(nw, np) = l.B;
    f.A.bottomLeftCorner(np, nw) = l.B.transpose();
    f.A.bottomRightCorner(np, np) = l.C;
    f.B = Matrix(nz, 0);
    f.C = Matrix(0, 0);
    f.c_w.resize(nz);
    f.c_w << l.c_w, l.c_phi;
    f.c_phi = Vector(0);
    f.sine = Vector::Zero(nz);
    f.sine.head(nw) = l.sine;
    return f;
  };
  TaskInstance z = t;
  z.inner = flatten(t.inner);
  z.outer = flatten(t.outer);
  return z;
}

bool in_operating_region(const TaskFamilySpec& spec, const SplitParameters& p) {
  return p.joint_norm() <= spec.operating_radius;
}

}  // namespace anil
