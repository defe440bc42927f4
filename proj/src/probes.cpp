#include "anil/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "anil/inner_loop.hpp"

namespace anil {
namespace {

constexpr double kWwDecaySlack = 0.05;     // slack on the fitted per-step factor
constexpr double kPhiPhiSpreadLimit = 1.2; // allowed max/min spread of the plateau
constexpr double kGrowthThreshold = 3.0;   // required nonconvex growth ratio

bool perturbs_w(SmoothnessBlock b) {
  return b == SmoothnessBlock::kWW || b == SmoothnessBlock::kPhiW;
}

bool measures_w(SmoothnessBlock b) {
  return b == SmoothnessBlock::kWW || b == SmoothnessBlock::kWPhi;
}

Vector unit_direction(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  double norm = 0.0;
  do {
    for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

}  // namespace

const char* to_string(SmoothnessBlock b) {
  switch (b) {
    case SmoothnessBlock::kWW: return "W_w";
    case SmoothnessBlock::kWPhi: return "W_phi";
    case SmoothnessBlock::kPhiW: return "Phi_w";
    case SmoothnessBlock::kPhiPhi: return "Phi_phi";
  }
  return "unknown";
}

SmoothnessEstimate estimate_block_smoothness(const std::vector<TaskInstance>& pool,
                                             const SplitParameters& center,
                                             const InnerLoopConfig& cfg, SmoothnessBlock block,
                                             const ProbeConfig& probe) {
  check_config(!pool.empty(), "task pool must not be empty");
  check_config(probe.num_pairs >= 1, "num_pairs must be at least 1");
  check_config(probe.pair_scale > 0.0, "pair_scale must be positive");
  check_dims(center.n_w() == pool.front().n_w() && center.n_phi() == pool.front().n_phi(),
             "probe center does not match task dimensions");
  const bool on_w = perturbs_w(block);
  if (!on_w) {
    check_config(center.n_phi() > 0,
                 "cannot probe shared-block sensitivity with an empty shared block");
  }

  std::mt19937_64 rng = make_rng(probe.seed, RngStream::kProbe);
  const Index n = on_w ? center.n_w() : center.n_phi();
  double best = 0.0;
  for (int pair = 0; pair < probe.num_pairs; ++pair) {
    const Vector u1 = unit_direction(n, rng);
    Vector u2 = unit_direction(n, rng);
    while ((u1 - u2).norm() < 1e-9) u2 = unit_direction(n, rng);

    SplitParameters p1 = center;
    SplitParameters p2 = center;
    if (on_w) {
      p1.w += probe.pair_scale * u1;
      p2.w += probe.pair_scale * u2;
    } else {
      p1.phi += probe.pair_scale * u1;
      p2.phi += probe.pair_scale * u2;
    }

    const auto g1 = population_meta_gradient(pool, p1, cfg);
    const auto g2 = population_meta_gradient(pool, p2, cfg);
    const Vector& out1 = measures_w(block) ? g1.first : g1.second;
    const Vector& out2 = measures_w(block) ? g2.first : g2.second;
    const double quotient = (out1 - out2).norm() / (probe.pair_scale * (u1 - u2).norm());
    best = std::max(best, quotient);
  }

  SmoothnessEstimate est;
  est.block = block;
  est.n_steps = cfg.num_steps;
  est.estimate = best;
  est.num_pairs = probe.num_pairs;
  est.pair_scale = probe.pair_scale;
  return est;
}

double smoothness_bound(const TaskFamilySpec& spec, SmoothnessBlock block, double alpha,
                        int n_steps) {
  validate_spec(spec);
  check_config(alpha > 0.0, "alpha must be positive");
  check_config(n_steps >= 1, "smoothness bounds require at least one adaptation step");
  const double mu = spec.mu;
  const double L = spec.smoothness_L;
  const double M = spec.lipschitz_M;
  const double rho = spec.rho;
  const double tau = spec.tau;
  const double n = static_cast<double>(n_steps);

  if (spec.geometry == Geometry::kStronglyConvex) {
    check_config(alpha * mu < 1.0,
                 "strongly convex smoothness bounds require alpha*mu below 1");
    const double r = 1.0 - alpha * mu;
    switch (block) {
      case SmoothnessBlock::kWW:
        return std::pow(r, 1.5 * n) * L + (2.0 * rho * M / mu) * std::pow(r, n - 1.0);
      case SmoothnessBlock::kWPhi:
        return (L + alpha * rho * M * n) * std::pow(r, n - 1.0) * (2.0 * L / mu + 1.0);
      case SmoothnessBlock::kPhiW:
        return (L + 2.0 * tau * M / mu + (2.0 * L * M / mu) * (alpha * rho / r + 2.0 * rho / mu) +
                L * L / mu) *
               std::pow(r, 0.5 * (n - 1.0));
      case SmoothnessBlock::kPhiPhi:
        return (L + tau * M / mu + L * M * rho / (mu * mu) + L * L / mu) * (2.0 * L / mu + 1.0);
    }
  } else {
    const double g = 1.0 + alpha * L;
    switch (block) {
      case SmoothnessBlock::kWW:
      case SmoothnessBlock::kWPhi:
        return (L + alpha * L * L + 2.0 * M * rho) * std::pow(g, 2.0 * n - 1.0);
      case SmoothnessBlock::kPhiW:
      case SmoothnessBlock::kPhiPhi:
        return alpha * M * (tau - rho) * n * std::pow(g, n - 1.0) +
               (L + rho * M / L) * std::pow(g, 2.0 * n);
    }
  }
  throw ConfigError("unknown smoothness block");
}

SplitParameters probe_center(const TaskFamilySpec& spec) {
  SplitParameters p;
  p.phi = Vector::Zero(spec.n_phi);
  if (spec.geometry == Geometry::kNonconvex) {
    const double half_pi = std::acos(0.0);
    p.w = Vector::Constant(spec.n_w, half_pi);
  } else {
    p.w = Vector::Zero(spec.n_w);
  }
  return p;
}

ScalingReport smoothness_scaling_report(const TaskFamilySpec& spec, const ScalingConfig& cfg) {
  validate_spec(spec);
  check_config(!cfg.n_values.empty(), "n_values must not be empty");
  check_config(cfg.n_values.front() >= 1, "n_values entries must be at least 1");
  for (std::size_t i = 1; i < cfg.n_values.size(); ++i) {
    check_config(cfg.n_values[i] > cfg.n_values[i - 1], "n_values must be strictly increasing");
  }
  check_config(cfg.pool_size >= 1, "pool_size must be at least 1");
  check_config(cfg.alpha >= 0.0, "alpha must be nonnegative");

  const double L = spec.smoothness_L;
  const double alpha = cfg.alpha > 0.0 ? cfg.alpha : spec.mu / (L * L);
  check_config(alpha > 0.0,
               "alpha must be positive (nonconvex families need an explicit probe stepsize)");
  const std::vector<TaskInstance> pool = sample_task_family(spec, cfg.pool_size);
  const SplitParameters center = probe_center(spec);

  ScalingReport rep;
  rep.geometry = spec.geometry;
  rep.alpha = alpha;

  const SmoothnessBlock kBlocks[] = {SmoothnessBlock::kWW, SmoothnessBlock::kWPhi,
                                     SmoothnessBlock::kPhiW, SmoothnessBlock::kPhiPhi};
  ProbeConfig probe;
  probe.num_pairs = cfg.num_pairs;
  probe.pair_scale = cfg.pair_scale;
  probe.seed = cfg.seed;
  for (int n : cfg.n_values) {
    InnerLoopConfig icfg;
    icfg.alpha = alpha;
    icfg.num_steps = n;
    for (SmoothnessBlock block : kBlocks) {
      if (spec.n_phi == 0 && !perturbs_w(block)) continue;
      ScalingRow row;
      row.block = block;
      row.n_steps = n;
      row.estimate = estimate_block_smoothness(pool, center, icfg, block, probe).estimate;
      row.theory_bound = smoothness_bound(spec, block, alpha, n);
      row.pass = row.estimate <= row.theory_bound;
      rep.rows.push_back(row);
    }
  }
  rep.bounds_ok = std::all_of(rep.rows.begin(), rep.rows.end(),
                              [](const ScalingRow& r) { return r.pass; });

  const auto block_series = [&](SmoothnessBlock b) {
    std::vector<std::pair<int, double>> series;
    for (const ScalingRow& r : rep.rows) {
      if (r.block == b) series.emplace_back(r.n_steps, r.estimate);
    }
    return series;
  };

  if (spec.geometry == Geometry::kStronglyConvex) {
    // Per-step decay factor of the adapted-block sensitivity: least-squares
    // slope of log(estimate) against depth.
    const auto ww = block_series(SmoothnessBlock::kWW);
    if (ww.size() >= 2) {
      double mean_n = 0.0;
      double mean_log = 0.0;
      bool positive = true;
      for (const auto& [n, e] : ww) {
        positive = positive && e > 0.0;
        mean_n += n;
        mean_log += positive ? std::log(std::max(e, 1e-300)) : 0.0;
      }
      if (positive) {
        mean_n /= static_cast<double>(ww.size());
        mean_log /= static_cast<double>(ww.size());
        double num = 0.0;
        double den = 0.0;
        for (const auto& [n, e] : ww) {
          num += (n - mean_n) * (std::log(e) - mean_log);
          den += (n - mean_n) * (n - mean_n);
        }
        rep.ww_decay_factor = std::exp(num / den);
      } else {
        rep.ww_decay_factor = std::numeric_limits<double>::infinity();
      }
      const double r = 1.0 - alpha * spec.mu;
      rep.ww_decay_limit = r * r + kWwDecaySlack;
      rep.ww_decay_ok = rep.ww_decay_factor <= rep.ww_decay_limit;
    }

    rep.phiphi_spread_limit = kPhiPhiSpreadLimit;
    std::vector<double> plateau;
    for (const auto& [n, e] : block_series(SmoothnessBlock::kPhiPhi)) {
      if (n >= 2) plateau.push_back(e);
    }
    if (plateau.size() >= 2) {
      const auto [lo, hi] = std::minmax_element(plateau.begin(), plateau.end());
      rep.phiphi_spread = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
      rep.phiphi_plateau_ok = rep.phiphi_spread <= kPhiPhiSpreadLimit;
    } else {
      rep.phiphi_spread = 1.0;
    }
  } else {
    rep.growth_threshold = kGrowthThreshold;
    double min_ratio = std::numeric_limits<double>::infinity();
    for (SmoothnessBlock block : kBlocks) {
      const auto series = block_series(block);
      if (series.size() < 2) continue;
      const double first = series.front().second;
      const double last = series.back().second;
      double ratio = 0.0;
      if (first > 0.0) {
        ratio = last / first;
      } else if (last > 0.0) {
        ratio = std::numeric_limits<double>::infinity();
      }
      min_ratio = std::min(min_ratio, ratio);
    }
    rep.min_growth_ratio = std::isfinite(min_ratio) ? min_ratio : 0.0;
    if (!rep.rows.empty()) {
      rep.growth_ok = min_ratio >= kGrowthThreshold;
    }
  }

  rep.all_ok = rep.bounds_ok && rep.ww_decay_ok && rep.phiphi_plateau_ok && rep.growth_ok;
  return rep;
}

}  // namespace anil
