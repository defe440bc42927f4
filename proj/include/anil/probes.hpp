#pragma once

#include <vector>

#include "anil/anil.hpp"
#include "anil/task.hpp"

namespace anil {

// Blocks of the pool-averaged meta-gradient map. The first letter names the
// measured gradient block, the second the perturbed parameter block: kWPhi is
// the sensitivity of the adapted-block gradient to the shared parameters.
enum class SmoothnessBlock { kWW, kWPhi, kPhiW, kPhiPhi };

const char* to_string(SmoothnessBlock b);

struct ProbeConfig {
  int num_pairs = 64;        // sampled point pairs per estimate
  double pair_scale = 1e-2;  // radius of the probe sphere around the center
  std::uint64_t seed = 0;    // probe direction stream
};

struct SmoothnessEstimate {
  SmoothnessBlock block = SmoothnessBlock::kWW;
  int n_steps = 0;
  double estimate = 0.0;  // largest difference quotient observed
  int num_pairs = 0;
  double pair_scale = 0.0;
};

// Empirical block smoothness: draws pairs of points on a sphere of radius
// pair_scale around `center` (perturbing only the block's input coordinates),
// evaluates the pool-averaged meta-gradient at both, and returns the largest
// ratio of output-block change to input distance.
SmoothnessEstimate estimate_block_smoothness(const std::vector<TaskInstance>& pool,
                                             const SplitParameters& center,
                                             const InnerLoopConfig& cfg, SmoothnessBlock block,
                                             const ProbeConfig& probe);

// Closed-form upper bound on the block smoothness after n_steps adaptation
// steps at stepsize alpha, from the family's curvature constants. Strongly
// convex families get geometrically decaying bounds for the w-sensitive
// blocks and a depth-independent bound for kPhiPhi; nonconvex families get
// bounds growing like powers of (1 + alpha L).
double smoothness_bound(const TaskFamilySpec& spec, SmoothnessBlock block, double alpha,
                        int n_steps);

// Standard probe center: the origin for strongly convex families; for
// nonconvex families the point with every adapted coordinate at pi/2, where
// the sinusoidal curvature term is extremal.
SplitParameters probe_center(const TaskFamilySpec& spec);

struct ScalingConfig {
  std::vector<int> n_values = {1, 2, 3, 5, 7, 10};  // adaptation depths
  int pool_size = 32;
  int num_pairs = 64;
  double pair_scale = 1e-2;
  std::uint64_t seed = 0;   // probe direction stream
  double alpha = 0.0;       // fixed stepsize for all depths; 0 uses mu/L^2
};

struct ScalingRow {
  SmoothnessBlock block = SmoothnessBlock::kWW;
  int n_steps = 0;
  double estimate = 0.0;
  double theory_bound = 0.0;
  bool pass = false;  // estimate <= theory_bound
};

struct ScalingReport {
  Geometry geometry = Geometry::kStronglyConvex;
  double alpha = 0.0;
  std::vector<ScalingRow> rows;
  bool bounds_ok = false;          // every estimate within its closed-form bound
  double ww_decay_factor = 0.0;    // per-step factor from a log-linear fit of kWW
  double ww_decay_limit = 0.0;     // (1 - alpha mu)^2 plus slack
  bool ww_decay_ok = true;
  double phiphi_spread = 0.0;      // max/min of kPhiPhi estimates over depths >= 2
  double phiphi_spread_limit = 0.0;
  bool phiphi_plateau_ok = true;
  double min_growth_ratio = 0.0;   // min over blocks of estimate(max N)/estimate(min N)
  double growth_threshold = 0.0;
  bool growth_ok = true;
  bool all_ok = false;
};

// Sweeps the four block estimates over cfg.n_values at a fixed stepsize and
// checks them against the closed-form bounds plus the geometry's qualitative
// prediction: strongly convex kWW estimates must decay per step at least as
// fast as (1 - alpha mu)^2 (with 0.05 slack on the fitted factor) and kPhiPhi
// must plateau (spread at most 1.2 beyond depth 1); nonconvex estimates must
// grow by at least 3x from the smallest to the largest depth in every block.
ScalingReport smoothness_scaling_report(const TaskFamilySpec& spec, const ScalingConfig& cfg);

}  // namespace anil
