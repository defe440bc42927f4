#include <doctest.h>

#include <cmath>
#include <random>

#include "anil/inner_loop.hpp"
#include "anil/task.hpp"
#include "anil/types.hpp"
#include "helpers.hpp"

using namespace anil;
using anil_test::point1;
using anil_test::point2;
using anil_test::scalar_task;
using anil_test::scalar_task_phi;
using anil_test::small_nc_spec;
using anil_test::small_sc_spec;

TEST_CASE("two half-steps toward a shifted quadratic minimum land on the exact iterates") {
  // Adapted loss 1/2 (w - phi)^2 expressed as 1/2 w^2 - w phi (+ const in phi).
  const TaskInstance t = scalar_task_phi(1.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0);
  InnerLoopConfig cfg;
  cfg.alpha = 0.5;
  cfg.num_steps = 2;

  const InnerLoopTrace trace = run_inner_loop(t, point2(0.0, 1.0), cfg);
  REQUIRE(trace.iterates.size() == 3);
  CHECK(trace.iterates[0](0) == 0.0);
  CHECK(trace.iterates[1](0) == 0.5);
  CHECK(trace.iterates[2](0) == 0.75);
  CHECK(trace.final_w()(0) == 0.75);

  // Each step costs exactly one adapted-block gradient.
  CHECK(trace.ops.grad_w_entries == 2);
  CHECK(trace.ops.hessian_entries == 0);
  CHECK(trace.ops.mixed_entries == 0);

  // Recomputing every stored transition reproduces the trace bit for bit.
  CHECK(replay_max_deviation(t, trace) == 0.0);
}

TEST_CASE("zero adaptation steps return the starting point untouched") {
  const TaskInstance t = scalar_task(1.0, 0.0, 1.0, 0.0);
  InnerLoopConfig cfg;
  cfg.alpha = 0.5;
  cfg.num_steps = 0;
  const InnerLoopTrace trace = run_inner_loop(t, point1(3.0), cfg);
  CHECK(trace.iterates.size() == 1);
  CHECK(trace.final_w()(0) == 3.0);
  CHECK(trace.ops.grad_w_entries == 0);
}

TEST_CASE("adaptation config validation names the offending field") {
  InnerLoopConfig cfg;
  cfg.alpha = 0.0;
  CHECK_THROWS_WITH_AS(validate_inner(cfg), doctest::Contains("alpha must be positive"),
                       ConfigError);
  cfg.alpha = 0.1;
  cfg.num_steps = -1;
  CHECK_THROWS_WITH_AS(validate_inner(cfg), doctest::Contains("num_steps"), ConfigError);
  cfg.num_steps = 1;
  cfg.c_alpha = -0.5;
  CHECK_THROWS_WITH_AS(validate_inner(cfg), doctest::Contains("c_alpha"), ConfigError);
}

TEST_CASE("nonconvex stepsize cap scales inversely with adaptation depth") {
  const TaskFamilySpec spec = small_nc_spec();
  InnerLoopConfig cfg;
  cfg.alpha = 0.3;

  cfg.num_steps = 1;  // default cap is 1/(2L) = 0.5
  CHECK_NOTHROW(validate_inner_for_family(cfg, spec));

  cfg.num_steps = 2;  // cap drops to 0.25
  CHECK_THROWS_WITH_AS(validate_inner_for_family(cfg, spec),
                       doctest::Contains("alpha exceeds the nonconvex stepsize cap"),
                       ConfigError);

  cfg.c_alpha = 1.0;  // raising the coefficient re-admits the stepsize
  CHECK_NOTHROW(validate_inner_for_family(cfg, spec));

  // Strongly convex families are not subject to the cap.
  cfg.c_alpha = 0.0;
  cfg.num_steps = 10;
  CHECK_NOTHROW(validate_inner_for_family(cfg, small_sc_spec()));
}

TEST_CASE("scheduled adaptation stepsizes follow the geometry") {
  TaskFamilySpec sc = small_sc_spec();
  sc.mu = 0.25;
  InnerLoopConfig cfg;
  cfg.num_steps = 4;
  CHECK(scheduled_inner_stepsize(sc, cfg) == 0.25);  // mu / L^2

  const TaskFamilySpec nc = small_nc_spec();
  CHECK(scheduled_inner_stepsize(nc, cfg) == 0.125);  // (1/(2L)) / N
  cfg.c_alpha = 1.0;
  CHECK(scheduled_inner_stepsize(nc, cfg) == 0.25);  // c_alpha / N
}

TEST_CASE("divergent adaptation reports the first bad step and its task") {
  const TaskInstance t = scalar_task(1.0, 0.0, 1.0, 0.0, /*id=*/5);
  InnerLoopConfig cfg;
  cfg.alpha = 3.0;  // expansion factor |1 - alpha| = 2
  cfg.num_steps = 10;
  try {
    run_inner_loop(t, point1(1e308), cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step == 0);
    CHECK(std::string(e.what()).find("after step 0") != std::string::npos);
    CHECK(std::string(e.what()).find("task 5") != std::string::npos);
  }
}

TEST_CASE("matched scalar curvature makes the contraction bound an equality") {
  // mu = L = 1, alpha = 1/2: q = 1/4 and both sides equal 2^-t exactly.
  const TaskInstance t = scalar_task(1.0, 0.0, 1.0, 0.0);
  InnerLoopConfig cfg;
  cfg.alpha = 0.5;
  cfg.num_steps = 10;

  const ContractionReport rep = contraction_check(t, point1(2.0), point1(1.0), cfg);
  CHECK(rep.q == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(rep.num_violations == 0);
  REQUIRE(rep.steps.size() == 11);
  for (const ContractionStep& s : rep.steps) {
    CHECK(std::abs(s.lhs - s.bound) <= 1e-12);
    CHECK(s.lhs == doctest::Approx(std::pow(0.5, s.t)).epsilon(1e-12));
  }
}

TEST_CASE("contraction requires a strictly contractive stepsize") {
  const TaskInstance t = scalar_task(1.0, 0.0, 1.0, 0.0);
  InnerLoopConfig cfg;
  cfg.num_steps = 3;

  cfg.alpha = 1.0;  // q = (1 - alpha)^2 = 0 with mu = L = 1
  CHECK_THROWS_WITH_AS(contraction_check(t, point1(1.0), point1(0.0), cfg),
                       doctest::Contains("must be positive"), ConfigError);

  cfg.alpha = 2.0;  // q = 1: no contraction
  CHECK_THROWS_WITH_AS(contraction_check(t, point1(1.0), point1(0.0), cfg),
                       doctest::Contains("must be below 1"), ConfigError);

  TaskInstance nc = scalar_task(1.0, 0.0, 1.0, 0.0);
  nc.geometry = Geometry::kNonconvex;
  cfg.alpha = 0.5;
  CHECK_THROWS_AS(contraction_check(nc, point1(1.0), point1(0.0), cfg), ConfigError);
}

TEST_CASE("sampled strongly convex tasks never violate the two-point contraction bound") {
  const std::vector<TaskInstance> tasks = sample_task_family(small_sc_spec(77), 20);
  std::mt19937_64 rng = make_rng(77, RngStream::kPoints);
  std::normal_distribution<double> normal(0.0, 1.0);
  InnerLoopConfig cfg;
  cfg.alpha = 0.5;  // q = 1 - 2*0.5*0.5 + 0.25 = 0.75
  cfg.num_steps = 10;

  for (const TaskInstance& t : tasks) {
    Vector w1(4), w2(4), f1(4), f2(4);
    for (Index i = 0; i < 4; ++i) {
      w1(i) = normal(rng);
      w2(i) = normal(rng);
      f1(i) = normal(rng);
      f2(i) = normal(rng);
    }
    const ContractionReport rep = contraction_check(t, {w1, f1}, {w2, f2}, cfg);
    CHECK(rep.num_violations == 0);
    CHECK(rep.q == doctest::Approx(0.75).epsilon(1e-12));
  }
}
