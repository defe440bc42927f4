#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "anil/harness.hpp"
#include "anil/io.hpp"
#include "anil/task.hpp"
#include "anil/types.hpp"
#include "helpers.hpp"

using namespace anil;
using anil_test::small_sc_spec;
using nlohmann::json;

namespace {

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

ExperimentConfig tiny_gradcheck() {
  ExperimentConfig cfg = default_config(Experiment::kGradCheck, Geometry::kStronglyConvex);
  cfg.family = small_sc_spec(5, 3, 2);
  cfg.num_tasks = 5;
  cfg.check_depths = {0, 2};
  return cfg;
}

}  // namespace

TEST_CASE("hashing matches the published reference values") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(content_hash_hex("") == "cbf29ce484222325");
  CHECK(content_hash_hex("abc").size() == 16);
}

TEST_CASE("doubles survive the shortest-round-trip text format") {
  for (double x : {0.1, 1.0, -2.5, 3.141592653589793, 1e-300, 6.25e-2, 1e300}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("family specs and task pools round-trip through JSON exactly") {
  const TaskFamilySpec spec = anil_test::small_nc_spec(91, 3, 2);
  const TaskFamilySpec back = spec_from_json(spec_to_json(spec));
  CHECK(back.geometry == spec.geometry);
  CHECK(back.mu == spec.mu);
  CHECK(back.smoothness_L == spec.smoothness_L);
  CHECK(back.lipschitz_M == spec.lipschitz_M);
  CHECK(back.rho == spec.rho);
  CHECK(back.tau == spec.tau);
  CHECK(back.n_w == spec.n_w);
  CHECK(back.n_phi == spec.n_phi);
  CHECK(back.seed == spec.seed);
  CHECK(back.nonconvexity_amplitude == spec.nonconvexity_amplitude);
  CHECK(back.operating_radius == spec.operating_radius);

  const std::vector<TaskInstance> pool = sample_task_family(spec, 3);
  const json j = pool_to_json(pool);
  const std::vector<TaskInstance> pool_back = pool_from_json(j);
  REQUIRE(pool_back.size() == 3);
  CHECK(pool_to_json(pool_back).dump() == j.dump());
  CHECK((pool_back[1].inner.A - pool[1].inner.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK(pool_back[2].cert.required_m == pool[2].cert.required_m);
}

TEST_CASE("task pool deserialization rejects foreign versions and malformed data") {
  json bad;
  bad["format_version"] = 99;
  bad["tasks"] = json::array();
  CHECK_THROWS_WITH_AS(pool_from_json(bad), doctest::Contains("format_version"), ConfigError);

  json spec_j = spec_to_json(small_sc_spec());
  spec_j.erase("mu");
  CHECK_THROWS_WITH_AS(spec_from_json(spec_j), doctest::Contains("malformed family spec"),
                       ConfigError);
}

TEST_CASE("experiment configs round-trip through their JSON form") {
  for (Experiment e :
       {Experiment::kGradCheck, Experiment::kContraction, Experiment::kSmoothnessScaling,
        Experiment::kConvergenceSweep, Experiment::kComplexityCompare}) {
    for (Geometry g : {Geometry::kStronglyConvex, Geometry::kNonconvex}) {
      const ExperimentConfig cfg = default_config(e, g);
      const json j = config_to_json(cfg);
      const ExperimentConfig back = parse_config(j);
      CHECK(config_to_json(back).dump() == j.dump());
    }
  }
}

TEST_CASE("config parsing reports precise field paths") {
  json base = config_to_json(tiny_gradcheck());

  SUBCASE("unknown top-level field") {
    base["bogus"] = 1;
    CHECK_THROWS_WITH_AS(parse_config(base), doctest::Contains("bogus: unknown field"),
                         ConfigError);
  }
  SUBCASE("unknown nested field") {
    base["outer"]["turbo"] = true;
    CHECK_THROWS_WITH_AS(parse_config(base), doctest::Contains("outer.turbo: unknown field"),
                         ConfigError);
  }
  SUBCASE("type mismatch names the path") {
    base["family"]["mu"] = "half";
    CHECK_THROWS_WITH_AS(parse_config(base), doctest::Contains("family.mu: expected a number"),
                         ConfigError);
  }
  SUBCASE("missing family block") {
    base.erase("family");
    CHECK_THROWS_WITH_AS(parse_config(base), doctest::Contains("family"), ConfigError);
  }
  SUBCASE("inconsistent curvature constants keep their message") {
    base["family"]["mu"] = 2.0;
    CHECK_THROWS_WITH_AS(parse_config(base), doctest::Contains("mu exceeds smoothness_L"),
                         ConfigError);
  }
  SUBCASE("negative batch size is rejected") {
    base["outer"]["batch_size"] = -4;
    CHECK_THROWS_WITH_AS(parse_config(base), doctest::Contains("batch_size"), ConfigError);
  }
  SUBCASE("unknown experiment name") {
    base["experiment"] = "mystery";
    CHECK_THROWS_WITH_AS(parse_config(base), doctest::Contains("unknown experiment"),
                         ConfigError);
  }
}

TEST_CASE("every results schema starts with its documented header") {
  ExperimentConfig gc = tiny_gradcheck();
  CHECK(first_line(compute_experiment(gc).results_csv) ==
        "geometry,n_steps,tasks,max_rel_err_w,max_rel_err_phi,tolerance,pass");

  ExperimentConfig ct = default_config(Experiment::kContraction, Geometry::kStronglyConvex);
  ct.family = small_sc_spec(6, 3, 2);
  ct.num_tasks = 5;
  CHECK(first_line(compute_experiment(ct).results_csv) ==
        "task_id,q,steps,violations,max_gap");

  ExperimentConfig sm = default_config(Experiment::kSmoothnessScaling,
                                       Geometry::kStronglyConvex);
  sm.family = small_sc_spec(7, 3, 2);
  sm.probe_depths = {1, 2};
  sm.probe_pool_size = 4;
  sm.probe_pairs = 8;
  CHECK(first_line(compute_experiment(sm).results_csv) ==
        "block,N,estimate,theory_bound,pass");

  ExperimentConfig cc = default_config(Experiment::kComplexityCompare,
                                       Geometry::kStronglyConvex);
  cc.family = small_sc_spec(8, 2, 3);
  cc.outer.batch_size = 2;
  cc.outer.max_outer_iters = 5;
  cc.eval_pool_size = 4;
  const ExperimentOutputs cc_out = compute_experiment(cc);
  CHECK(first_line(cc_out.results_csv) ==
        "method,n_steps,batch_size,iters,grad_entries,hessian_entries,mixed_entries,"
        "second_order_total,expected_second_order,final_pop_grad_w_sq,final_pop_grad_phi_sq");
  CHECK(cc_out.exit_code == kExitPass);
  // B=2, K=5, N=3, n_w=2, n_phi=3: split charges 2*5*3*(4+6) = 300 entries.
  CHECK(cc_out.results_csv.find("anil,3,2,5,") != std::string::npos);
  CHECK(cc_out.results_csv.find(",300,300,") != std::string::npos);
  // Full adaptation charges 2*5*3*(2+3)^2 = 750.
  CHECK(cc_out.results_csv.find(",750,750,") != std::string::npos);
}

TEST_CASE("telemetry files use the documented run schema") {
  ExperimentConfig cc = default_config(Experiment::kComplexityCompare,
                                       Geometry::kStronglyConvex);
  cc.family = small_sc_spec(8, 2, 3);
  cc.outer.batch_size = 2;
  cc.outer.max_outer_iters = 5;
  cc.eval_pool_size = 4;
  const ExperimentOutputs out = compute_experiment(cc);
  REQUIRE(out.extra_files.size() == 2);
  CHECK(out.extra_files[0].first == "runs/compare_anil.csv");
  CHECK(first_line(out.extra_files[0].second) ==
        "iter,grad_w_sq,grad_phi_sq,pop_grad_w_sq,pop_grad_phi_sq,grad_entries,"
        "second_order_entries,elapsed_ms");
}

TEST_CASE("a gradient check run passes, writes its artifacts and replays byte-for-byte") {
  ExperimentConfig cfg = tiny_gradcheck();
  cfg.output_dir = "test_out/gradcheck_small";
  std::filesystem::remove_all(cfg.output_dir);

  const ExperimentResult res = run_experiment(cfg);
  CHECK(res.exit_code == kExitPass);
  CHECK(res.summary.find("pass") != std::string::npos);

  const std::filesystem::path dir(cfg.output_dir);
  REQUIRE(std::filesystem::exists(dir / "results.csv"));
  REQUIRE(std::filesystem::exists(dir / "summary.txt"));
  REQUIRE(std::filesystem::exists(dir / "manifest.json"));

  const json manifest = json::parse(read_text_file((dir / "manifest.json").string()));
  CHECK(manifest.at("format_version").get<int>() == 1);
  CHECK(manifest.at("experiment").get<std::string>() == "grad_check");
  const std::string results = read_text_file((dir / "results.csv").string());
  CHECK(manifest.at("results_hash").get<std::string>() == content_hash_hex(results));

  const ReplayReport rep = replay_from_manifest((dir / "manifest.json").string());
  CHECK(rep.identical);
  CHECK(rep.detail.find("hash match: yes") != std::string::npos);

  // Tampering with the stored results is detected.
  write_text_file((dir / "results.csv").string(), results + "tamper\n");
  const ReplayReport bad = replay_from_manifest((dir / "manifest.json").string());
  CHECK_FALSE(bad.identical);
}

TEST_CASE("invalid configurations exit with the configuration error code") {
  ExperimentConfig cfg = tiny_gradcheck();
  cfg.family.mu = 2.0;  // exceeds smoothness_L
  cfg.output_dir = "test_out/never_written";
  std::filesystem::remove_all(cfg.output_dir);
  const ExperimentResult res = run_experiment(cfg);
  CHECK(res.exit_code == kExitConfigError);
  CHECK(res.summary.find("config error") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(cfg.output_dir));
}

TEST_CASE("default configurations are valid for every experiment and geometry") {
  for (Experiment e :
       {Experiment::kGradCheck, Experiment::kContraction, Experiment::kSmoothnessScaling,
        Experiment::kConvergenceSweep, Experiment::kComplexityCompare}) {
    for (Geometry g : {Geometry::kStronglyConvex, Geometry::kNonconvex}) {
      const ExperimentConfig cfg = default_config(e, g);
      CHECK_NOTHROW(validate_spec(cfg.family));
      CHECK_NOTHROW(validate_outer(cfg.outer));
      CHECK_NOTHROW(parse_config(config_to_json(cfg)));
    }
  }
}

TEST_CASE("experiment names are stable strings") {
  CHECK(std::string(to_string(Experiment::kGradCheck)) == "grad_check");
  CHECK(std::string(to_string(Experiment::kContraction)) == "contraction");
  CHECK(std::string(to_string(Experiment::kSmoothnessScaling)) == "smoothness_scaling");
  CHECK(std::string(to_string(Experiment::kConvergenceSweep)) == "convergence_sweep");
  CHECK(std::string(to_string(Experiment::kComplexityCompare)) == "complexity_compare");
}
