// Command-line front end for the meta-optimization laboratory. Each
// subcommand runs one canned experiment and writes results.csv, manifest.json
// and summary.txt to the output directory; `replay` re-runs a manifest and
// verifies the results byte for byte.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "anil/harness.hpp"

namespace {

using anil::ExperimentConfig;
using anil::Geometry;

int run_one(anil::Experiment e, const std::string& config_path, const std::string& out_dir,
            const std::optional<std::uint64_t>& seed, Geometry geometry) {
  ExperimentConfig cfg;
  try {
    if (config_path.empty()) {
      cfg = anil::default_config(e, geometry);
      cfg.output_dir = std::string("out/") + anil::to_string(e) + "/" + anil::to_string(geometry);
    } else {
      cfg = anil::parse_config_file(config_path);
      if (cfg.experiment != e) {
        std::cerr << "config error: config file is for experiment " << anil::to_string(cfg.experiment)
                  << ", not " << anil::to_string(e) << "\n";
        return anil::kExitConfigError;
      }
    }
  } catch (const anil::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return anil::kExitConfigError;
  }
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seed.has_value()) {
    cfg.family.seed = *seed;
    cfg.outer.seed = *seed;
  }

  const anil::ExperimentResult res = anil::run_experiment(cfg);
  std::cout << res.summary;
  if (res.exit_code != anil::kExitConfigError) {
    std::cout << "outputs written to " << res.output_dir << "\n";
  }
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meta-optimization laboratory for two-level synthetic task families"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string geometry_name = "strongly_convex";

  struct SubSpec {
    anil::Experiment experiment;
    CLI::App* sub;
    CLI::Option* geometry_opt;
  };
  std::vector<SubSpec> subs;
  const auto add_sub = [&](const char* name, const char* desc, anil::Experiment e) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "experiment config JSON file");
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "override the family and run seeds from the config");
    CLI::Option* geo =
        sub->add_option("--geometry", geometry_name, "built-in family when no config is given")
            ->check(CLI::IsMember({"strongly_convex", "nonconvex"}));
    subs.push_back({e, sub, geo});
  };

  add_sub("gradcheck", "compare exact meta-gradients against finite differences",
          anil::Experiment::kGradCheck);
  add_sub("contraction", "check the adapted-iterate contraction bound on sampled task pairs",
          anil::Experiment::kContraction);
  add_sub("smoothness", "estimate block smoothness and compare with closed-form bounds",
          anil::Experiment::kSmoothnessScaling);
  add_sub("sweep", "sweep adaptation depth and measure cost to a population target",
          anil::Experiment::kConvergenceSweep);
  add_sub("compare-maml", "compare split adaptation against full-parameter adaptation cost",
          anil::Experiment::kComplexityCompare);

  std::string manifest_path;
  CLI::App* replay = app.add_subcommand("replay", "re-run a manifest and verify results.csv");
  replay->add_option("--manifest", manifest_path, "path to manifest.json")->required();

  CLI11_PARSE(app, argc, argv);

  if (replay->parsed()) {
    const anil::ReplayReport rep = anil::replay_from_manifest(manifest_path);
    std::cout << rep.detail;
    std::cout << "replay: " << (rep.identical ? "identical" : "MISMATCH") << "\n";
    return rep.identical ? anil::kExitPass : anil::kExitTrendFail;
  }

  for (const SubSpec& s : subs) {
    if (!s.sub->parsed()) continue;
    const Geometry geometry = geometry_name == "nonconvex" ? Geometry::kNonconvex
                                                           : Geometry::kStronglyConvex;
    // gradcheck with no config and no explicit geometry runs both families
    if (s.experiment == anil::Experiment::kGradCheck && config_path.empty() &&
        s.geometry_opt->count() == 0) {
      const std::string base = out_dir.empty() ? std::string("out/grad_check") : out_dir;
      int code = 0;
      for (Geometry g : {Geometry::kStronglyConvex, Geometry::kNonconvex}) {
        const std::string sub_dir = base + "/" + anil::to_string(g);
        code = std::max(code, run_one(s.experiment, "", sub_dir, seed, g));
      }
      return code;
    }
    return run_one(s.experiment, config_path, out_dir, seed, geometry);
  }
  return anil::kExitConfigError;
}
