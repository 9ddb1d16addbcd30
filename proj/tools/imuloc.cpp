// SPDX-License-Identifier: Apache-2.0
//
// imuloc: stage-wise pipeline runner.
//
//   imuloc simulate --config configs/warehouse.json --out runs/wh
//   imuloc reproduce-tables --config configs/warehouse.json --seeds 0,1,2

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "imuloc/io/csv.hpp"
#include "imuloc/parallel.hpp"
#include "imuloc/pipeline/pipeline.hpp"

namespace {

namespace pl = imuloc::pipeline;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct GlobalOptions {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
  bool no_cache = false;
  bool quiet = false;
};

pl::ExperimentConfig load_config(const GlobalOptions& g) {
  pl::ExperimentConfig c = g.config.empty() ? pl::ExperimentConfig::from_json(nlohmann::json::object())
                                            : pl::ExperimentConfig::load(g.config);
  if (g.seed) c.seeds = {*g.seed};
  if (!g.seeds.empty()) c.seeds = g.seeds;
  c.validate();
  return c;
}

pl::RunOptions run_options(const GlobalOptions& g) {
  pl::RunOptions o;
  o.out_dir = g.out.empty() ? pl::default_output_root() : std::filesystem::path(g.out);
  o.use_cache = !g.no_cache;
  o.threads = g.threads == 0 ? imuloc::thread_count() : g.threads;
  if (!g.quiet) o.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  return o;
}

void print_report(const pl::RunReport& r, bool quiet) {
  if (quiet) return;
  std::cerr << "executed " << r.executed.size() << ", cached " << r.cached.size() << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"IMU-supervised 5G indoor localization pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seeds", g.seeds, "Seed list, overrides the config")->delimiter(',');
  app.add_option("--seed", g.seed, "Single seed, overrides the config");
  app.add_option("--out", g.out, std::string("Output directory (default: $") + pl::kOutputRootEnv + " or ./runs)");
  app.add_option("--threads", g.threads, "Worker threads (default: hardware concurrency)");
  app.add_flag("--no-cache", g.no_cache, "Recompute every stage");
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress output");

  struct StageCommand {
    pl::Stage stage;
    const char* help;
  };
  const StageCommand stages[] = {
      {pl::Stage::kSimulate, "Simulate trajectory, channel, IMU and control points"},
      {pl::Stage::kPreprocess, "CFR to CIR, LoS alignment, SNR filter, features"},
      {pl::Stage::kFit, "Forward-backward trajectory fit (pseudo-labels)"},
      {pl::Stage::kTrain, "Train supervised, dead-reckoning, k-NN and IMU-supervised models"},
      {pl::Stage::kRefine, "Iterative refinement"},
      {pl::Stage::kEvaluate, "Score models and write tables"},
  };
  std::vector<std::pair<CLI::App*, pl::Stage>> stage_apps;
  for (const auto& s : stages) stage_apps.emplace_back(app.add_subcommand(pl::stage_name(s.stage), s.help), s.stage);
  auto* ablate = app.add_subcommand("ablate", "Sweep the configured ablation knob");
  auto* tables = app.add_subcommand("reproduce-tables", "Run every stage and print the result tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (g.threads > 0) imuloc::set_thread_count(g.threads);
  const pl::ExperimentConfig config = load_config(g);
  const pl::RunOptions options = run_options(g);

  for (const auto& [sub, stage] : stage_apps) {
    if (sub->parsed()) {
      print_report(pl::run_stage(config, stage, options), g.quiet);
      return kExitOk;
    }
  }
  if (ablate->parsed()) {
    const auto table = pl::run_ablation(config, options);
    std::cout << table.to_string();
    return kExitOk;
  }
  if (tables->parsed()) {
    print_report(pl::run_pipeline(config, pl::all_stages(), options), g.quiet);
    std::cout << imuloc::io::read_text(options.out_dir / "evaluate" / "summary.txt");
    return kExitOk;
  }
  return kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const imuloc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const imuloc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
