// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "imuloc/parallel.hpp"
#include "imuloc/pipeline/pipeline.hpp"

namespace imuloc::pipeline {

ExperimentConfig with_knob(const ExperimentConfig& config, const std::string& knob, double value, double radius_m) {
  ExperimentConfig c = config;
  c.ablation.reset();
  auto& cp = c.scenario.control_points;
  if (knob == "cp_noise_sigma") {
    if (!(value >= 0)) throw ConfigError("cp_noise_sigma values must be >= 0");
    cp.position_noise_sigma_m = value;
  } else if (knob == "cp_count") {
    if (!(value >= 1) || value != std::floor(value)) throw ConfigError("cp_count values must be positive integers");
    cp.mode = sim::ControlPointSpec::Mode::kRandom;
    cp.random_count = static_cast<std::size_t>(value);
    cp.radius_m = radius_m;
  } else if (knob == "cp_radius") {
    if (!(value >= 0)) throw ConfigError("cp_radius values must be >= 0");
    cp.mode = sim::ControlPointSpec::Mode::kRandom;
    cp.radius_m = value;
  } else if (knob == "snr_threshold") {
    c.preprocess.features.snr_threshold_db = value;
  } else {
    throw ConfigError("unknown ablation knob '" + knob + "'");
  }
  return c;
}

io::CsvTable ablation_table(const ExperimentConfig& config, unsigned threads,
                            const std::function<void(const std::string&)>& log) {
  if (!config.ablation) throw ConfigError("config has no 'ablation' section");
  const AblationSpec& spec = *config.ablation;
  spec.validate();
  io::CsvTable table({"knob", "value", "seed", "metric", "mean", "median", "p90"});
  const SeedRunOptions only_imu{false, false, false, 1};

  // Only the SNR knob changes the features; the other knobs reuse them.
  std::optional<SharedData> common;
  if (spec.knob != "snr_threshold") common = build_shared(config);

  for (double value : spec.values) {
    const ExperimentConfig c = with_knob(config, spec.knob, value, spec.radius_m);
    c.validate();
    if (log) log("ablation: " + spec.knob + " = " + io::format_double(value));
    std::optional<SharedData> own;
    if (!common) own = build_shared(c);
    const SharedData& shared = common ? *common : *own;
    std::vector<SeedOutcome> outcomes(c.seeds.size());
    parallel_for(
        outcomes.size(),
        [&](std::size_t b, std::size_t e) {
          for (std::size_t i = b; i < e; ++i) outcomes[i] = run_seed(c, shared, c.seeds[i], only_imu);
        },
        threads);
    for (const auto& o : outcomes) {
      if (o.refinement.empty()) continue;
      const auto& r = o.refinement.front();
      for (const auto& [metric, rep] : {std::pair{"test", &r.test_error}, std::pair{"pseudo_label", &r.pseudo_label_error}}) {
        table.add_row({spec.knob, io::format_double(value), std::to_string(o.seed), metric,
                       io::format_double(rep->mean), io::format_double(rep->median), io::format_double(rep->p90)});
      }
    }
  }
  return table;
}

io::CsvTable run_ablation(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const io::CsvTable table = ablation_table(config, options.threads, options.log);
  const auto dir = options.out_dir / "ablation";
  std::filesystem::create_directories(dir);
  table.write(dir / (config.ablation->knob + ".csv"));
  return table;
}

}  // namespace imuloc::pipeline
