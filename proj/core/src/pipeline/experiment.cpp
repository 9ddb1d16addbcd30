// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <tuple>

#include "imuloc/io/csv.hpp"
#include "imuloc/parallel.hpp"
#include "imuloc/pipeline/pipeline.hpp"
#include "internal.hpp"

namespace imuloc::pipeline {

namespace {

using json = nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) { return mix_seed(mix_seed(seed) ^ salt); }

constexpr std::uint64_t kSaltImu = 0x11;
constexpr std::uint64_t kSaltCp = 0x12;
constexpr std::uint64_t kSaltSplit = 0x13;
constexpr std::uint64_t kSaltFit = 0x14;
constexpr std::uint64_t kSaltSupervised = 0x15;
constexpr std::uint64_t kSaltDeadReckoning = 0x16;

}  // namespace

json PreprocessConfig::to_json() const {
  return {{"feature_bins", features.feature_bins},
          {"kind", features.kind == csi::FeatureKind::kMagnitude ? "magnitude" : "complex"},
          {"snr_threshold_db", features.snr_threshold_db},
          {"reference_trp", align.reference_trp},
          {"reference_antenna", align.reference_antenna},
          {"target_bin", align.target_bin},
          {"peak_threshold", align.threshold.value}};
}

PreprocessConfig PreprocessConfig::from_json(const json& j) {
  PreprocessConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "feature_bins") c.features.feature_bins = value.get<std::size_t>();
    else if (key == "snr_threshold_db") c.features.snr_threshold_db = value.get<double>();
    else if (key == "reference_trp") c.align.reference_trp = value.get<std::size_t>();
    else if (key == "reference_antenna") c.align.reference_antenna = value.get<std::size_t>();
    else if (key == "target_bin") c.align.target_bin = value.get<std::size_t>();
    else if (key == "peak_threshold") c.align.threshold = csi::PeakThreshold::max_fraction(value.get<double>());
    else if (key == "kind") {
      const auto k = value.get<std::string>();
      if (k == "magnitude") c.features.kind = csi::FeatureKind::kMagnitude;
      else if (k == "complex") c.features.kind = csi::FeatureKind::kComplex;
      else throw ConfigError("preprocess.kind must be 'magnitude' or 'complex'");
    } else {
      throw ConfigError("unknown key preprocess." + key);
    }
  }
  c.features.reference_trp = c.align.reference_trp;
  c.features.reference_antenna = c.align.reference_antenna;
  if (c.features.feature_bins == 0) throw ConfigError("preprocess.feature_bins must be positive");
  if (!(c.align.threshold.value > 0 && c.align.threshold.value < 1)) {
    throw ConfigError("preprocess.peak_threshold must be in (0, 1)");
  }
  return c;
}

json EpochSchedule::to_json() const { return {{"supervised", supervised}, {"refinement", refinement}}; }

void AblationSpec::validate() const {
  static const std::set<std::string> knobs{"cp_noise_sigma", "cp_count", "cp_radius", "snr_threshold"};
  if (!knobs.count(knob)) {
    throw ConfigError("ablation.knob must be one of cp_noise_sigma, cp_count, cp_radius, snr_threshold");
  }
  if (values.empty()) throw ConfigError("ablation.values must be non-empty");
  if (!(radius_m >= 0)) throw ConfigError("ablation.radius_m must be >= 0");
}

json AblationSpec::to_json() const { return {{"knob", knob}, {"values", values}, {"radius_m", radius_m}}; }

void ExperimentConfig::validate() const {
  scenario.validate();
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  fit.validate();
  train.validate();
  if (epochs.supervised < 0) throw ConfigError("epochs.supervised must be >= 0");
  if (epochs.refinement.empty()) throw ConfigError("epochs.refinement needs at least one entry");
  for (int e : epochs.refinement) {
    if (e < 0) throw ConfigError("epochs.refinement entries must be >= 0");
  }
  if (!(pseudo_label_noise_m >= 0)) throw ConfigError("pseudo_label_noise_m must be >= 0");
  smoother.validate();
  if (knn_k < 1) throw ConfigError("knn_k must be >= 1");
  if (preprocess.align.reference_trp >= scenario.trps.size() ||
      preprocess.align.reference_antenna >= static_cast<std::size_t>(scenario.antennas_per_trp)) {
    throw ConfigError("preprocess reference antenna does not exist in the scenario");
  }
  if (ablation) ablation->validate();
}

json ExperimentConfig::to_json() const {
  json j = {{"scenario", scenario.to_json()},
            {"seeds", seeds},
            {"preprocess", preprocess.to_json()},
            {"fit", fit.to_json()},
            {"train", train.to_json()},
            {"epochs", epochs.to_json()},
            {"pseudo_label_noise_m", pseudo_label_noise_m},
            {"smoother", smoother.to_json()},
            {"smooth_predictions", smooth_predictions},
            {"knn_k", knn_k},
            {"restrict_to_enclosed", restrict_to_enclosed},
            {"train_dead_reckoning_model", train_dead_reckoning_model}};
  if (ablation) j["ablation"] = ablation->to_json();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  c.scenario = sim::ScenarioConfig::warehouse();
  for (std::uint64_t s = 0; s < 30; ++s) c.seeds.push_back(s);
  try {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "scenario") c.scenario = sim::ScenarioConfig::from_json(value);
      else if (key == "seeds") c.seeds = value.get<std::vector<std::uint64_t>>();
      else if (key == "seed_count") {
        const auto n = value.get<std::uint64_t>();
        c.seeds.clear();
        for (std::uint64_t s = 0; s < n; ++s) c.seeds.push_back(s);
      } else if (key == "preprocess") c.preprocess = PreprocessConfig::from_json(value);
      else if (key == "fit") c.fit = fit::FitConfig::from_json(value);
      else if (key == "train") c.train = model::TrainConfig::from_json(value);
      else if (key == "epochs") {
        read(value, "supervised", c.epochs.supervised);
        read(value, "refinement", c.epochs.refinement);
        for (const auto& [k, v] : value.items()) {
          if (k != "supervised" && k != "refinement") throw ConfigError("unknown key epochs." + k);
        }
      } else if (key == "pseudo_label_noise_m") c.pseudo_label_noise_m = value.get<double>();
      else if (key == "smoother") c.smoother = eval::SmootherConfig::from_json(value);
      else if (key == "smooth_predictions") c.smooth_predictions = value.get<bool>();
      else if (key == "knn_k") c.knn_k = value.get<int>();
      else if (key == "restrict_to_enclosed") c.restrict_to_enclosed = value.get<bool>();
      else if (key == "train_dead_reckoning_model") c.train_dead_reckoning_model = value.get<bool>();
      else if (key == "ablation") {
        AblationSpec a;
        a.knob = value.at("knob").get<std::string>();
        a.values = value.at("values").get<std::vector<double>>();
        read(value, "radius_m", a.radius_m);
        c.ablation = a;
      } else if (key == "$comment") {
        continue;
      } else {
        throw ConfigError("unknown top-level key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::filesystem::path default_output_root() {
  if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') return env;
  return "runs";
}

// ---------------------------------------------------------------- in memory

sim::CfrDataset simulate_channel(const sim::ScenarioConfig& scenario, const sim::TrajectorySeries& truth) {
  return sim::synth_csi(truth, scenario, derive(scenario.dataset_seed, 0x21));
}

csi::FeatureMatrix preprocess(const sim::CfrDataset& cfr, const PreprocessConfig& config,
                              csi::AlignmentReport* report) {
  const csi::CirDataset cir = csi::cfr_to_cir(cfr);
  const csi::CirDataset aligned = csi::align_los(cir, config.align, report);
  return csi::filter_and_normalize(aligned, config.features);
}

std::vector<std::size_t> sample_of_rows(const sim::CfrDataset& cfr, const csi::FeatureMatrix& features) {
  std::vector<std::size_t> out;
  out.reserve(features.kept.size());
  for (std::size_t k : features.kept) out.push_back(static_cast<std::size_t>(cfr.sample_index.at(k)));
  return out;
}

SharedData build_shared(const ExperimentConfig& config) {
  SharedData d;
  d.truth = sim::simulate_trajectory(config.scenario, config.scenario.dataset_seed);
  const auto cfr = simulate_channel(config.scenario, d.truth);
  d.features = preprocess(cfr, config.preprocess, &d.alignment);
  d.sample_of_row = sample_of_rows(cfr, d.features);
  return d;
}

std::pair<sim::ImuSeries, std::vector<sim::ControlPoint>> simulate_sensors(const ExperimentConfig& config,
                                                                            const sim::TrajectorySeries& truth,
                                                                            std::uint64_t seed) {
  sim::ImuNoiseConfig imu = config.scenario.imu;
  imu.seed = derive(seed, kSaltImu);
  auto series = sim::simulate_imu(truth, imu);
  auto cps = sim::place_control_points(truth, config.scenario.control_points, derive(seed, kSaltCp));
  if (cps.empty()) throw ConfigError("seed " + std::to_string(seed) + ": no control point was visited");
  return {std::move(series), std::move(cps)};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(
    const ExperimentConfig& config, const std::vector<sim::ControlPoint>& control_points,
    const std::vector<std::size_t>& sample_of_row, std::uint64_t seed) {
  if (control_points.empty()) throw InputError("split_rows: no control points");
  auto [train, test] = sim::split_samples(sample_of_row.size(), config.scenario.train_fraction, derive(seed, kSaltSplit));
  const std::size_t lo = control_points.front().sample_index;
  const std::size_t hi = control_points.back().sample_index;
  auto keep = [&](std::size_t row) {
    const std::size_t s = sample_of_row[row];
    return !config.restrict_to_enclosed || (s >= lo && s <= hi);
  };
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t r : train) {
    if (keep(r)) out.first.push_back(r);
  }
  for (std::size_t r : test) {
    if (keep(r)) out.second.push_back(r);
  }
  if (out.first.empty()) {
    throw ConfigError("seed " + std::to_string(seed) + ": no training sample lies between control points");
  }
  return out;
}

SeedInputs simulate_seed(const ExperimentConfig& config, const sim::TrajectorySeries& truth,
                         const std::vector<std::size_t>& sample_of_row, std::uint64_t seed) {
  SeedInputs in;
  std::tie(in.imu, in.control_points) = simulate_sensors(config, truth, seed);
  std::tie(in.train_rows, in.test_rows) = split_rows(config, in.control_points, sample_of_row, seed);
  return in;
}

eval::RefinementData refinement_data(const SharedData& shared, const SeedInputs& inputs) {
  eval::RefinementData d;
  d.features = &shared.features.features;
  d.layout = shared.features.layout;
  d.sample_of_row = shared.sample_of_row;
  d.train_rows = inputs.train_rows;
  d.test_rows = inputs.test_rows;
  d.imu = &inputs.imu;
  d.control_points = &inputs.control_points;
  d.truth = &shared.truth.positions;
  d.timestamps = &shared.truth.timestamps;
  return d;
}

namespace {

std::vector<std::size_t> train_samples(const SharedData& shared, const SeedInputs& inputs) {
  std::vector<std::size_t> out;
  for (std::size_t r : inputs.train_rows) out.push_back(shared.sample_of_row[r]);
  return out;
}

eval::ErrorReport label_error(const RowMatrix& labels, const RowMatrix& truth, const std::vector<std::size_t>& samples) {
  return eval::ErrorReport::from_errors(
      eval::horizontal_error(eval::select_rows(labels, samples), eval::select_rows(truth, samples)));
}

eval::RefinementConfig refinement_config(const ExperimentConfig& config) {
  eval::RefinementConfig rc;
  rc.fit = config.fit;
  rc.train = config.train;
  rc.train.label_noise_m = config.pseudo_label_noise_m;
  rc.epochs = config.epochs.refinement;
  rc.smoother = config.smoother;
  rc.smooth_predictions = config.smooth_predictions;
  return rc;
}

}  // namespace

LabelSet fit_labels(const ExperimentConfig& config, const SharedData& shared, const SeedInputs& inputs,
                    std::uint64_t seed) {
  LabelSet out;
  out.forward_backward = fit::fit_trajectory(inputs.imu, inputs.control_points, config.fit, derive(seed, kSaltFit));
  out.dead_reckoning = fit::dead_reckoning_labels(inputs.imu, inputs.control_points);
  const auto samples = train_samples(shared, inputs);
  out.fb_error = label_error(out.forward_backward.pseudo_labels, shared.truth.positions, samples);
  out.dr_error = label_error(out.dead_reckoning.pseudo_labels, shared.truth.positions, samples);
  return out;
}

namespace detail {

eval::RefinementConfig make_refinement_config(const ExperimentConfig& config) { return refinement_config(config); }
std::uint64_t refine_seed(std::uint64_t seed) { return derive(seed, kSaltFit); }
std::uint64_t supervised_seed(std::uint64_t seed) { return derive(seed, kSaltSupervised); }
std::uint64_t dead_reckoning_seed(std::uint64_t seed) { return derive(seed, kSaltDeadReckoning); }
std::vector<std::size_t> train_samples_of(const SharedData& shared, const SeedInputs& inputs) {
  return train_samples(shared, inputs);
}

}  // namespace detail

using detail::dead_reckoning_seed;
using detail::refine_seed;
using detail::supervised_seed;

SeedOutcome run_seed(const ExperimentConfig& config, const SharedData& shared, std::uint64_t seed,
                     const SeedRunOptions& options) {
  SeedOutcome out;
  out.seed = seed;
  const SeedInputs inputs = simulate_seed(config, shared.truth, shared.sample_of_row, seed);
  const LabelSet labels = fit_labels(config, shared, inputs, seed);
  out.fb_labels = labels.fb_error;
  out.dr_labels = labels.dr_error;
  const eval::RefinementData data = refinement_data(shared, inputs);
  const auto samples = train_samples(shared, inputs);
  const RowMatrixF train_x = eval::select_rows(shared.features.features, inputs.train_rows);

  if (options.supervised) {
    model::TrainConfig tc = config.train;
    tc.epochs = config.epochs.supervised;
    tc.label_noise_m = 0;
    const auto trained = model::train_mlp(train_x, eval::select_rows(shared.truth.positions, samples),
                                          shared.features.layout, tc, supervised_seed(seed));
    out.supervised = eval::score_model(trained.final_model, data, config.smoother, config.smooth_predictions);
  }
  if (options.dead_reckoning_model && config.train_dead_reckoning_model) {
    model::TrainConfig tc = config.train;
    tc.epochs = config.epochs.refinement.front();
    tc.label_noise_m = config.pseudo_label_noise_m;
    const auto trained = model::train_mlp(train_x, eval::select_rows(labels.dead_reckoning.pseudo_labels, samples),
                                          shared.features.layout, tc, dead_reckoning_seed(seed));
    out.dead_reckoning_model =
        eval::score_model(trained.final_model, data, config.smoother, config.smooth_predictions);
  }
  if (options.knn && !inputs.test_rows.empty()) {
    model::KnnModel knn{train_x, eval::select_rows(labels.forward_backward.pseudo_labels, samples), config.knn_k};
    out.knn = eval::score_predictions(model::knn_predict(knn, eval::select_rows(shared.features.features, inputs.test_rows)),
                                      data, config.smoother, config.smooth_predictions);
  }
  eval::RefinementConfig rc = refinement_config(config);
  if (options.refinement_iterations >= 0) {
    rc.epochs.resize(std::min<std::size_t>(rc.epochs.size(), static_cast<std::size_t>(options.refinement_iterations)));
  }
  if (!rc.epochs.empty()) out.refinement = eval::refinement_loop(data, rc, refine_seed(seed));
  return out;
}

}  // namespace imuloc::pipeline
