// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>

#include "imuloc/io/container.hpp"
#include "imuloc/io/hash.hpp"
#include "imuloc/parallel.hpp"
#include "imuloc/pipeline/pipeline.hpp"
#include "imuloc/sim/dataset_io.hpp"
#include "internal.hpp"

namespace imuloc::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kSimulate: return "simulate";
    case Stage::kPreprocess: return "preprocess";
    case Stage::kFit: return "fit";
    case Stage::kTrain: return "train";
    case Stage::kRefine: return "refine";
    case Stage::kEvaluate: return "evaluate";
  }
  return "?";
}

std::vector<Stage> all_stages() {
  return {Stage::kSimulate, Stage::kPreprocess, Stage::kFit, Stage::kTrain, Stage::kRefine, Stage::kEvaluate};
}

namespace {

constexpr const char* kStamp = "stamp.json";

std::string file_hash(const fs::path& path) {
  io::Sha256 h;
  h.update_file(path);
  return h.hex_digest();
}

/// Cache key builder: stage tag, config fragments and input file hashes.
class Key {
 public:
  explicit Key(const std::string& stage) : text_("imuloc-stage-v1:" + stage + "\n") {}
  Key& json(const nlohmann::json& j) {
    text_ += j.dump();
    text_ += "\n";
    return *this;
  }
  Key& file(const fs::path& path) {
    text_ += path.filename().string() + "=" + file_hash(path) + "\n";
    return *this;
  }
  std::string digest() const { return io::sha256_hex(text_); }

 private:
  std::string text_;
};

struct Paths {
  fs::path root;

  fs::path simulate() const { return root / "simulate"; }
  fs::path dataset() const { return simulate() / "dataset.imlc"; }
  fs::path truth() const { return simulate() / "truth.imlc"; }
  fs::path preprocess() const { return root / "preprocess"; }
  fs::path features() const { return preprocess() / "features.imlc"; }
  fs::path seed(std::uint64_t s) const { return root / ("seed_" + std::to_string(s)); }
  fs::path seed_stage(std::uint64_t s, Stage st) const { return seed(s) / stage_name(st); }
  fs::path evaluate() const { return root / "evaluate"; }
};

class Runner {
 public:
  Runner(const ExperimentConfig& config, const RunOptions& options) : config_(config), options_(options) {
    paths_.root = options.out_dir;
  }

  RunReport report;

  void run(Stage stage) {
    switch (stage) {
      case Stage::kSimulate: simulate(); break;
      case Stage::kPreprocess: preprocess_stage(); break;
      case Stage::kFit: per_seed(stage, [this](std::uint64_t s) { fit_seed(s); }); break;
      case Stage::kTrain: per_seed(stage, [this](std::uint64_t s) { train_seed(s); }); break;
      case Stage::kRefine: per_seed(stage, [this](std::uint64_t s) { refine_seed_stage(s); }); break;
      case Stage::kEvaluate: evaluate(); break;
    }
  }

 private:
  const ExperimentConfig& config_;
  const RunOptions& options_;
  Paths paths_;
  std::mutex mutex_;

  void log(const std::string& msg) {
    if (!options_.log) return;
    std::lock_guard lock(mutex_);
    options_.log(msg);
  }

  void record(const std::string& name, bool executed) {
    std::lock_guard lock(mutex_);
    (executed ? report.executed : report.cached).push_back(name);
  }

  void require(const fs::path& path, Stage producer, Stage consumer) {
    if (!fs::exists(path)) {
      throw DependencyError(std::string("stage '") + stage_name(consumer) + "' needs the output of stage '" +
                            stage_name(producer) + "' (missing " + path.string() + "); run `imuloc " +
                            stage_name(producer) + "` first");
    }
  }

  /// True if `dir` holds a stamp for `key` whose outputs are intact.
  bool cache_hit(const fs::path& dir, const std::string& key, const std::string& name) {
    if (!options_.use_cache) return false;
    const fs::path stamp = dir / kStamp;
    if (!fs::exists(stamp)) return false;
    json j;
    try {
      j = json::parse(io::read_text(stamp));
    } catch (const std::exception&) {
      log("warning: unreadable stamp for " + name + "; recomputing");
      return false;
    }
    if (j.value("key", "") != key) {
      log("warning: stale cache for " + name + " (inputs changed); recomputing");
      return false;
    }
    for (const auto& [file, digest] : j.at("outputs").items()) {
      if (!fs::exists(dir / file) || file_hash(dir / file) != digest.get<std::string>()) {
        log("warning: cached output " + (dir / file).string() + " was modified; recomputing");
        return false;
      }
    }
    return true;
  }

  void begin(const fs::path& dir) {
    fs::create_directories(dir);
    fs::remove(dir / kStamp);
  }

  void commit(const fs::path& dir, const std::string& key, const std::vector<std::string>& files) {
    json outputs = json::object();
    for (const auto& f : files) outputs[f] = file_hash(dir / f);
    io::write_text(dir / kStamp, json{{"key", key}, {"outputs", outputs}}.dump(2) + "\n");
  }

  template <typename Fn>
  void per_seed(Stage stage, Fn&& fn) {
    parallel_for(
        config_.seeds.size(),
        [&](std::size_t b, std::size_t e) {
          for (std::size_t i = b; i < e; ++i) fn(config_.seeds[i]);
        },
        options_.threads);
    (void)stage;
  }

  // ------------------------------------------------------------ loaders

  sim::TrajectorySeries load_truth() { return sim::trajectory_from_container(io::read_container(paths_.truth())); }

  csi::FeatureMatrix load_features(std::vector<std::size_t>* sample_of_row) {
    const auto c = io::read_container(paths_.features());
    csi::FeatureMatrix f;
    const auto& arr = c.at("features");
    const auto values = arr.as_f32();
    f.features = Eigen::Map<const RowMatrixF>(values.data(), static_cast<Eigen::Index>(arr.shape.at(0)),
                                              static_cast<Eigen::Index>(arr.shape.at(1)));
    const auto& l = c.metadata.at("layout");
    f.layout.trps = l.at("trps").get<std::size_t>();
    f.layout.antennas = l.at("antennas").get<std::size_t>();
    f.layout.bins = l.at("bins").get<std::size_t>();
    f.layout.values_per_bin = l.at("values_per_bin").get<std::size_t>();
    for (auto k : c.at("kept").as_i64()) f.kept.push_back(static_cast<std::size_t>(k));
    f.block_norms = c.at("block_norms").as_f32();
    if (sample_of_row != nullptr) {
      sample_of_row->clear();
      for (auto s : c.at("sample_of_row").as_i64()) sample_of_row->push_back(static_cast<std::size_t>(s));
    }
    return f;
  }

  SharedData load_shared() {
    SharedData d;
    d.truth = load_truth();
    d.features = load_features(&d.sample_of_row);
    return d;
  }

  SeedInputs load_inputs(std::uint64_t seed, bool with_split) {
    const fs::path dir = paths_.seed_stage(seed, Stage::kSimulate);
    SeedInputs in;
    in.imu = sim::imu_from_container(io::read_container(dir / "imu.imlc"));
    in.control_points = sim::control_points_from_container(io::read_container(dir / "control_points.imlc"));
    if (with_split) {
      const auto labels = io::read_container(paths_.seed_stage(seed, Stage::kFit) / "labels.imlc");
      for (auto r : labels.at("train_rows").as_i64()) in.train_rows.push_back(static_cast<std::size_t>(r));
      for (auto r : labels.at("test_rows").as_i64()) in.test_rows.push_back(static_cast<std::size_t>(r));
    }
    return in;
  }

  // ------------------------------------------------------------ stages

  void simulate() {
    const fs::path dir = paths_.simulate();
    const std::string key = Key("simulate").json(config_.scenario.to_json()).digest();
    sim::TrajectorySeries truth;
    if (cache_hit(dir, key, "simulate")) {
      record("simulate", false);
      truth = load_truth();
    } else {
      begin(dir);
      log("simulate: trajectory and channel");
      truth = sim::simulate_trajectory(config_.scenario, config_.scenario.dataset_seed);
      const auto cfr = simulate_channel(config_.scenario, truth);
      sim::write_dataset(paths_.dataset(), truth, cfr, {{"scenario", config_.scenario.to_json()}});
      io::write_container(paths_.truth(), sim::trajectory_to_container(truth));
      io::CsvTable csv({"sample", "t", "x", "y", "z"});
      for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        csv.add_row({std::to_string(i), io::format_double(truth.timestamps[i]), io::format_double(truth.positions(r, 0)),
                     io::format_double(truth.positions(r, 1)),
                     truth.dim() > 2 ? io::format_double(truth.positions(r, 2)) : std::string("0")});
      }
      csv.write(dir / "truth.csv");
      commit(dir, key, {"dataset.imlc", "dataset.imlc.json", "truth.imlc", "truth.csv"});
      record("simulate", true);
    }

    per_seed(Stage::kSimulate, [&](std::uint64_t seed) {
      const fs::path sdir = paths_.seed_stage(seed, Stage::kSimulate);
      const std::string skey = Key("simulate-seed")
                                   .json(config_.scenario.to_json())
                                   .json(seed)
                                   .file(paths_.truth())
                                   .digest();
      const std::string name = "simulate/seed_" + std::to_string(seed);
      if (cache_hit(sdir, skey, name)) {
        record(name, false);
        return;
      }
      begin(sdir);
      auto [imu, cps] = simulate_sensors(config_, truth, seed);
      io::write_container(sdir / "imu.imlc", sim::imu_to_container(imu));
      io::write_container(sdir / "control_points.imlc", sim::control_points_to_container(cps, truth.dim()));
      io::CsvTable csv({"sample", "site", "x", "y", "vx", "vy"});
      for (const auto& cp : cps) {
        csv.add_row({std::to_string(cp.sample_index), std::to_string(cp.site), io::format_double(cp.position[0]),
                     io::format_double(cp.position[1]), io::format_double(cp.velocity[0]),
                     io::format_double(cp.velocity[1])});
      }
      csv.write(sdir / "control_points.csv");
      commit(sdir, skey, {"imu.imlc", "control_points.imlc", "control_points.csv"});
      record(name, true);
    });
  }

  void preprocess_stage() {
    require(paths_.dataset(), Stage::kSimulate, Stage::kPreprocess);
    const fs::path dir = paths_.preprocess();
    const std::string key = Key("preprocess").json(config_.preprocess.to_json()).file(paths_.dataset()).digest();
    if (cache_hit(dir, key, "preprocess")) {
      record("preprocess", false);
      return;
    }
    begin(dir);
    log("preprocess: CIR, alignment, features");
    const auto stored = sim::read_dataset(paths_.dataset());
    csi::AlignmentReport report;
    const auto f = preprocess(stored.cfr, config_.preprocess, &report);
    const auto rows = sample_of_rows(stored.cfr, f);
    io::Container c;
    const auto nrows = static_cast<std::uint64_t>(f.features.rows());
    const auto ncols = static_cast<std::uint64_t>(f.features.cols());
    c.arrays.push_back(io::Array::f32("features", {nrows, ncols}, {f.features.data(), static_cast<std::size_t>(f.features.size())}));
    std::vector<std::int64_t> kept(f.kept.begin(), f.kept.end()), sor(rows.begin(), rows.end());
    c.arrays.push_back(io::Array::i64("kept", {kept.size()}, kept));
    c.arrays.push_back(io::Array::i64("sample_of_row", {sor.size()}, sor));
    c.arrays.push_back(io::Array::f32("block_norms", {f.block_norms.size()}, f.block_norms));
    c.metadata = {{"kind", "features"},
                  {"layout",
                   {{"trps", f.layout.trps},
                    {"antennas", f.layout.antennas},
                    {"bins", f.layout.bins},
                    {"values_per_bin", f.layout.values_per_bin}}},
                  {"preprocess", config_.preprocess.to_json()}};
    io::write_container(paths_.features(), c);
    io::write_text(dir / "alignment.json", report.to_json().dump(2) + "\n");
    commit(dir, key, {"features.imlc", "alignment.json"});
    record("preprocess", true);
  }

  Key seed_key(const char* stage, std::uint64_t seed) {
    Key k(stage);
    const fs::path sdir = paths_.seed_stage(seed, Stage::kSimulate);
    k.json(seed).file(paths_.truth()).file(paths_.features()).file(sdir / "imu.imlc").file(sdir / "control_points.imlc");
    return k;
  }

  void fit_seed(std::uint64_t seed) {
    require(paths_.features(), Stage::kPreprocess, Stage::kFit);
    require(paths_.seed_stage(seed, Stage::kSimulate) / "imu.imlc", Stage::kSimulate, Stage::kFit);
    const fs::path dir = paths_.seed_stage(seed, Stage::kFit);
    const std::string name = "fit/seed_" + std::to_string(seed);
    const std::string key = seed_key("fit", seed)
                                .json(config_.fit.to_json())
                                .json({config_.restrict_to_enclosed, config_.scenario.train_fraction})
                                .digest();
    if (cache_hit(dir, key, name)) {
      record(name, false);
      return;
    }
    begin(dir);
    const SharedData shared = load_shared();
    SeedInputs in = load_inputs(seed, false);
    std::tie(in.train_rows, in.test_rows) = split_rows(config_, in.control_points, shared.sample_of_row, seed);
    const LabelSet labels = fit_labels(config_, shared, in, seed);

    io::Container c;
    c.arrays.push_back(sim::matrix_array("forward_backward", labels.forward_backward.pseudo_labels));
    c.arrays.push_back(sim::matrix_array("dead_reckoning", labels.dead_reckoning.pseudo_labels));
    std::vector<std::int64_t> one_sided(labels.forward_backward.one_sided.begin(), labels.forward_backward.one_sided.end());
    std::vector<std::int64_t> train(in.train_rows.begin(), in.train_rows.end()), test(in.test_rows.begin(), in.test_rows.end());
    c.arrays.push_back(io::Array::i64("one_sided", {one_sided.size()}, one_sided));
    c.arrays.push_back(io::Array::i64("train_rows", {train.size()}, train));
    c.arrays.push_back(io::Array::i64("test_rows", {test.size()}, test));
    c.metadata = {{"kind", "pseudo_labels"}, {"fit", config_.fit.to_json()}};
    io::write_container(dir / "labels.imlc", c);

    io::CsvTable seg({"segment", "begin", "end", "initial_loss", "final_loss", "L_x", "L_v", "L_reg", "forward_end_gap_m",
                      "backward_start_gap_m", "steps"});
    for (const auto& d : labels.forward_backward.segments) {
      seg.add_row({std::to_string(d.index), std::to_string(d.begin_sample), std::to_string(d.end_sample),
                   io::format_double(d.initial.total), io::format_double(d.final.total),
                   io::format_double(d.final.position), io::format_double(d.final.velocity),
                   io::format_double(d.final.regularization), io::format_double(d.forward_end_gap),
                   io::format_double(d.backward_start_gap), std::to_string(d.steps_run)});
    }
    seg.write(dir / "segments.csv");
    commit(dir, key, {"labels.imlc", "segments.csv"});
    record(name, true);
  }

  void write_labels(const fs::path& path, const RowMatrix& labels) {
    io::Container c;
    c.arrays.push_back(sim::matrix_array("pseudo_labels", labels));
    c.metadata = {{"kind", "pseudo_labels"}};
    io::write_container(path, c);
  }

  void append_curve(io::CsvTable& t, const std::string& model, const std::vector<double>& curve) {
    for (std::size_t e = 0; e < curve.size(); ++e) t.add_row({model, std::to_string(e), io::format_double(curve[e])});
  }

  json train_json() const {
    return {config_.train.to_json(), config_.epochs.to_json(), config_.pseudo_label_noise_m, config_.knn_k,
            config_.train_dead_reckoning_model, config_.fit.to_json()};
  }

  void train_seed(std::uint64_t seed) {
    const fs::path fit_dir = paths_.seed_stage(seed, Stage::kFit);
    require(fit_dir / "labels.imlc", Stage::kFit, Stage::kTrain);
    const fs::path dir = paths_.seed_stage(seed, Stage::kTrain);
    const std::string name = "train/seed_" + std::to_string(seed);
    const std::string key = seed_key("train", seed).json(train_json()).file(fit_dir / "labels.imlc").digest();
    if (cache_hit(dir, key, name)) {
      record(name, false);
      return;
    }
    begin(dir);
    const SharedData shared = load_shared();
    const SeedInputs in = load_inputs(seed, true);
    const auto labels = io::read_container(fit_dir / "labels.imlc");
    const RowMatrix fb = sim::matrix_from_array(labels.at("forward_backward"));
    const RowMatrix dr = sim::matrix_from_array(labels.at("dead_reckoning"));
    const auto samples = detail::train_samples_of(shared, in);
    const RowMatrixF train_x = eval::select_rows(shared.features.features, in.train_rows);
    const std::string hash = Key("model-config").json(train_json()).digest();
    std::vector<std::string> files;
    io::CsvTable curves({"model", "epoch", "loss"});

    if (config_.epochs.supervised > 0) {
      model::TrainConfig tc = config_.train;
      tc.epochs = config_.epochs.supervised;
      tc.label_noise_m = 0;
      const auto r = model::train_mlp(train_x, eval::select_rows(shared.truth.positions, samples),
                                      shared.features.layout, tc, detail::supervised_seed(seed));
      model::save_checkpoint(dir / "supervised.ckpt", r.final_model, hash);
      append_curve(curves, "supervised", r.loss_curve);
      files.push_back("supervised.ckpt");
    }
    if (config_.train_dead_reckoning_model) {
      model::TrainConfig tc = config_.train;
      tc.epochs = config_.epochs.refinement.front();
      tc.label_noise_m = config_.pseudo_label_noise_m;
      const auto r = model::train_mlp(train_x, eval::select_rows(dr, samples), shared.features.layout, tc,
                                      detail::dead_reckoning_seed(seed));
      model::save_checkpoint(dir / "dead_reckoning.ckpt", r.final_model, hash);
      append_curve(curves, "dead_reckoning", r.loss_curve);
      files.push_back("dead_reckoning.ckpt");
    }
    if (!in.test_rows.empty()) {
      const model::KnnModel knn{train_x, eval::select_rows(fb, samples), config_.knn_k};
      const RowMatrix pred = model::knn_predict(knn, eval::select_rows(shared.features.features, in.test_rows));
      io::Container c;
      c.arrays.push_back(sim::matrix_array("predictions", pred));
      c.metadata = {{"kind", "knn_predictions"}, {"k", config_.knn_k}};
      io::write_container(dir / "knn_predictions.imlc", c);
      files.push_back("knn_predictions.imlc");
    }

    const auto data = refinement_data(shared, in);
    const auto rc = detail::make_refinement_config(config_);
    const auto it0 = eval::refinement_iteration(data, rc, detail::refine_seed(seed), 0, nullptr);
    model::save_checkpoint(dir / "iter_0.ckpt", it0.model, hash);
    write_labels(dir / "iter_0_labels.imlc", it0.pseudo_labels);
    append_curve(curves, "iter_0", it0.loss_curve);
    files.insert(files.end(), {"iter_0.ckpt", "iter_0_labels.imlc"});

    curves.write(dir / "loss_curves.csv");
    files.push_back("loss_curves.csv");
    commit(dir, key, files);
    record(name, true);
  }

  void refine_seed_stage(std::uint64_t seed) {
    const fs::path train_dir = paths_.seed_stage(seed, Stage::kTrain);
    require(train_dir / "iter_0.ckpt", Stage::kTrain, Stage::kRefine);
    const fs::path dir = paths_.seed_stage(seed, Stage::kRefine);
    const std::string name = "refine/seed_" + std::to_string(seed);
    const std::string key = seed_key("refine", seed)
                                .json(train_json())
                                .file(paths_.seed_stage(seed, Stage::kFit) / "labels.imlc")
                                .file(train_dir / "iter_0.ckpt")
                                .digest();
    if (cache_hit(dir, key, name)) {
      record(name, false);
      return;
    }
    begin(dir);
    const SharedData shared = load_shared();
    const SeedInputs in = load_inputs(seed, true);
    const auto data = refinement_data(shared, in);
    const auto rc = detail::make_refinement_config(config_);
    const std::string hash = Key("model-config").json(train_json()).digest();
    model::MlpF previous = model::load_checkpoint(train_dir / "iter_0.ckpt").model;
    std::vector<std::string> files;
    io::CsvTable curves({"model", "epoch", "loss"});
    for (std::size_t it = 1; it < rc.epochs.size(); ++it) {
      auto r = eval::refinement_iteration(data, rc, detail::refine_seed(seed), static_cast<int>(it), &previous);
      const std::string stem = "iter_" + std::to_string(it);
      model::save_checkpoint(dir / (stem + ".ckpt"), r.model, hash);
      write_labels(dir / (stem + "_labels.imlc"), r.pseudo_labels);
      append_curve(curves, stem, r.loss_curve);
      files.insert(files.end(), {stem + ".ckpt", stem + "_labels.imlc"});
      previous = std::move(r.model);
    }
    curves.write(dir / "loss_curves.csv");
    files.push_back("loss_curves.csv");
    commit(dir, key, files);
    record(name, true);
  }

  std::vector<fs::path> evaluation_inputs(std::uint64_t seed) {
    std::vector<fs::path> out{paths_.seed_stage(seed, Stage::kFit) / "labels.imlc"};
    for (Stage st : {Stage::kTrain, Stage::kRefine}) {
      const fs::path dir = paths_.seed_stage(seed, st);
      if (!fs::exists(dir / kStamp)) continue;
      const json stamp = json::parse(io::read_text(dir / kStamp));
      for (const auto& [file, digest] : stamp.at("outputs").items()) out.push_back(dir / file);
    }
    return out;
  }

  SeedOutcome evaluate_seed(const SharedData& shared, std::uint64_t seed) {
    SeedOutcome o;
    o.seed = seed;
    const SeedInputs in = load_inputs(seed, true);
    const auto data = refinement_data(shared, in);
    const auto samples = detail::train_samples_of(shared, in);
    const auto labels = io::read_container(paths_.seed_stage(seed, Stage::kFit) / "labels.imlc");
    const RowMatrix train_truth = eval::select_rows(shared.truth.positions, samples);
    auto label_error = [&](const RowMatrix& l) {
      return eval::ErrorReport::from_errors(eval::horizontal_error(eval::select_rows(l, samples), train_truth));
    };
    o.fb_labels = label_error(sim::matrix_from_array(labels.at("forward_backward")));
    o.dr_labels = label_error(sim::matrix_from_array(labels.at("dead_reckoning")));

    const fs::path tdir = paths_.seed_stage(seed, Stage::kTrain);
    const fs::path rdir = paths_.seed_stage(seed, Stage::kRefine);
    auto score = [&](const fs::path& ckpt) {
      return eval::score_model(model::load_checkpoint(ckpt).model, data, config_.smoother, config_.smooth_predictions);
    };
    if (fs::exists(tdir / "supervised.ckpt")) o.supervised = score(tdir / "supervised.ckpt");
    if (fs::exists(tdir / "dead_reckoning.ckpt")) o.dead_reckoning_model = score(tdir / "dead_reckoning.ckpt");
    if (fs::exists(tdir / "knn_predictions.imlc")) {
      const auto c = io::read_container(tdir / "knn_predictions.imlc");
      o.knn = eval::score_predictions(sim::matrix_from_array(c.at("predictions")), data, config_.smoother,
                                      config_.smooth_predictions);
    }
    for (std::size_t it = 0; it < config_.epochs.refinement.size(); ++it) {
      const fs::path dir = it == 0 ? tdir : rdir;
      const std::string stem = "iter_" + std::to_string(it);
      if (!fs::exists(dir / (stem + ".ckpt"))) break;
      eval::IterationResult r;
      r.iteration = static_cast<int>(it);
      r.pseudo_labels = sim::matrix_from_array(io::read_container(dir / (stem + "_labels.imlc")).at("pseudo_labels"));
      r.pseudo_label_error = label_error(r.pseudo_labels);
      r.model = model::load_checkpoint(dir / (stem + ".ckpt")).model;
      r.model_hash = model::model_hash(r.model);
      r.test_error = eval::score_model(r.model, data, config_.smoother, config_.smooth_predictions);
      o.refinement.push_back(std::move(r));
    }
    return o;
  }

  static json outcome_json(const SeedOutcome& o) {
    json iters = json::array();
    for (const auto& r : o.refinement) {
      iters.push_back({{"iteration", r.iteration},
                       {"pseudo_labels", r.pseudo_label_error.summary_json()},
                       {"test", r.test_error.summary_json()},
                       {"model_hash", r.model_hash}});
    }
    return {{"seed", o.seed},
            {"fb_labels", o.fb_labels.summary_json()},
            {"dr_labels", o.dr_labels.summary_json()},
            {"supervised", o.supervised.summary_json()},
            {"dead_reckoning_model", o.dead_reckoning_model.summary_json()},
            {"knn", o.knn.summary_json()},
            {"refinement", iters}};
  }

  void evaluate() {
    for (auto seed : config_.seeds) {
      require(paths_.seed_stage(seed, Stage::kFit) / "labels.imlc", Stage::kFit, Stage::kEvaluate);
      require(paths_.seed_stage(seed, Stage::kTrain) / kStamp, Stage::kTrain, Stage::kEvaluate);
    }
    const fs::path dir = paths_.evaluate();
    Key k("evaluate");
    k.json(config_.smoother.to_json()).json(config_.smooth_predictions).json(config_.seeds).json(config_.epochs.to_json());
    k.file(paths_.truth()).file(paths_.features());
    for (auto seed : config_.seeds) {
      for (const auto& p : evaluation_inputs(seed)) k.json(p.lexically_relative(paths_.root).generic_string()).file(p);
    }
    const std::string key = k.digest();
    if (cache_hit(dir, key, "evaluate")) {
      record("evaluate", false);
      return;
    }
    begin(dir);
    log("evaluate: scoring " + std::to_string(config_.seeds.size()) + " seeds");
    const SharedData shared = load_shared();
    std::vector<SeedOutcome> outcomes(config_.seeds.size());
    parallel_for(
        outcomes.size(),
        [&](std::size_t b, std::size_t e) {
          for (std::size_t i = b; i < e; ++i) outcomes[i] = evaluate_seed(shared, config_.seeds[i]);
        },
        options_.threads);

    json per_seed = json::array();
    for (const auto& o : outcomes) per_seed.push_back(outcome_json(o));
    io::write_text(dir / "metrics.json", per_seed.dump(2) + "\n");

    const std::string cp = std::to_string(
        config_.scenario.control_points.mode == sim::ControlPointSpec::Mode::kRandom
            ? config_.scenario.control_points.random_count
            : config_.scenario.control_points.sample_indices.size() + config_.scenario.control_points.sites.size());
    const auto summary = summary_rows(outcomes, cp);
    const auto imu = imu_error_rows(outcomes, cp);
    const auto knn = knn_rows(outcomes, cp);
    rows_to_csv(summary).write(dir / "summary.csv");
    rows_to_csv(imu).write(dir / "imu_error.csv");
    rows_to_csv(knn).write(dir / "knn.csv");
    io::write_text(dir / "summary.txt", "Horizontal absolute error (test)\n\n" + rows_to_text(summary) +
                                            "\nPseudo-label error (training samples)\n\n" + rows_to_text(imu) +
                                            "\nk-NN baseline (test)\n\n" + rows_to_text(knn));
    per_seed_csv(outcomes).write(dir / "per_seed.csv");
    iteration_csv(outcomes).write(dir / "iterations.csv");
    commit(dir, key,
           {"metrics.json", "summary.csv", "imu_error.csv", "knn.csv", "summary.txt", "per_seed.csv", "iterations.csv"});
    record("evaluate", true);
  }
};

}  // namespace

RunReport run_stage(const ExperimentConfig& config, Stage stage, const RunOptions& options) {
  return run_pipeline(config, {stage}, options);
}

RunReport run_pipeline(const ExperimentConfig& config, const std::vector<Stage>& stages, const RunOptions& options) {
  config.validate();
  if (options.out_dir.empty()) throw ConfigError("output directory is empty");
  std::vector<Stage> ordered = stages;
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
  fs::create_directories(options.out_dir);
  io::write_text(options.out_dir / "config.json", config.to_json().dump(2) + "\n");
  Runner runner(config, options);
  for (Stage s : ordered) runner.run(s);
  return runner.report;
}

}  // namespace imuloc::pipeline
