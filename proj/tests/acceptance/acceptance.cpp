// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// writes the measured values to <work-dir>/acceptance.json.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "imuloc/csi/csi.hpp"
#include "imuloc/eval/eval.hpp"
#include "imuloc/fit/fit.hpp"
#include "imuloc/io/csv.hpp"
#include "imuloc/model/mlp.hpp"
#include "imuloc/parallel.hpp"
#include "imuloc/pipeline/pipeline.hpp"
#include "imuloc/sim/simulate.hpp"

#ifndef IMULOC_CONFIG_DIR
#define IMULOC_CONFIG_DIR "configs"
#endif

using namespace imuloc;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Options {
  fs::path work_dir = "acceptance_work";
  fs::path config_dir = IMULOC_CONFIG_DIR;
  std::vector<int> only;
  int seed_count = 0;  ///< 0 keeps the configured seeds
};

struct Outcome {
  bool pass = false;
  std::string detail;
  json values = json::object();
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

pipeline::ExperimentConfig load(const Options& o, const std::string& name) {
  auto c = pipeline::ExperimentConfig::load(o.config_dir / name);
  if (o.seed_count > 0) {
    c.seeds.clear();
    for (int s = 0; s < o.seed_count; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  return c;
}

double median_of(std::vector<double> v) { return eval::percentile(std::move(v), 0.5); }

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0 : s / static_cast<double>(v.size());
}

/// Monotone up to one inversion of at most `tolerance` relative size.
bool monotone(const std::vector<double>& v, bool increasing, double tolerance) {
  int inversions = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double step = increasing ? v[i] - v[i - 1] : v[i - 1] - v[i];
    if (step >= 0) continue;
    ++inversions;
    if (-step > tolerance * std::abs(v[i - 1])) return false;
  }
  return inversions <= 1;
}

// ---------------------------------------------------------------- 1

double loop_loss(const fit::Segment& s, const RowMatrix& cor, const fit::LossWeights& w,
                 const fit::ModelAnchors* anchors) {
  const auto n = static_cast<Eigen::Index>(s.steps());
  const Eigen::Index d = s.dim();
  RowMatrix xf(n + 1, d), vf(n + 1, d), xb(n + 1, d), vb(n + 1, d);
  xf.row(0) = s.x_start.transpose();
  vf.row(0) = s.v_start.transpose();
  xb.row(n) = s.x_end.transpose();
  vb.row(n) = s.v_end.transpose();
  for (Eigen::Index i = 1; i <= n; ++i) {
    const double dt = s.dt[static_cast<std::size_t>(i - 1)];
    vf.row(i) = vf.row(i - 1) + (s.accel.row(i - 1) + cor.row(i - 1)) * dt;
    xf.row(i) = xf.row(i - 1) + vf.row(i) * dt;
  }
  for (Eigen::Index i = n; i >= 1; --i) {
    const double dt = s.dt[static_cast<std::size_t>(i - 1)];
    vb.row(i - 1) = vb.row(i) - (s.accel.row(i - 1) + cor.row(i - 1)) * dt;
    xb.row(i - 1) = xb.row(i) - vb.row(i) * dt;
  }
  double lx = 0;
  for (Eigen::Index i = 0; i <= n; ++i) {
    if (anchors == nullptr) {
      lx += (xf.row(i) - xb.row(i)).squaredNorm();
    } else if (anchors->mask[static_cast<std::size_t>(i)]) {
      lx += (xf.row(i) - anchors->positions.row(i)).squaredNorm() + (xb.row(i) - anchors->positions.row(i)).squaredNorm();
    }
  }
  return w.position * lx + w.velocity * (vf - vb).squaredNorm() + w.regularization * cor.squaredNorm();
}

RowMatrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sigma) {
  std::normal_distribution<double> g(0, sigma);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

Outcome gradients() {
  Stopwatch clock;
  std::mt19937_64 rng(20240601);
  const double eps = 1e-6;
  double worst_fit = 0;
  int fit_instances = 0;
  for (const bool anchored : {false, true}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto n = std::uniform_int_distribution<int>(1, 50)(rng);
      fit::Segment s;
      for (int i = 0; i < n; ++i) s.dt.push_back(std::uniform_real_distribution<double>(0.05, 0.3)(rng));
      s.accel = gaussian(rng, n, 2, 0.5);
      s.x_start = gaussian(rng, 2, 1, 2);
      s.v_start = gaussian(rng, 2, 1, 0.5);
      s.x_end = gaussian(rng, 2, 1, 2);
      s.v_end = gaussian(rng, 2, 1, 0.5);
      fit::ModelAnchors a;
      a.positions = gaussian(rng, n + 1, 2, 2);
      for (int i = 0; i <= n; ++i) a.mask.push_back(rng() % 2);
      const fit::ModelAnchors* ap = anchored ? &a : nullptr;
      const RowMatrix cor = gaussian(rng, n, 2, 0.1);
      const fit::LossWeights w;
      RowMatrix grad;
      fit::fb_loss(s, cor, w, ap, &grad);
      RowMatrix fd(cor.rows(), cor.cols());
      for (Eigen::Index i = 0; i < cor.size(); ++i) {
        RowMatrix up = cor, down = cor;
        up.data()[i] += eps;
        down.data()[i] -= eps;
        fd.data()[i] = (loop_loss(s, up, w, ap) - loop_loss(s, down, w, ap)) / (2 * eps);
      }
      worst_fit = std::max(worst_fit, (fd - grad).norm() / std::max(fd.norm(), 1e-12));
      ++fit_instances;
    }
  }

  double worst_mlp = 0;
  int mlp_instances = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> width(1, 8);
    std::vector<int> widths{width(rng)};
    const int hidden = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int h = 0; h < hidden; ++h) widths.push_back(width(rng));
    widths.push_back(std::uniform_int_distribution<int>(1, 3)(rng));
    model::Mlp<double> net(widths);
    net.initialize(rng());
    const RowMatrix x = gaussian(rng, 8, widths.front(), 1);
    const RowMatrix y = gaussian(rng, 8, widths.back(), 1.5);
    model::Mlp<double>::Cache cache;
    model::Mlp<double>::Matrix gout;
    model::smooth_l1<double>(net.forward(x, &cache), y, 1.0, &gout);
    std::vector<double> grad(net.parameters().size(), 0.0);
    net.backward(cache, gout, grad);
    double diff = 0, norm = 0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double keep = net.parameters()[i];
      net.parameters()[i] = keep + eps;
      const double up = model::smooth_l1<double>(net.forward(x), y, 1.0);
      net.parameters()[i] = keep - eps;
      const double down = model::smooth_l1<double>(net.forward(x), y, 1.0);
      net.parameters()[i] = keep;
      const double fd = (up - down) / (2 * eps);
      diff += (fd - grad[i]) * (fd - grad[i]);
      norm += fd * fd;
    }
    worst_mlp = std::max(worst_mlp, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
    ++mlp_instances;
  }
  const double t = clock.seconds();
  Outcome o;
  o.pass = worst_fit < 1e-5 && worst_mlp < 1e-4 && t < 30;
  o.detail = "fit max rel " + fmt("%.2e", worst_fit) + " over " + std::to_string(fit_instances) + ", mlp max rel " +
             fmt("%.2e", worst_mlp) + " over " + std::to_string(mlp_instances) + ", " + fmt("%.1f s", t);
  o.values = {{"fit_max_rel", worst_fit}, {"mlp_max_rel", worst_mlp}, {"seconds", t}};
  return o;
}

// ---------------------------------------------------------------- 2

Outcome zero_noise(const Options& opts) {
  Stopwatch clock;
  auto config = load(opts, "desk.json");
  auto& imu = config.scenario.imu;
  imu.temperature_scale_factor = imu.constant_bias = imu.temperature_bias = imu.noise_density = 0;
  config.scenario.control_points.position_noise_sigma_m = 0;
  config.seeds = {0};
  const auto shared = pipeline::build_shared(config);
  const auto out = pipeline::run_seed(config, shared, 0, pipeline::SeedRunOptions{false, false, false, 2});
  double label_err = 0, moved = 0;
  const auto& l0 = out.refinement.at(0).pseudo_labels;
  const auto& l1 = out.refinement.at(1).pseudo_labels;
  for (Eigen::Index r = 0; r < l0.rows(); ++r) {
    label_err = std::max(label_err, (l0.row(r) - shared.truth.positions.row(r)).norm());
    moved = std::max(moved, (l1.row(r) - l0.row(r)).norm());
  }
  const double t = clock.seconds();
  Outcome o;
  o.pass = label_err <= 1e-3 && moved <= 1e-3 && t < 10;
  o.detail = "max label error " + fmt("%.2e m", label_err) + ", max iteration-1 move " + fmt("%.2e m", moved) +
             " (model test error " + fmt("%.3f m", out.refinement[0].test_error.mean) + "), " + fmt("%.1f s", t);
  o.values = {{"max_label_error_m", label_err}, {"max_move_m", moved}, {"seconds", t}};
  return o;
}

// ---------------------------------------------------------------- 3

Outcome fb_gain(const Options& opts, const pipeline::ExperimentConfig& config, const pipeline::SharedData& shared,
                double shared_seconds) {
  Stopwatch clock;
  std::vector<double> fb_med(config.seeds.size()), dr_med(config.seeds.size()), fb_mean(config.seeds.size()),
      dr_mean(config.seeds.size());
  parallel_for(config.seeds.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto inputs = pipeline::simulate_seed(config, shared.truth, shared.sample_of_row, config.seeds[i]);
      const auto labels = pipeline::fit_labels(config, shared, inputs, config.seeds[i]);
      fb_med[i] = labels.fb_error.median;
      dr_med[i] = labels.dr_error.median;
      fb_mean[i] = labels.fb_error.mean;
      dr_mean[i] = labels.dr_error.mean;
    }
  });
  (void)opts;
  const double t = clock.seconds() + shared_seconds;
  const double fm = median_of(fb_med), dm = median_of(dr_med), fa = mean_of(fb_mean), da = mean_of(dr_mean);
  Outcome o;
  o.pass = fm < dm / 3 && fa < da / 3 && t < 600;
  o.detail = "median FB " + fmt("%.1f", fm * 100) + " cm vs DR " + fmt("%.1f", dm * 100) + " cm, mean FB " +
             fmt("%.1f", fa * 100) + " cm vs DR " + fmt("%.1f", da * 100) + " cm, " +
             std::to_string(config.seeds.size()) + " seeds, " + fmt("%.0f s", t);
  o.values = {{"fb_median_m", fm}, {"dr_median_m", dm}, {"fb_mean_m", fa}, {"dr_mean_m", da}, {"seconds", t}};
  return o;
}

// ---------------------------------------------------------------- 4, 5, 6

struct MainRun {
  std::vector<pipeline::SeedOutcome> outcomes;
  double seconds = 0;
};

MainRun main_run(const pipeline::ExperimentConfig& config, const pipeline::SharedData& shared, double shared_seconds) {
  Stopwatch clock;
  MainRun run;
  run.outcomes.resize(config.seeds.size());
  const pipeline::SeedRunOptions options{true, false, true, -1};
  parallel_for(config.seeds.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) run.outcomes[i] = pipeline::run_seed(config, shared, config.seeds[i], options);
  });
  run.seconds = clock.seconds() + shared_seconds;
  return run;
}

Outcome ordering(const MainRun& run) {
  std::vector<double> sup, imu, ir;
  int improved = 0;
  for (const auto& o : run.outcomes) {
    sup.push_back(o.supervised.mean);
    imu.push_back(o.refinement.front().test_error.mean);
    ir.push_back(o.refinement.back().test_error.mean);
    improved += ir.back() < imu.back() ? 1 : 0;
  }
  const double s = mean_of(sup), i0 = mean_of(imu), ik = mean_of(ir);
  const double share = static_cast<double>(improved) / static_cast<double>(run.outcomes.size());
  Outcome o;
  const bool order = s <= ik && ik <= i0;
  o.pass = order && share >= 0.8 && i0 <= 3 * s && run.seconds < 3600;
  o.detail = "supervised " + fmt("%.1f", s * 100) + " cm, IMU-supervised-IR " + fmt("%.1f", ik * 100) +
             " cm, IMU-supervised " + fmt("%.1f", i0 * 100) + " cm, IR better in " + std::to_string(improved) + "/" +
             std::to_string(run.outcomes.size()) + " seeds, " + fmt("%.0f s", run.seconds);
  o.values = {{"supervised_m", s}, {"imu_supervised_ir_m", ik}, {"imu_supervised_m", i0}, {"ir_better_share", share},
              {"seconds", run.seconds}};
  return o;
}

Outcome generalization(const MainRun& run) {
  int ok = 0;
  for (const auto& o : run.outcomes) {
    const auto& it = o.refinement.front();
    ok += it.test_error.mean <= it.pseudo_label_error.mean ? 1 : 0;
  }
  const double share = static_cast<double>(ok) / static_cast<double>(run.outcomes.size());
  Outcome o;
  o.pass = share >= 0.7;
  o.detail = "test error <= pseudo-label error in " + std::to_string(ok) + "/" + std::to_string(run.outcomes.size()) +
             " seeds";
  o.values = {{"share", share}};
  return o;
}

Outcome knn_parity(const MainRun& run) {
  std::vector<double> knn, mlp;
  for (const auto& o : run.outcomes) {
    knn.push_back(o.knn.mean);
    mlp.push_back(o.refinement.front().test_error.mean);
  }
  const double k = mean_of(knn), m = mean_of(mlp);
  Outcome o;
  o.pass = k <= 1.5 * m;
  o.detail = "k-NN " + fmt("%.1f", k * 100) + " cm vs MLP " + fmt("%.1f", m * 100) + " cm (ratio " + fmt("%.2f", k / m) + ")";
  o.values = {{"knn_m", k}, {"mlp_m", m}};
  return o;
}

// ---------------------------------------------------------------- 7, 8

/// Median over seeds of column `column` for each knob value, in grid order.
std::vector<double> sweep(const io::CsvTable& table, const std::string& metric, std::size_t column,
                          std::vector<std::string>* values) {
  std::map<std::string, std::vector<double>> by_value;
  std::vector<std::string> order;
  for (const auto& row : table.rows()) {
    if (row[3] != metric) continue;
    if (!by_value.count(row[1])) order.push_back(row[1]);
    by_value[row[1]].push_back(std::stod(row[column]));
  }
  std::vector<double> out;
  for (const auto& v : order) out.push_back(median_of(by_value[v]));
  if (values != nullptr) *values = order;
  return out;
}

std::string series(const std::vector<std::string>& keys, const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += ", ";
    s += keys[i] + ": " + fmt("%.1f", v[i] * 100);
  }
  return s;
}

Outcome noise_monotone(const Options& opts) {
  Stopwatch clock;
  const auto config = load(opts, "ablation_cp_noise_sigma.json");
  const auto table = pipeline::ablation_table(config, thread_count());
  table.write(opts.work_dir / "ablation_cp_noise_sigma.csv");
  std::vector<std::string> keys;
  const auto medians = sweep(table, "test", 5, &keys);
  Outcome o;
  o.pass = medians.size() == 4 && monotone(medians, true, 0.05);
  o.detail = "median test error (cm) by sigma {" + series(keys, medians) + "}, " + fmt("%.0f s", clock.seconds());
  o.values = {{"sigma", keys}, {"median_m", medians}};
  return o;
}

Outcome density_monotone(const Options& opts) {
  Stopwatch clock;
  const auto config = load(opts, "ablation_cp_count.json");
  const auto table = pipeline::ablation_table(config, thread_count());
  table.write(opts.work_dir / "ablation_cp_count.csv");
  std::vector<std::string> keys;
  const auto medians = sweep(table, "pseudo_label", 5, &keys);
  Outcome o;
  o.pass = medians.size() == 4 && monotone(medians, false, 0.05);
  o.detail = "median pseudo-label error (cm) by count {" + series(keys, medians) + "}, " + fmt("%.0f s", clock.seconds());
  o.values = {{"count", keys}, {"median_m", medians}};
  return o;
}

// ---------------------------------------------------------------- 9

Outcome preprocessing(const pipeline::ExperimentConfig& config, const pipeline::SharedData& shared) {
  const auto cfr = pipeline::simulate_channel(config.scenario, shared.truth);
  const auto cir = csi::cfr_to_cir(cfr);

  // Naive DFT on a spread of frames.
  double worst = 0;
  const std::size_t frames = cfr.cfr.samples;
  const std::size_t k = cfr.cfr.bins;
  for (std::size_t s = 0; s < frames; s += std::max<std::size_t>(1, frames / 50)) {
    for (std::size_t t = 0; t < cfr.cfr.trps; ++t) {
      const auto in = cfr.cfr.frame(s, t, 0);
      const auto got = cir.cir.frame(s, t, 0);
      double diff = 0, norm = 0;
      for (std::size_t b = 0; b < k; ++b) {
        std::complex<double> acc = 0;
        for (std::size_t n = 0; n < k; ++n) {
          const double ang = 2.0 * std::numbers::pi * static_cast<double>((n * b) % k) / static_cast<double>(k);
          acc += std::complex<double>(in[n]) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        acc /= static_cast<double>(k);
        diff += std::norm(std::complex<double>(got[b]) - acc);
        norm += std::norm(acc);
      }
      worst = std::max(worst, std::sqrt(diff / norm));
    }
  }

  csi::AlignmentReport report;
  const auto aligned = csi::align_los(cir, config.preprocess.align, &report);
  std::size_t detected = 0, on_target = 0;
  for (std::size_t s = 0; s < aligned.cir.samples; ++s) {
    if (report.detected_peak[s] < 0) continue;
    ++detected;
    const auto peak = csi::detect_los_peak(
        aligned.cir.frame(s, config.preprocess.align.reference_trp, config.preprocess.align.reference_antenna),
        config.preprocess.align.threshold);
    on_target += peak && *peak == config.preprocess.align.target_bin ? 1 : 0;
  }
  Outcome o;
  o.pass = detected > 0 && on_target == detected && worst <= 1e-6;
  o.detail = "peak at target bin for " + std::to_string(on_target) + "/" + std::to_string(detected) +
             " detected samples, DFT max rel " + fmt("%.2e", worst);
  o.values = {{"on_target", on_target}, {"detected", detected}, {"dft_max_rel", worst}};
  return o;
}

// ---------------------------------------------------------------- 10

std::map<std::string, std::string> artifacts(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext != ".imlc" && ext != ".csv" && ext != ".ckpt" && ext != ".json" && ext != ".txt") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

Outcome determinism(const Options& opts) {
  const auto config = load(opts, "desk.json");
  const fs::path a = opts.work_dir / "determinism_a", b = opts.work_dir / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  pipeline::run_pipeline(config, pipeline::all_stages(), {a, false, 1, {}});
  pipeline::run_pipeline(config, pipeline::all_stages(), {b, false, thread_count(), {}});
  const auto ta = artifacts(a), tb = artifacts(b);
  std::size_t differing = 0;
  for (const auto& [name, bytes] : ta) {
    const auto it = tb.find(name);
    if (it == tb.end() || it->second != bytes) ++differing;
  }
  differing += tb.size() > ta.size() ? tb.size() - ta.size() : 0;
  Outcome o;
  o.pass = !ta.empty() && differing == 0;
  o.detail = std::to_string(ta.size()) + " artifacts compared, " + std::to_string(differing) + " differ";
  o.values = {{"artifacts", ta.size()}, {"differing", differing}};
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Options opts;
  CLI::App app{"Acceptance checks"};
  app.add_option("--work-dir", opts.work_dir, "Scratch directory");
  app.add_option("--configs", opts.config_dir, "Directory holding the experiment configs");
  app.add_option("--only", opts.only, "Run only these criteria")->delimiter(',');
  app.add_option("--seed-count", opts.seed_count, "Override the configured seed count");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(opts.work_dir);

  const std::set<int> selected(opts.only.begin(), opts.only.end());
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  std::map<int, Outcome> results;
  static const std::map<int, std::string> names{
      {1, "gradient suites"},      {2, "zero-noise fixed point"}, {3, "forward-backward gain"},
      {4, "pipeline ordering"},    {5, "model generalization"},   {6, "k-NN parity"},
      {7, "control-point noise"},  {8, "control-point density"},  {9, "preprocessing exactness"},
      {10, "determinism"}};
  auto run = [&](int id, const std::function<Outcome()>& f) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, names.at(id).c_str(), o.detail.c_str());
    std::fflush(stdout);
    results[id] = std::move(o);
  };

  run(1, gradients);
  run(2, [&] { return zero_noise(opts); });

  if (wanted(3) || wanted(4) || wanted(5) || wanted(6) || wanted(9)) {
    const auto config = load(opts, "warehouse_reduced.json");
    Stopwatch clock;
    const auto shared = pipeline::build_shared(config);
    const double shared_seconds = clock.seconds();
    run(3, [&] { return fb_gain(opts, config, shared, shared_seconds); });
    if (wanted(4) || wanted(5) || wanted(6)) {
      const MainRun main = main_run(config, shared, shared_seconds);
      run(4, [&] { return ordering(main); });
      run(5, [&] { return generalization(main); });
      run(6, [&] { return knn_parity(main); });
      io::CsvTable per_seed = pipeline::per_seed_csv(main.outcomes);
      per_seed.write(opts.work_dir / "per_seed.csv");
      pipeline::iteration_csv(main.outcomes).write(opts.work_dir / "iterations.csv");
    }
    run(9, [&] { return preprocessing(config, shared); });
  }
  run(7, [&] { return noise_monotone(opts); });
  run(8, [&] { return density_monotone(opts); });
  run(10, [&] { return determinism(opts); });

  json report = json::object();
  int failed = 0;
  for (const auto& [id, o] : results) {
    report[std::to_string(id)] = {{"name", names.at(id)}, {"pass", o.pass}, {"detail", o.detail}, {"values", o.values}};
    failed += o.pass ? 0 : 1;
  }
  std::ofstream(opts.work_dir / "acceptance.json") << report.dump(2) << "\n";
  std::printf("%zu criteria, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}
