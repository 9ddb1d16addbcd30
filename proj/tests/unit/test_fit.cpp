// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "imuloc/fit/fit.hpp"
#include "imuloc/sim/scenario.hpp"
#include "imuloc/sim/simulate.hpp"

using namespace imuloc;

namespace {

// ---------------------------------------------------------------- oracle
// Plain nested loops over std::vector, written independently of the library.

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const RowMatrix& m) {
  Rows r(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  }
  return r;
}

struct OracleStates {
  Rows xf, vf, xb, vb;
};

OracleStates oracle_integrate(const fit::Segment& s, const Rows& cor) {
  const std::size_t n = s.steps();
  const auto d = static_cast<std::size_t>(s.dim());
  const Rows acc = to_rows(s.accel);
  OracleStates o;
  o.xf.assign(n + 1, std::vector<double>(d));
  o.vf = o.xf;
  o.xb = o.xf;
  o.vb = o.xf;
  for (std::size_t k = 0; k < d; ++k) {
    o.xf[0][k] = s.x_start[static_cast<Eigen::Index>(k)];
    o.vf[0][k] = s.v_start[static_cast<Eigen::Index>(k)];
    o.xb[n][k] = s.x_end[static_cast<Eigen::Index>(k)];
    o.vb[n][k] = s.v_end[static_cast<Eigen::Index>(k)];
  }
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      o.vf[i][k] = o.vf[i - 1][k] + (acc[i - 1][k] + cor[i - 1][k]) * s.dt[i - 1];
      o.xf[i][k] = o.xf[i - 1][k] + o.vf[i][k] * s.dt[i - 1];
    }
  }
  for (std::size_t i = n; i >= 1; --i) {
    for (std::size_t k = 0; k < d; ++k) {
      o.vb[i - 1][k] = o.vb[i][k] - (acc[i - 1][k] + cor[i - 1][k]) * s.dt[i - 1];
      o.xb[i - 1][k] = o.xb[i][k] - o.vb[i][k] * s.dt[i - 1];
    }
  }
  return o;
}

fit::LossTerms oracle_loss(const fit::Segment& s, const Rows& cor, const fit::LossWeights& w,
                           const fit::ModelAnchors* anchors = nullptr) {
  const auto o = oracle_integrate(s, cor);
  fit::LossTerms t;
  for (std::size_t i = 0; i < o.xf.size(); ++i) {
    for (std::size_t k = 0; k < o.xf[i].size(); ++k) {
      if (anchors == nullptr) {
        t.position += (o.xf[i][k] - o.xb[i][k]) * (o.xf[i][k] - o.xb[i][k]);
      } else if (anchors->mask[i]) {
        const double m = anchors->positions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        t.position += (o.xf[i][k] - m) * (o.xf[i][k] - m) + (o.xb[i][k] - m) * (o.xb[i][k] - m);
      }
      t.velocity += (o.vf[i][k] - o.vb[i][k]) * (o.vf[i][k] - o.vb[i][k]);
    }
  }
  for (const auto& row : cor) {
    for (double c : row) t.regularization += c * c;
  }
  t.total = w.position * t.position + w.velocity * t.velocity + w.regularization * t.regularization;
  return t;
}

fit::Segment random_segment(std::mt19937_64& rng, std::size_t n, int dim = 2) {
  fit::Segment s;
  for (std::size_t i = 0; i < n; ++i) s.dt.push_back(testing::uniform(rng, 0.05, 0.3));
  s.accel = testing::random_matrix(rng, static_cast<Eigen::Index>(n), dim, 0.5);
  s.x_start = testing::random_matrix(rng, dim, 1, 2.0);
  s.v_start = testing::random_matrix(rng, dim, 1, 0.5);
  s.x_end = testing::random_matrix(rng, dim, 1, 2.0);
  s.v_end = testing::random_matrix(rng, dim, 1, 0.5);
  return s;
}

fit::ModelAnchors random_anchors(std::mt19937_64& rng, std::size_t n, int dim) {
  fit::ModelAnchors a;
  a.positions = testing::random_matrix(rng, static_cast<Eigen::Index>(n + 1), dim, 2.0);
  for (std::size_t i = 0; i <= n; ++i) a.mask.push_back(rng() % 3 == 0 ? 0 : 1);
  return a;
}

/// Straight-line motion sampled exactly, as a segment between its endpoints.
fit::Segment straight_segment(std::size_t n, double dt, double accel_x) {
  std::vector<double> t(n + 1);
  RowMatrix x(static_cast<Eigen::Index>(n + 1), 2);
  for (std::size_t i = 0; i <= n; ++i) {
    t[i] = dt * static_cast<double>(i);
    x(static_cast<Eigen::Index>(i), 0) = 0.3 * t[i] + 0.5 * accel_x * t[i] * t[i];
    x(static_cast<Eigen::Index>(i), 1) = 0.1 * t[i];
  }
  const auto truth = sim::derive_kinematics(t, x);
  sim::ImuSeries imu{truth.step_durations(), truth.accelerations, 25.0};
  sim::ControlPoint a, b;
  a.sample_index = 0;
  a.position = truth.positions.row(0).transpose();
  a.velocity = truth.velocities.row(0).transpose();
  b.sample_index = n;
  b.position = truth.positions.row(static_cast<Eigen::Index>(n)).transpose();
  b.velocity = truth.velocities.row(static_cast<Eigen::Index>(n)).transpose();
  return fit::make_segment(imu, a, b);
}

/// Closed-form minimizer of the quadratic objective. Residuals are affine in
/// the corrections, so their Jacobian columns come from unit perturbations.
RowMatrix closed_form(const fit::Segment& s, const fit::LossWeights& w) {
  const std::size_t n = s.steps();
  const auto d = static_cast<std::size_t>(s.dim());
  const std::size_t p = n * d;
  auto residual = [&](const Rows& cor) {
    const auto o = oracle_integrate(s, cor);
    Eigen::VectorXd r(static_cast<Eigen::Index>(2 * (n + 1) * d));
    Eigen::Index at = 0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t k = 0; k < d; ++k) r[at++] = std::sqrt(w.position) * (o.xf[i][k] - o.xb[i][k]);
    }
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t k = 0; k < d; ++k) r[at++] = std::sqrt(w.velocity) * (o.vf[i][k] - o.vb[i][k]);
    }
    return r;
  };
  const Rows zero(n, std::vector<double>(d, 0.0));
  const Eigen::VectorXd r0 = residual(zero);
  Eigen::MatrixXd jac(r0.size(), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    Rows e = zero;
    e[j / d][j % d] = 1.0;
    jac.col(static_cast<Eigen::Index>(j)) = residual(e) - r0;
  }
  const Eigen::MatrixXd h =
      jac.transpose() * jac + w.regularization * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  const Eigen::VectorXd c = h.ldlt().solve(-jac.transpose() * r0);
  RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < p; ++j) out(static_cast<Eigen::Index>(j / d), static_cast<Eigen::Index>(j % d)) = c[static_cast<Eigen::Index>(j)];
  return out;
}

}  // namespace

TEST_CASE("dead reckoning hand-unrolled cases") {
  const std::vector<double> dt{1, 1, 1};
  auto s = fit::dead_reckon(RowMatrix::Zero(3, 2), Vector::Zero(2), Eigen::Vector2d(1, 0), dt);
  CHECK(s.positions.col(0).transpose() == Eigen::RowVector4d(0, 1, 2, 3));
  CHECK(s.positions.col(1).isZero());
  RowMatrix a = RowMatrix::Zero(3, 2);
  a.col(0).setOnes();
  s = fit::dead_reckon(a, Vector::Zero(2), Vector::Zero(2), dt);
  CHECK(s.velocities.col(0).transpose() == Eigen::RowVector4d(0, 1, 2, 3));
  CHECK(s.positions.col(0).transpose() == Eigen::RowVector4d(0, 1, 3, 6));
}

TEST_CASE("integration matches the loop oracle and inverts exactly") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(testing::uniform_int(rng, 1, 60));
    const int dim = trial % 4 == 0 ? 3 : 2;
    const auto seg = random_segment(rng, n, dim);
    const RowMatrix cor = testing::random_matrix(rng, static_cast<Eigen::Index>(n), dim, 0.1);
    const auto o = oracle_integrate(seg, to_rows(cor));
    const auto f = fit::integrate_forward(seg, cor);
    const auto b = fit::integrate_backward(seg, cor);
    REQUIRE(f.positions.rows() == static_cast<Eigen::Index>(n + 1));
    for (std::size_t i = 0; i <= n; ++i) {
      for (int k = 0; k < dim; ++k) {
        const auto r = static_cast<Eigen::Index>(i);
        CHECK(std::abs(f.positions(r, k) - o.xf[i][static_cast<std::size_t>(k)]) < 1e-12);
        CHECK(std::abs(f.velocities(r, k) - o.vf[i][static_cast<std::size_t>(k)]) < 1e-12);
        CHECK(std::abs(b.positions(r, k) - o.xb[i][static_cast<std::size_t>(k)]) < 1e-12);
        CHECK(std::abs(b.velocities(r, k) - o.vb[i][static_cast<std::size_t>(k)]) < 1e-12);
      }
    }
    // Anchors are boundary conditions.
    CHECK(f.positions.row(0).transpose() == seg.x_start);
    CHECK(b.positions.row(static_cast<Eigen::Index>(n)).transpose() == seg.x_end);

    // Zero corrections: forward is plain dead reckoning.
    const auto dr = fit::dead_reckon(seg.accel, seg.x_start, seg.v_start, seg.dt);
    CHECK(fit::integrate_forward(seg, RowMatrix::Zero(static_cast<Eigen::Index>(n), dim)).positions == dr.positions);

    // Backward from forward's terminal state retraces forward.
    const RowMatrix total = seg.accel + cor;
    const auto back = fit::dead_reckon_backward(total, f.positions.bottomRows(1).transpose(),
                                                f.velocities.bottomRows(1).transpose(), seg.dt);
    CHECK((back.positions - f.positions).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.velocities - f.velocities).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("loss terms match the oracle, with and without model anchors") {
  std::mt19937_64 rng(3);
  const fit::LossWeights w;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(testing::uniform_int(rng, 1, 50));
    const auto seg = random_segment(rng, n);
    const RowMatrix cor = testing::random_matrix(rng, static_cast<Eigen::Index>(n), 2, 0.1);
    const auto anchors = random_anchors(rng, n, 2);
    for (const fit::ModelAnchors* a : {static_cast<const fit::ModelAnchors*>(nullptr), &anchors}) {
      const auto got = fit::fb_loss(seg, cor, w, a);
      const auto want = oracle_loss(seg, to_rows(cor), w, a);
      CHECK(got.position == doctest::Approx(want.position).epsilon(1e-12));
      CHECK(got.velocity == doctest::Approx(want.velocity).epsilon(1e-12));
      CHECK(got.regularization == doctest::Approx(want.regularization).epsilon(1e-12));
      CHECK(got.total == doctest::Approx(want.total).epsilon(1e-12));
    }
  }
}

TEST_CASE("frozen loss value on a fixed small instance") {
  fit::Segment s;
  s.dt = {0.5, 0.25, 0.5};
  s.accel = RowMatrix(3, 2);
  s.accel << 1, 0, -1, 2, 0.5, -0.5;
  s.x_start = Eigen::Vector2d(0, 0);
  s.v_start = Eigen::Vector2d(1, 0);
  s.x_end = Eigen::Vector2d(1, 0.5);
  s.v_end = Eigen::Vector2d(0.5, 0.5);
  RowMatrix cor(3, 2);
  cor << 0.1, -0.2, 0, 0.3, -0.1, 0;
  const auto t = fit::fb_loss(s, cor, fit::LossWeights{});
  // Values computed once with the loop oracle above.
  const auto o = oracle_loss(s, to_rows(cor), fit::LossWeights{});
  CHECK(t.position == doctest::Approx(o.position).epsilon(1e-14));
  CHECK(t.velocity == doctest::Approx(o.velocity).epsilon(1e-14));
  CHECK(t.regularization == doctest::Approx(0.15).epsilon(1e-14));
  CHECK(t.total == doctest::Approx(o.position + 1e3 * o.velocity + 1e4 * 0.15).epsilon(1e-14));
}

TEST_CASE("noise-free segment has zero loss; regularizer is quadratic") {
  const auto seg = straight_segment(40, 0.16, 0.2);
  const RowMatrix zero = RowMatrix::Zero(40, 2);
  const auto t = fit::fb_loss(seg, zero, fit::LossWeights{});
  CHECK(t.position < 1e-20);
  CHECK(t.velocity < 1e-20);
  CHECK(t.regularization == 0.0);

  std::mt19937_64 rng(4);
  const RowMatrix cor = testing::random_matrix(rng, 40, 2);
  const double base = fit::fb_loss(seg, cor, fit::LossWeights{}).regularization;
  for (double lambda : {0.5, 2.0, -3.0}) {
    CHECK(fit::fb_loss(seg, lambda * cor, fit::LossWeights{}).regularization == doctest::Approx(lambda * lambda * base));
  }
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(5);
  const double eps = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(trial < 50 ? 20 : testing::uniform_int(rng, 1, 50));
    const auto seg = random_segment(rng, n);
    const RowMatrix cor = testing::random_matrix(rng, static_cast<Eigen::Index>(n), 2, 0.1);
    const auto anchors = random_anchors(rng, n, 2);
    const fit::ModelAnchors* a = trial % 2 == 0 ? nullptr : &anchors;
    const fit::LossWeights w{testing::uniform(rng, 0.5, 2), testing::uniform(rng, 1, 1e3), testing::uniform(rng, 1, 1e4)};
    RowMatrix grad;
    fit::fb_loss(seg, cor, w, a, &grad);
    double max_err = 0;
    for (Eigen::Index i = 0; i < cor.size(); ++i) {
      RowMatrix up = cor, down = cor;
      up.data()[i] += eps;
      down.data()[i] -= eps;
      const double fd = (oracle_loss(seg, to_rows(up), w, a).total - oracle_loss(seg, to_rows(down), w, a).total) / (2 * eps);
      max_err = std::max(max_err, std::abs(fd - grad.data()[i]) / std::max(1.0, std::abs(fd)));
    }
    CHECK(max_err < 1e-5);
  }
}

TEST_CASE("conjugate gradient reaches the closed-form optimum") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<std::size_t>(testing::uniform_int(rng, 1, 10));
    const auto seg = random_segment(rng, n);
    fit::FitConfig config;
    config.steps = 200;
    const auto r = fit::fit_segment(seg, config, rng());
    const RowMatrix opt = closed_form(seg, config.weights);
    CHECK((r.corrections - opt).cwiseAbs().maxCoeff() <= 1e-3);
  }
}

TEST_CASE("gradient descent also approaches the optimum and never worsens") {
  std::mt19937_64 rng(7);
  const auto seg = random_segment(rng, 6);
  fit::FitConfig config;
  config.optimizer = fit::Optimizer::kGradientDescent;
  config.learning_rate = 1e-5;
  config.steps = 20000;
  const auto r = fit::fit_segment(seg, config, 1);
  CHECK((r.corrections - closed_form(seg, config.weights)).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(r.final.total <= r.initial.total);
  for (std::size_t i = 1; i < r.best_loss_history.size(); ++i) {
    CHECK(r.best_loss_history[i] <= r.best_loss_history[i - 1]);
  }
}

TEST_CASE("fit result invariants") {
  std::mt19937_64 rng(8);
  const auto seg = random_segment(rng, 30);
  fit::FitConfig config;
  config.steps = 50;
  const auto r = fit::fit_segment(seg, config, 9);
  CHECK(r.pseudo_labels == (r.x_fwd + r.x_bwd) / 2.0);
  CHECK(r.x_fwd.row(0).transpose() == seg.x_start);
  CHECK(r.x_bwd.row(30).transpose() == seg.x_end);
  CHECK(r.final.total <= r.initial.total);
  const auto again = fit::fit_segment(seg, config, 9);
  CHECK(again.corrections == r.corrections);
}

TEST_CASE("zero-noise fixed point") {
  const auto seg = straight_segment(200, 0.16, 0.05);
  const auto r = fit::fit_segment(seg, fit::FitConfig{}, 3);
  CHECK(r.corrections.cwiseAbs().maxCoeff() <= 1e-3);
  const auto truth = fit::dead_reckon(seg.accel, seg.x_start, seg.v_start, seg.dt);
  CHECK((r.pseudo_labels - truth.positions).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("constant bias is recovered as a negative mean correction") {
  for (double b : {0.05, -0.1}) {
    auto seg = straight_segment(60, 0.16, 0.0);
    seg.accel.col(0).array() += b;
    const auto r = fit::fit_segment(seg, fit::FitConfig{}, 4);
    const RowMatrix opt = closed_form(seg, fit::FitConfig{}.weights);
    CHECK(r.corrections.col(0).mean() == doctest::Approx(opt.col(0).mean()).epsilon(1e-3));
    CHECK(r.corrections.col(0).mean() == doctest::Approx(-b).epsilon(0.10));
  }
}

TEST_CASE("divergence reports the step") {
  std::mt19937_64 rng(9);
  const auto seg = random_segment(rng, 40);
  fit::FitConfig config;
  config.optimizer = fit::Optimizer::kGradientDescent;
  config.learning_rate = 10.0;
  config.steps = 5000;
  try {
    fit::fit_segment(seg, config, 0);
    FAIL("expected divergence");
  } catch (const NumericalError& e) {
    CHECK(e.index() > 0);
  }
}

TEST_CASE("fit config json and validation") {
  fit::FitConfig c;
  c.learning_rate = 3e-4;
  c.optimizer = fit::Optimizer::kGradientDescent;
  const auto back = fit::FitConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(fit::FitConfig::from_json({{"init_variance", 1e-4}}).init_sigma == doctest::Approx(0.01));
  CHECK_THROWS_AS(fit::FitConfig::from_json({{"steps", -1}}), ConfigError);
  CHECK_THROWS_AS(fit::FitConfig::from_json({{"w_v", -1.0}}), ConfigError);
  CHECK_THROWS_AS(fit::FitConfig::from_json({{"bogus", 1}}), ConfigError);
  const fit::FitConfig d;
  CHECK(d.learning_rate == 1e-4);
  CHECK(d.steps == 2000);
  CHECK(d.weights.position == 1.0);
  CHECK(d.weights.velocity == 1e3);
  CHECK(d.weights.regularization == 1e4);
}

TEST_CASE("segments follow control point visits") {
  auto c = sim::ScenarioConfig::warehouse();
  c.walker.samples = 6000;
  const auto truth = sim::simulate_trajectory(c, 1);
  const auto cps = sim::place_control_points(truth, c.control_points, 1);
  REQUIRE(cps.size() >= 2);
  const auto bounds = fit::segment_bounds(cps);
  CHECK(bounds.size() == cps.size() - 1);
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    CHECK(bounds[k].first == cps[k].sample_index);
    CHECK(bounds[k].second == cps[k + 1].sample_index);
  }

  // A start and an end at the same fiducial is a single segment.
  std::vector<sim::ControlPoint> two{cps[0], cps[1]};
  CHECK(fit::segment_bounds(two).size() == 1);
}

TEST_CASE("trajectory fit: exact on clean data, flags one-sided tails, beats dead reckoning") {
  auto c = sim::ScenarioConfig::warehouse();
  c.walker.samples = 4000;
  const auto truth = sim::simulate_trajectory(c, 2);
  auto cps = sim::place_control_points(truth, c.control_points, 2);
  REQUIRE(cps.size() >= 2);

  sim::ImuNoiseConfig silent;
  silent.temperature_scale_factor = silent.constant_bias = silent.temperature_bias = silent.noise_density = 0;
  const auto clean = sim::simulate_imu(truth, silent);
  const auto fitted = fit::fit_trajectory(clean, cps, fit::FitConfig{}, 0);
  const std::size_t last = cps.back().sample_index;
  for (std::size_t s = 0; s <= last; ++s) {
    CHECK((fitted.pseudo_labels.row(static_cast<Eigen::Index>(s)) - truth.positions.row(static_cast<Eigen::Index>(s))).norm() <= 1e-3);
  }
  for (std::size_t s = 0; s < truth.size(); ++s) CHECK(fitted.one_sided[s] == (s > last ? 1 : 0));

  sim::ImuNoiseConfig noisy;
  noisy.seed = 5;
  const auto imu = sim::simulate_imu(truth, noisy);
  const auto fb = fit::fit_trajectory(imu, cps, fit::FitConfig{}, 0);
  const auto dr = fit::dead_reckoning_labels(imu, cps);
  std::size_t better = 0;
  for (const auto& seg : fb.segments) {
    double e_fb = 0, e_dr = 0;
    for (std::size_t s = seg.begin_sample + 1; s < seg.end_sample; ++s) {
      const auto r = static_cast<Eigen::Index>(s);
      e_fb += (fb.pseudo_labels.row(r) - truth.positions.row(r)).norm();
      e_dr += (dr.pseudo_labels.row(r) - truth.positions.row(r)).norm();
    }
    better += e_fb < e_dr ? 1 : 0;
  }
  CHECK(static_cast<double>(better) >= 0.95 * static_cast<double>(fb.segments.size()));
  CHECK_THROWS_AS(fit::fit_trajectory(imu, {}, fit::FitConfig{}, 0), ConfigError);
}
