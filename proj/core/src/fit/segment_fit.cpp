// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <string>

#include "imuloc/fit/fit.hpp"

namespace imuloc::fit {

namespace {

using json = nlohmann::json;

double dot(const RowMatrix& a, const RowMatrix& b) { return (a.array() * b.array()).sum(); }

void check_finite(const LossTerms& t, const RowMatrix& grad, int step) {
  if (!std::isfinite(t.total) || !grad.allFinite()) {
    throw NumericalError("fit_segment: loss diverged at step " + std::to_string(step), step);
  }
}

}  // namespace

void FitConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("fit.learning_rate must be > 0");
  if (steps < 0) throw ConfigError("fit.steps must be >= 0");
  if (!(weights.position >= 0) || !(weights.velocity >= 0) || !(weights.regularization >= 0)) {
    throw ConfigError("fit weights must be non-negative");
  }
  if (!(init_sigma >= 0) || !std::isfinite(init_sigma)) throw ConfigError("fit.init_sigma must be >= 0");
  if (!(gradient_tolerance >= 0)) throw ConfigError("fit.gradient_tolerance must be >= 0");
}

json FitConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"steps", steps},
          {"w_x", weights.position},
          {"w_v", weights.velocity},
          {"w_reg", weights.regularization},
          {"init_sigma", init_sigma},
          {"optimizer", optimizer == Optimizer::kConjugateGradient ? "cg" : "gd"},
          {"gradient_tolerance", gradient_tolerance}};
}

FitConfig FitConfig::from_json(const json& j) {
  FitConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "steps") c.steps = value.get<int>();
      else if (key == "w_x") c.weights.position = value.get<double>();
      else if (key == "w_v") c.weights.velocity = value.get<double>();
      else if (key == "w_reg") c.weights.regularization = value.get<double>();
      else if (key == "init_sigma") c.init_sigma = value.get<double>();
      else if (key == "init_variance") c.init_sigma = std::sqrt(value.get<double>());
      else if (key == "gradient_tolerance") c.gradient_tolerance = value.get<double>();
      else if (key == "optimizer") {
        const auto name = value.get<std::string>();
        if (name == "cg") c.optimizer = Optimizer::kConjugateGradient;
        else if (name == "gd") c.optimizer = Optimizer::kGradientDescent;
        else throw ConfigError("fit.optimizer must be \"cg\" or \"gd\", got \"" + name + "\"");
      } else {
        throw ConfigError("unknown key fit." + key);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("fit: ") + e.what());
  }
  c.validate();
  return c;
}

FitResult fit_segment(const Segment& segment, const FitConfig& config, std::uint64_t seed,
                      const ModelAnchors* anchors) {
  segment.validate();
  config.validate();
  const auto n = static_cast<Eigen::Index>(segment.steps());
  const auto d = segment.accel.cols();

  auto rng = make_rng(seed, Stream::kFitInit);
  std::normal_distribution<double> unit(0.0, 1.0);
  RowMatrix a(n, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = config.init_sigma * unit(rng);

  RowMatrix grad;
  LossTerms terms = fb_loss(segment, a, config.weights, anchors, &grad);
  check_finite(terms, grad, 0);

  FitResult out;
  out.initial = terms;
  RowMatrix best = a;
  LossTerms best_terms = terms;
  out.best_loss_history.push_back(terms.total);

  auto track = [&](int step) {
    if (terms.total < best_terms.total) {
      best = a;
      best_terms = terms;
      out.best_step = step;
    }
    out.best_loss_history.push_back(best_terms.total);
    out.steps_run = step;
  };

  if (config.optimizer == Optimizer::kGradientDescent) {
    for (int step = 1; step <= config.steps; ++step) {
      a -= config.learning_rate * grad;
      terms = fb_loss(segment, a, config.weights, anchors, &grad);
      check_finite(terms, grad, step);
      track(step);
    }
  } else {
    // The objective is quadratic in the corrections, so grad(p) - grad(0) is
    // the Hessian-vector product.
    RowMatrix g0;
    fb_loss(segment, RowMatrix::Zero(n, d), config.weights, anchors, &g0);
    RowMatrix r = -grad;
    RowMatrix p = r;
    double rr = dot(r, r);
    const double rr0 = rr;
    RowMatrix hp;
    for (int step = 1; step <= config.steps; ++step) {
      if (rr <= config.gradient_tolerance * config.gradient_tolerance * rr0 || rr == 0.0) break;
      fb_loss(segment, p, config.weights, anchors, &hp);
      hp -= g0;
      const double php = dot(p, hp);
      if (!std::isfinite(php)) throw NumericalError("fit_segment: curvature not finite at step " + std::to_string(step), step);
      if (php <= 0) break;
      const double alpha = rr / php;
      a += alpha * p;
      terms = fb_loss(segment, a, config.weights, anchors, &grad);
      check_finite(terms, grad, step);
      // Residual from the true gradient keeps rounding errors from accumulating.
      r = -grad;
      const double rr_new = dot(r, r);
      p = r + (rr_new / rr) * p;
      rr = rr_new;
      track(step);
    }
  }

  out.corrections = best;
  out.final = best_terms;
  const auto fwd = integrate_forward(segment, best);
  const auto bwd = integrate_backward(segment, best);
  out.x_fwd = fwd.positions;
  out.v_fwd = fwd.velocities;
  out.x_bwd = bwd.positions;
  out.v_bwd = bwd.velocities;
  out.pseudo_labels = 0.5 * (fwd.positions + bwd.positions);
  return out;
}

}  // namespace imuloc::fit
