/* Copyright 2026 The AlphaMargin Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "alphamargin/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "alphamargin/errors.hpp"

namespace alphamargin {

namespace {

// Anneal ramp: 1 - 1000^-t, rescaled to hit exactly 1 at t = 1.
constexpr double kAnnealFloor = 1e-3;

void check_target(std::size_t y, std::size_t k) {
  if (y >= k) {
    throw std::out_of_range("target class " + std::to_string(y) +
                            " out of range for k = " + std::to_string(k));
  }
}

}  // namespace

std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kQMargin: return "q_margin";
    case LossMode::kA3M: return "a3m";
    case LossMode::kCosFace: return "cosface";
    case LossMode::kArcFace: return "arcface";
  }
  return "unknown";
}

LossMode parse_loss_mode(std::string_view name) {
  if (name == "q_margin") return LossMode::kQMargin;
  if (name == "a3m") return LossMode::kA3M;
  if (name == "cosface") return LossMode::kCosFace;
  if (name == "arcface") return LossMode::kArcFace;
  throw ConfigError("unknown loss mode '" + std::string(name) + "'");
}

bool is_alpha_mode(LossMode mode) {
  return mode == LossMode::kQMargin || mode == LossMode::kA3M;
}

void MarginConfig::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("scale must be finite and > 0");
  }
  if (!(margin >= 0.0) || !(margin < 1.0)) {
    throw ConfigError("margin must lie in [0, 1)");
  }
  if (anneal && !(anneal->start_epoch < anneal->end_epoch)) {
    throw ConfigError("anneal start must be < anneal end");
  }
}

double MarginConfig::margin_at(double epoch) const {
  if (!anneal) return margin;
  const double t = (epoch - anneal->start_epoch) /
                   (anneal->end_epoch - anneal->start_epoch);
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return margin;
  const double ramp = (1.0 - std::pow(kAnnealFloor, t)) / (1.0 - kAnnealFloor);
  return margin * ramp;
}

MarginConfig MarginConfig::resolved(double epoch) const {
  MarginConfig out = *this;
  out.margin = margin_at(epoch);
  out.anneal.reset();
  return out;
}

LossOutput fy_loss(std::span<const double> theta, std::size_t y,
                   std::span<const double> q, const AlphaParams& params) {
  check_target(y, theta.size());
  AlphaSolution sol = solve_alpha(theta, q, params);
  LossOutput out;
  out.posterior = std::move(sol.posterior);
  out.grad_logits.assign(theta.size(), 0.0);
  for (const auto& e : out.posterior.support()) out.grad_logits[e.index] = e.prob;
  out.grad_logits[y] -= 1.0;

  const double softmax_f = dual_value(theta, q, sol.tau, params);
  // D_f(e_y:q): f(1/q_y) on the target, f(0) elsewhere.
  const double f0 = f_value(0.0, params);
  double target_div = q[y] * f_value(1.0 / q[y], params);
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (j != y) target_div += q[j] * f0;
  }
  out.value = softmax_f + target_div - theta[y];
  return out;
}

LossOutput cross_entropy(std::span<const double> theta, std::size_t y) {
  validate_logits(theta);
  check_target(y, theta.size());
  const double mx = *std::max_element(theta.begin(), theta.end());
  std::vector<double> p(theta.size());
  double z = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    p[j] = std::exp(theta[j] - mx);
    z += p[j];
  }
  for (double& v : p) v /= z;

  LossOutput out;
  out.value = std::log(z) + mx - theta[y];
  out.grad_logits = p;
  out.grad_logits[y] -= 1.0;
  out.posterior = Posterior::from_dense(p);
  return out;
}

std::vector<double> build_q_margin_measure(std::size_t y, std::size_t k,
                                           const MarginConfig& cfg) {
  check_target(y, k);
  std::vector<double> q(k, 1.0);
  q[y] = std::exp(-cfg.scale * cfg.margin);
  return q;
}

std::vector<double> apply_arcface_margin(std::span<const double> c,
                                         std::size_t y, double m) {
  check_target(y, c.size());
  std::vector<double> out(c.begin(), c.end());
  if (m == 0.0) return out;
  const double cy = std::clamp(c[y], -1.0 + kArcCosClamp, 1.0 - kArcCosClamp);
  out[y] = std::cos(std::acos(cy) + m);
  return out;
}

std::vector<double> apply_cosface_margin(std::span<const double> c,
                                         std::size_t y, double m) {
  check_target(y, c.size());
  std::vector<double> out(c.begin(), c.end());
  out[y] -= m;
  return out;
}

std::vector<double> margin_logits(std::span<const double> c, std::size_t y,
                                  const MarginConfig& cfg) {
  std::vector<double> theta;
  switch (cfg.mode) {
    case LossMode::kQMargin:
      check_target(y, c.size());
      theta.assign(c.begin(), c.end());
      break;
    case LossMode::kA3M:
    case LossMode::kArcFace:
      theta = apply_arcface_margin(c, y, cfg.margin);
      break;
    case LossMode::kCosFace:
      theta = apply_cosface_margin(c, y, cfg.margin);
      break;
  }
  for (double& v : theta) v *= cfg.scale;
  return theta;
}

LossOutput loss_from_logits(std::span<const double> theta, std::size_t y,
                            const MarginConfig& cfg, const AlphaParams& params) {
  switch (cfg.mode) {
    case LossMode::kQMargin: {
      const auto q = build_q_margin_measure(y, theta.size(), cfg);
      return fy_loss(theta, y, q, params);
    }
    case LossMode::kA3M: {
      const std::vector<double> q(theta.size(), 1.0);
      return fy_loss(theta, y, q, params);
    }
    case LossMode::kCosFace:
    case LossMode::kArcFace:
      return cross_entropy(theta, y);
  }
  throw ConfigError("unhandled loss mode");
}

LossOutput q_margin_loss(std::span<const double> c, std::size_t y,
                         const MarginConfig& cfg, const AlphaParams& params) {
  if (cfg.mode != LossMode::kQMargin) throw ConfigError("q_margin_loss needs mode q_margin");
  return loss_from_logits(margin_logits(c, y, cfg), y, cfg, params);
}

LossOutput a3m_loss(std::span<const double> c, std::size_t y,
                    const MarginConfig& cfg, const AlphaParams& params) {
  if (cfg.mode != LossMode::kA3M) throw ConfigError("a3m_loss needs mode a3m");
  return loss_from_logits(margin_logits(c, y, cfg), y, cfg, params);
}

LossOutput baseline_ce_loss(std::span<const double> c, std::size_t y,
                            const MarginConfig& cfg) {
  if (is_alpha_mode(cfg.mode)) {
    throw ConfigError("baseline_ce_loss needs mode cosface or arcface");
  }
  return cross_entropy(margin_logits(c, y, cfg), y);
}

LossOutput evaluate_loss(std::span<const double> c, std::size_t y,
                         const MarginConfig& cfg, const AlphaParams& params) {
  return loss_from_logits(margin_logits(c, y, cfg), y, cfg, params);
}

double target_cosine_derivative(double c_y, const MarginConfig& cfg) {
  switch (cfg.mode) {
    case LossMode::kQMargin:
    case LossMode::kCosFace:
      return 1.0;
    case LossMode::kA3M:
    case LossMode::kArcFace: {
      if (cfg.margin == 0.0) return 1.0;
      const double lim = 1.0 - kArcCosClamp;
      if (c_y < -lim || c_y > lim) return 0.0;
      const double angle = std::acos(c_y);
      return std::sin(angle + cfg.margin) / std::sin(angle);
    }
  }
  return 1.0;
}

std::vector<double> cosine_gradient(std::span<const double> c, std::size_t y,
                                    std::span<const double> grad_logits,
                                    const MarginConfig& cfg) {
  check_target(y, c.size());
  if (grad_logits.size() != c.size()) {
    throw DimensionError("cosine_gradient: size mismatch");
  }
  std::vector<double> out(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) out[j] = cfg.scale * grad_logits[j];
  out[y] *= target_cosine_derivative(c[y], cfg);
  return out;
}

}  // namespace alphamargin
