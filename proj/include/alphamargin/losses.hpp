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

// Margin losses over cosine similarities against normalized prototypes.
//
//   q_margin : Fenchel-Young alpha loss on s*c with q_y = exp(-s*m), q_j = 1
//   a3m      : Fenchel-Young alpha loss on s*c' with ArcFace c'_y, q = 1
//   cosface  : cross-entropy on s*(c_y - m)
//   arcface  : cross-entropy on s*cos(acos(c_y) + m)
//
// All losses are stateless; an annealed margin is resolved by the caller
// (MarginConfig::resolved) before evaluation.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alphamargin/alpha_core.hpp"

namespace alphamargin {

enum class LossMode { kQMargin, kA3M, kCosFace, kArcFace };

std::string_view to_string(LossMode mode);
// Accepts "q_margin", "a3m", "cosface", "arcface". Throws ConfigError.
LossMode parse_loss_mode(std::string_view name);
// True for the alpha-divergence modes (q_margin, a3m).
bool is_alpha_mode(LossMode mode);

// Exponential ramp of the margin from 0 at start_epoch to the full value at
// end_epoch; the margin is 0 before and constant after.
struct AnnealSchedule {
  double start_epoch = 0.0;
  double end_epoch = 1.0;
};

struct MarginConfig {
  double scale = 64.0;
  double margin = 0.5;
  LossMode mode = LossMode::kA3M;
  std::optional<AnnealSchedule> anneal;

  void validate() const;
  // Effective margin at a (possibly fractional) epoch position.
  double margin_at(double epoch) const;
  // Copy with margin = margin_at(epoch) and no schedule.
  MarginConfig resolved(double epoch) const;
};

// ArcFace guards acos against |c| -> 1.
inline constexpr double kArcCosClamp = 1e-7;

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad_logits;  // dl / dtheta
  Posterior posterior;
};

// l_f(theta, y; q) = softmax_f(theta) + D_f(e_y:q) - theta_y, gradient p - e_y.
LossOutput fy_loss(std::span<const double> theta, std::size_t y,
                   std::span<const double> q, const AlphaParams& params);

// Standard softmax cross-entropy on logits; dense posterior.
LossOutput cross_entropy(std::span<const double> theta, std::size_t y);

std::vector<double> build_q_margin_measure(std::size_t y, std::size_t k,
                                           const MarginConfig& cfg);

std::vector<double> apply_arcface_margin(std::span<const double> c,
                                         std::size_t y, double m);
std::vector<double> apply_cosface_margin(std::span<const double> c,
                                         std::size_t y, double m);

LossOutput q_margin_loss(std::span<const double> c, std::size_t y,
                         const MarginConfig& cfg, const AlphaParams& params);
LossOutput a3m_loss(std::span<const double> c, std::size_t y,
                    const MarginConfig& cfg, const AlphaParams& params);
LossOutput baseline_ce_loss(std::span<const double> c, std::size_t y,
                            const MarginConfig& cfg);

// Logits fed to the underlying loss for the configured mode.
std::vector<double> margin_logits(std::span<const double> c, std::size_t y,
                                  const MarginConfig& cfg);
// Underlying loss on already-margined logits (q chosen per mode).
LossOutput loss_from_logits(std::span<const double> theta, std::size_t y,
                            const MarginConfig& cfg, const AlphaParams& params);
// Dispatch on cfg.mode; params are ignored by the cross-entropy modes.
LossOutput evaluate_loss(std::span<const double> c, std::size_t y,
                         const MarginConfig& cfg, const AlphaParams& params);

// d c'_y / d c_y for the configured margin transform. ArcFace gives
// sin(acos(c_y) + m) / sin(acos(c_y)) inside the clamp range and 0 outside.
double target_cosine_derivative(double c_y, const MarginConfig& cfg);

// dl/dc given dl/dtheta for the configured mode (chain rule through s and
// the target margin).
std::vector<double> cosine_gradient(std::span<const double> c, std::size_t y,
                                    std::span<const double> grad_logits,
                                    const MarginConfig& cfg);

}  // namespace alphamargin
