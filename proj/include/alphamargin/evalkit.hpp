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

// Verification scoring (genuine/impostor cosine trials, FRR@FAR, DET
// curves) and the posterior sparsity / prototype misalignment statistics.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "alphamargin/alpha_core.hpp"
#include "alphamargin/losses.hpp"
#include "alphamargin/model.hpp"
#include "alphamargin/synthdata.hpp"

namespace alphamargin {

struct Trial {
  std::size_t first;
  std::size_t second;
  bool same_identity;
};

struct TrialScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

// Cosine score per trial, routed by the same-identity flag.
// Throws std::out_of_range for indices past the embedding count.
TrialScoreSet score_trials(const RowMatrix& embeddings, std::span<const Trial> trials);
TrialScoreSet score_trials(const Dataset& dataset, const Embedder& embedder,
                           std::span<const Trial> trials);

// All genuine pairs (capped at max_genuine, sampled if more) plus
// num_impostor distinct random different-identity pairs.
std::vector<Trial> make_trials(const Dataset& dataset, std::size_t num_impostor,
                               std::size_t max_genuine, std::uint64_t seed);

// Text format: one "i j flag" line per trial, flag 1 = same identity.
void write_trials(std::span<const Trial> trials, const std::filesystem::path& path);
std::vector<Trial> read_trials(const std::filesystem::path& path);

enum class FarStatus { kOk, kUnattainable };

struct FrrAtFar {
  FarStatus status = FarStatus::kOk;
  double frr = 0.0;
  double threshold = 0.0;
  double far = 0.0;  // achieved false acceptance rate at the threshold
};

// Threshold is the smallest impostor score t with #{impostor >= t} / N <= far_target;
// frr is the fraction of genuine scores strictly below t. Impostors equal
// to the threshold count as accepted. Targets below 1/N are reported as
// kUnattainable. Throws std::invalid_argument on empty score lists.
FrrAtFar frr_at_far(const TrialScoreSet& scores, double far_target);

struct DetPoint {
  double far;
  double frr;
  double threshold;
};

// One point per distinct score value (descending threshold), so far is
// nondecreasing and frr nonincreasing along the result.
std::vector<DetPoint> det_points(const TrialScoreSet& scores);

// CSV with header "far,frr,threshold".
void write_det_csv(std::span<const DetPoint> points, std::ostream& os);

// Trapezoidal mean over log10(FAR) in [far_lo, far_hi] of the relative FRR
// improvement (frr_base - frr_sys) / frr_base, on n_points log-spaced FAR
// values. Points where the baseline FRR is 0 contribute 0.
double average_relative_improvement(const TrialScoreSet& baseline,
                                    const TrialScoreSet& system, double far_lo,
                                    double far_hi, std::size_t n_points = 21);

struct SparsityReport {
  double misaligned_identity_fraction = 0.0;
  double misaligned_image_fraction = 0.0;
  double posterior_sparsity = 0.0;
  double onehot_fraction = 0.0;

  // "key = value" lines.
  std::string to_text() const;
};

// Statistics from per-example posteriors. Identities without examples are
// ignored in the identity fraction. Zero means exactly zero.
SparsityReport sparsity_from_posteriors(std::span<const Posterior> posteriors,
                                        std::span<const std::uint32_t> labels);

// Posteriors of the configured loss (margin included) for every example.
std::vector<Posterior> loss_posteriors(const RowMatrix& embeddings,
                                       std::span<const std::uint32_t> labels,
                                       const PrototypeMatrix& head,
                                       const MarginConfig& cfg,
                                       const AlphaParams& params);

SparsityReport sparsity_report(const Dataset& dataset, const Model& model,
                               const MarginConfig& cfg, const AlphaParams& params);

}  // namespace alphamargin
