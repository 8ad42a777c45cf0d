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

// Synthetic identity datasets on the unit sphere and their file formats.
//
// Binary dataset layout (all little-endian):
//   char[4]  magic "AMDS"
//   uint32   version (1)
//   uint64   N, d, k
//   float64  N*d point coordinates, row-major
//   uint32   N labels

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace alphamargin {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SynthSpec {
  std::size_t k = 200;               // identities
  std::size_t d = 16;                // ambient dimension
  std::size_t samples_per_id = 20;   // count for regular identities
  double few_fraction = 0.0;         // fraction of few-shot identities
  std::size_t few_count = 2;         // samples for each few-shot identity
  double noise_kappa = 50.0;         // effective concentration; +inf = no noise
  std::uint64_t seed = 1;

  void validate() const;
  // ceil(few_fraction * k)
  std::size_t num_few_shot() const;
};

struct Dataset {
  RowMatrix points;                   // N x d, unit rows
  std::vector<std::uint32_t> labels;  // N
  std::vector<std::size_t> id_counts;  // k

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
  std::size_t num_classes() const { return id_counts.size(); }

  // Rebuilds id_counts from labels for k classes.
  void recount(std::size_t k);
  // Throws DimensionError when shapes, labels or counts are inconsistent.
  void validate() const;
};

inline constexpr std::uint32_t kDatasetVersion = 1;

// Identity means (k x d, uniform on the sphere) that generate() uses.
RowMatrix identity_means(const SynthSpec& spec);

// Samples are normalize(mean + N(0, I) / sqrt(noise_kappa)), grouped by
// identity. Deterministic in spec.seed.
Dataset generate(const SynthSpec& spec);

void save(const Dataset& dataset, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

// Plain CSV import: "label,x_1,...,x_d" per line; rows are L2-normalized and
// k is taken as max label + 1. Lines starting with '#' are skipped.
Dataset load_csv(const std::filesystem::path& path);

}  // namespace alphamargin
