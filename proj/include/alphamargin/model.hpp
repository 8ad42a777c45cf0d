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

// Embedder (two-layer perceptron with L2-normalized output) and the
// normalized prototype head, plus the checkpoint format.
//
// Checkpoint layout (little-endian):
//   char[4]  magic "AMCK"
//   uint32   version (1)
//   uint64   input_dim, hidden_dim, embedding_dim, k
//   float64  W1 (hidden x input), b1 (hidden), W2 (embedding x hidden),
//            b2 (embedding), head (k x embedding); matrices row-major

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>

#include "alphamargin/synthdata.hpp"

namespace alphamargin {

// Rows normalize x -> tanh(W1 x + b1) -> W2 h + b2 -> z / |z|.
struct Embedder {
  RowMatrix w1;
  Eigen::VectorXd b1;
  RowMatrix w2;
  Eigen::VectorXd b2;

  static Embedder random(std::size_t input_dim, std::size_t hidden_dim,
                         std::size_t embedding_dim, std::mt19937_64& rng);

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(w2.rows()); }

  // Unit-norm embeddings, one row per input row.
  RowMatrix embed(const RowMatrix& x) const;
};

// k unit-norm identity prototypes.
struct PrototypeMatrix {
  RowMatrix rows;

  static PrototypeMatrix random(std::size_t k, std::size_t dim, std::mt19937_64& rng);

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }

  // Projects every row back to the unit sphere; zero rows are left alone.
  void normalize_rows();
  // Largest | |w_j| - 1 | over rows.
  double max_norm_deviation() const;
};

struct Model {
  Embedder embedder;
  PrototypeMatrix head;
};

// c_ij = <e_i, w_j / |w_j|>. Throws DimensionError if dims disagree.
RowMatrix forward_cosines(const RowMatrix& embeddings, const PrototypeMatrix& head);

// Uniform sample on the unit sphere.
Eigen::VectorXd random_unit_vector(std::size_t dim, std::mt19937_64& rng);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace alphamargin
