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

// Desk-scale embedding trainer: a two-layer perceptron embedder feeding a
// normalized prototype head, trained with SGD (momentum, weight decay,
// step-wise learning rate) under one of the margin losses. Optionally
// replaces the head by per-identity mean embeddings mid-training.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alphamargin/alpha_core.hpp"
#include "alphamargin/evalkit.hpp"
#include "alphamargin/losses.hpp"
#include "alphamargin/model.hpp"
#include "alphamargin/synthdata.hpp"

namespace alphamargin {

struct LrStep {
  int epoch;  // first (0-based) epoch using this rate
  double lr;
};

struct TrainConfig {
  int epochs = 20;
  std::size_t batch_size = 64;
  std::vector<LrStep> lr_schedule{{0, 0.1}, {7, 0.01}, {13, 0.001}};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Re-initialize the head after this many completed epochs.
  std::optional<int> reinit_epoch;
  std::uint64_t seed = 1;
  std::size_t hidden_dim = 64;
  std::size_t embedding_dim = 16;
  MarginConfig loss;
  AlphaParams alpha;

  void validate() const;
  double lr_at(int epoch) const;
};

// Parameter-shaped buffers, used for gradients and momentum alike.
struct ModelGradients {
  RowMatrix w1;
  Eigen::VectorXd b1;
  RowMatrix w2;
  Eigen::VectorXd b2;
  RowMatrix head;

  static ModelGradients zeros_like(const Model& model);
  bool all_finite() const;
};

struct SgdState {
  ModelGradients momentum;

  static SgdState for_model(const Model& model);
  void reset_head();
};

// Intermediate activations of a batch.
struct ForwardCache {
  RowMatrix input;       // b x d_in
  RowMatrix hidden;      // b x hidden, after tanh
  RowMatrix pre_norm;    // b x emb, before normalization
  RowMatrix embeddings;  // b x emb, unit rows
  RowMatrix cosines;     // b x k
};

ForwardCache forward(const Model& model, const RowMatrix& input);

// Gradients w.r.t. unit embeddings and raw head rows from dl/dc, using the
// tangent projections of both normalizations. grad_cos is b x k.
struct HeadBackward {
  RowMatrix grad_embeddings;  // b x emb
  RowMatrix grad_head;        // k x emb
};
HeadBackward head_backward(const RowMatrix& embeddings, const PrototypeMatrix& head,
                           const RowMatrix& grad_cos);

// Full backpropagation of the per-sample logit gradients (already divided
// by the batch size if a mean loss is wanted).
ModelGradients backward(const Model& model, const ForwardCache& cache,
                        std::span<const std::uint32_t> labels,
                        std::span<const std::vector<double>> grad_logits,
                        const MarginConfig& cfg);

// Chain rule plus one SGD step (buf = mu*buf + g + wd*w; w -= lr*buf),
// followed by re-normalization of the head rows. Throws NumericalError on
// non-finite gradients.
void backward_step(Model& model, SgdState& state, const ForwardCache& cache,
                   std::span<const std::uint32_t> labels,
                   std::span<const std::vector<double>> grad_logits,
                   const MarginConfig& cfg, double lr, double momentum,
                   double weight_decay);

// Mean loss over a batch plus the per-sample logit gradients scaled by 1/b.
struct BatchLoss {
  double loss = 0.0;
  std::vector<std::vector<double>> grad_logits;
};
BatchLoss batch_loss(const ForwardCache& cache, std::span<const std::uint32_t> labels,
                     const MarginConfig& cfg, const AlphaParams& params);

// L2-normalized per-identity sums of embeddings (evaluation pass, no updates).
// Identities with a zero sum get a random unit row; their ids are appended
// to redrawn when given.
PrototypeMatrix reinitialize_prototypes(const Dataset& dataset, const Embedder& embedder,
                                        std::mt19937_64& rng,
                                        std::vector<std::size_t>* redrawn = nullptr);

struct EpochMetrics {
  int epoch;  // 1-based count of completed epochs
  double loss;
  SparsityReport report;
};

struct TrainLog {
  std::vector<EpochMetrics> epochs;
  std::vector<std::string> events;

  // Columns: epoch,loss,misalignment_ids,misalignment_images,
  //          posterior_sparsity,onehot_fraction
  void write_csv(std::ostream& os) const;
};

struct TrainResult {
  Model model;
  TrainLog log;
};

// Model initialized from cfg.seed (what train() starts from).
Model initial_model(std::size_t input_dim, std::size_t k, const TrainConfig& cfg);

// progress, when given, receives one line per epoch and per event.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg,
                  std::ostream* progress = nullptr);

}  // namespace alphamargin
