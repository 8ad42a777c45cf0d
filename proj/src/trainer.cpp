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

#include "alphamargin/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

#include "alphamargin/errors.hpp"

namespace alphamargin {

namespace {

// Keeps the shuffling stream independent of the initialization stream.
constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

template <typename Param, typename Grad>
void sgd_update(Param& w, const Grad& g, Param& buf, double lr, double mu, double wd) {
  buf = mu * buf + g + wd * w;
  w -= lr * buf;
}

RowMatrix gather_rows(const RowMatrix& m, std::span<const std::size_t> idx) {
  RowMatrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lr_schedule.empty()) throw ConfigError("lr schedule is empty");
  for (std::size_t i = 0; i < lr_schedule.size(); ++i) {
    if (!(lr_schedule[i].lr > 0.0)) throw ConfigError("learning rates must be > 0");
    if (i > 0 && lr_schedule[i].epoch <= lr_schedule[i - 1].epoch) {
      throw ConfigError("lr schedule epochs must be strictly increasing");
    }
  }
  if (lr_schedule.front().epoch != 0) throw ConfigError("lr schedule must start at epoch 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (reinit_epoch && (*reinit_epoch < 1 || *reinit_epoch >= epochs)) {
    throw ConfigError("reinit_epoch must lie in [1, epochs)");
  }
  if (hidden_dim < 1 || embedding_dim < 2) throw ConfigError("model dims too small");
  loss.validate();
  if (is_alpha_mode(loss.mode)) alpha.validate();
}

double TrainConfig::lr_at(int epoch) const {
  double lr = lr_schedule.front().lr;
  for (const LrStep& s : lr_schedule) {
    if (s.epoch <= epoch) lr = s.lr;
  }
  return lr;
}

ModelGradients ModelGradients::zeros_like(const Model& model) {
  const Embedder& e = model.embedder;
  return {RowMatrix::Zero(e.w1.rows(), e.w1.cols()), Eigen::VectorXd::Zero(e.b1.size()),
          RowMatrix::Zero(e.w2.rows(), e.w2.cols()), Eigen::VectorXd::Zero(e.b2.size()),
          RowMatrix::Zero(model.head.rows.rows(), model.head.rows.cols())};
}

bool ModelGradients::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
         head.allFinite();
}

SgdState SgdState::for_model(const Model& model) {
  return {ModelGradients::zeros_like(model)};
}

void SgdState::reset_head() { momentum.head.setZero(); }

ForwardCache forward(const Model& model, const RowMatrix& input) {
  const Embedder& e = model.embedder;
  if (static_cast<std::size_t>(input.cols()) != e.input_dim()) {
    throw DimensionError("forward: input dimension mismatch");
  }
  ForwardCache c;
  c.input = input;
  c.hidden = ((input * e.w1.transpose()).rowwise() + e.b1.transpose()).array().tanh().matrix();
  c.pre_norm = (c.hidden * e.w2.transpose()).rowwise() + e.b2.transpose();
  c.embeddings = c.pre_norm;
  for (Eigen::Index i = 0; i < c.embeddings.rows(); ++i) {
    const double n = c.embeddings.row(i).norm();
    if (n > 0.0) c.embeddings.row(i) /= n;
  }
  c.cosines = forward_cosines(c.embeddings, model.head);
  return c;
}

HeadBackward head_backward(const RowMatrix& embeddings, const PrototypeMatrix& head,
                           const RowMatrix& grad_cos) {
  if (grad_cos.rows() != embeddings.rows() || grad_cos.cols() != head.rows.rows() ||
      embeddings.cols() != head.rows.cols()) {
    throw DimensionError("head_backward: shape mismatch");
  }
  RowMatrix unit = head.rows;
  Eigen::VectorXd norms(unit.rows());
  for (Eigen::Index j = 0; j < unit.rows(); ++j) {
    norms[j] = unit.row(j).norm();
    if (norms[j] > 0.0) unit.row(j) /= norms[j];
  }
  HeadBackward out;
  out.grad_embeddings = grad_cos * unit;
  RowMatrix g_unit = grad_cos.transpose() * embeddings;
  out.grad_head.resize(unit.rows(), unit.cols());
  for (Eigen::Index j = 0; j < unit.rows(); ++j) {
    if (norms[j] == 0.0) {
      out.grad_head.row(j).setZero();
      continue;
    }
    const double radial = unit.row(j).dot(g_unit.row(j));
    out.grad_head.row(j) = (g_unit.row(j) - radial * unit.row(j)) / norms[j];
  }
  return out;
}

ModelGradients backward(const Model& model, const ForwardCache& cache,
                        std::span<const std::uint32_t> labels,
                        std::span<const std::vector<double>> grad_logits,
                        const MarginConfig& cfg) {
  const Eigen::Index b = cache.cosines.rows();
  const Eigen::Index k = cache.cosines.cols();
  if (labels.size() != static_cast<std::size_t>(b) ||
      grad_logits.size() != static_cast<std::size_t>(b)) {
    throw DimensionError("backward: batch size mismatch");
  }

  RowMatrix grad_cos(b, k);
  for (Eigen::Index i = 0; i < b; ++i) {
    std::span<const double> c(cache.cosines.row(i).data(), static_cast<std::size_t>(k));
    const auto g = cosine_gradient(c, labels[static_cast<std::size_t>(i)],
                                   grad_logits[static_cast<std::size_t>(i)], cfg);
    for (Eigen::Index j = 0; j < k; ++j) grad_cos(i, j) = g[static_cast<std::size_t>(j)];
  }

  HeadBackward hb = head_backward(cache.embeddings, model.head, grad_cos);

  // Through z -> z / |z|.
  RowMatrix grad_z(b, cache.pre_norm.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    const double n = cache.pre_norm.row(i).norm();
    const auto e = cache.embeddings.row(i);
    const auto ge = hb.grad_embeddings.row(i);
    grad_z.row(i) = n > 0.0 ? ((ge - e.dot(ge) * e) / n).eval()
                            : Eigen::RowVectorXd::Zero(ge.size()).eval();
  }

  const Embedder& emb = model.embedder;
  ModelGradients g;
  g.w2 = grad_z.transpose() * cache.hidden;
  g.b2 = grad_z.colwise().sum().transpose();
  RowMatrix grad_pre = ((grad_z * emb.w2).array() * (1.0 - cache.hidden.array().square())).matrix();
  g.w1 = grad_pre.transpose() * cache.input;
  g.b1 = grad_pre.colwise().sum().transpose();
  g.head = std::move(hb.grad_head);
  return g;
}

void backward_step(Model& model, SgdState& state, const ForwardCache& cache,
                   std::span<const std::uint32_t> labels,
                   std::span<const std::vector<double>> grad_logits,
                   const MarginConfig& cfg, double lr, double momentum,
                   double weight_decay) {
  const ModelGradients g = backward(model, cache, labels, grad_logits, cfg);
  if (!g.all_finite()) throw NumericalError("non-finite gradient in backward_step");
  Embedder& e = model.embedder;
  ModelGradients& buf = state.momentum;
  sgd_update(e.w1, g.w1, buf.w1, lr, momentum, weight_decay);
  sgd_update(e.b1, g.b1, buf.b1, lr, momentum, weight_decay);
  sgd_update(e.w2, g.w2, buf.w2, lr, momentum, weight_decay);
  sgd_update(e.b2, g.b2, buf.b2, lr, momentum, weight_decay);
  sgd_update(model.head.rows, g.head, buf.head, lr, momentum, weight_decay);
  model.head.normalize_rows();
}

BatchLoss batch_loss(const ForwardCache& cache, std::span<const std::uint32_t> labels,
                     const MarginConfig& cfg, const AlphaParams& params) {
  const Eigen::Index b = cache.cosines.rows();
  const auto k = static_cast<std::size_t>(cache.cosines.cols());
  BatchLoss out;
  out.grad_logits.reserve(static_cast<std::size_t>(b));
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    std::span<const double> c(cache.cosines.row(i).data(), k);
    LossOutput lo = evaluate_loss(c, labels[static_cast<std::size_t>(i)], cfg, params);
    out.loss += lo.value * inv_b;
    for (double& v : lo.grad_logits) v *= inv_b;
    out.grad_logits.push_back(std::move(lo.grad_logits));
  }
  return out;
}

PrototypeMatrix reinitialize_prototypes(const Dataset& dataset, const Embedder& embedder,
                                        std::mt19937_64& rng,
                                        std::vector<std::size_t>* redrawn) {
  const RowMatrix emb = embedder.embed(dataset.points);
  PrototypeMatrix w;
  w.rows = RowMatrix::Zero(static_cast<Eigen::Index>(dataset.num_classes()), emb.cols());
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    w.rows.row(dataset.labels[static_cast<std::size_t>(i)]) += emb.row(i);
  }
  for (Eigen::Index j = 0; j < w.rows.rows(); ++j) {
    const double n = w.rows.row(j).norm();
    if (n > 0.0) {
      w.rows.row(j) /= n;
    } else {
      w.rows.row(j) = random_unit_vector(static_cast<std::size_t>(emb.cols()), rng).transpose();
      if (redrawn) redrawn->push_back(static_cast<std::size_t>(j));
    }
  }
  return w;
}

void TrainLog::write_csv(std::ostream& os) const {
  os << "epoch,loss,misalignment_ids,misalignment_images,posterior_sparsity,onehot_fraction\n";
  char buf[256];
  for (const EpochMetrics& m : epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", m.epoch, m.loss,
                  m.report.misaligned_identity_fraction, m.report.misaligned_image_fraction,
                  m.report.posterior_sparsity, m.report.onehot_fraction);
    os << buf;
  }
}

Model initial_model(std::size_t input_dim, std::size_t k, const TrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  Model m;
  m.embedder = Embedder::random(input_dim, cfg.hidden_dim, cfg.embedding_dim, rng);
  m.head = PrototypeMatrix::random(k, cfg.embedding_dim, rng);
  return m;
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg, std::ostream* progress) {
  cfg.validate();
  dataset.validate();
  if (dataset.size() == 0) throw ConfigError("train: empty dataset");

  TrainResult result;
  result.model = initial_model(dataset.dim(), dataset.num_classes(), cfg);
  Model& model = result.model;
  SgdState state = SgdState::for_model(model);
  std::mt19937_64 rng(cfg.seed ^ kShuffleStream);

  const std::size_t n = dataset.size();
  const std::size_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  auto log_event = [&](const std::string& line) {
    result.log.events.push_back(line);
    if (progress) *progress << line << '\n';
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      std::vector<std::uint32_t> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = dataset.labels[idx[i]];

      const double position = epoch + static_cast<double>(b) / static_cast<double>(n_batches);
      const MarginConfig loss_cfg = cfg.loss.resolved(position);
      const ForwardCache cache = forward(model, gather_rows(dataset.points, idx));
      const BatchLoss bl = batch_loss(cache, labels, loss_cfg, cfg.alpha);
      loss_sum += bl.loss * static_cast<double>(idx.size());
      backward_step(model, state, cache, labels, bl.grad_logits, loss_cfg, lr, cfg.momentum,
                    cfg.weight_decay);
    }

    if (cfg.reinit_epoch && epoch + 1 == *cfg.reinit_epoch) {
      std::vector<std::size_t> redrawn;
      model.head = reinitialize_prototypes(dataset, model.embedder, rng, &redrawn);
      state.reset_head();
      log_event("event=reinit epoch=" + std::to_string(epoch + 1) +
                " redrawn=" + std::to_string(redrawn.size()));
      for (std::size_t id : redrawn) {
        log_event("warning=zero_prototype identity=" + std::to_string(id));
      }
    }

    EpochMetrics m;
    m.epoch = epoch + 1;
    m.loss = loss_sum / static_cast<double>(n);
    m.report = sparsity_report(dataset, model, cfg.loss.resolved(epoch + 1.0), cfg.alpha);
    result.log.epochs.push_back(m);
    if (progress) {
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "epoch=%d lr=%g loss=%.6f misaligned_images=%.4f misaligned_ids=%.4f "
                    "sparsity=%.4f onehot=%.4f",
                    m.epoch, lr, m.loss, m.report.misaligned_image_fraction,
                    m.report.misaligned_identity_fraction, m.report.posterior_sparsity,
                    m.report.onehot_fraction);
      *progress << buf << '\n';
    }
  }
  return result;
}

}  // namespace alphamargin
