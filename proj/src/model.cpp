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

#include "alphamargin/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "alphamargin/errors.hpp"
#include "binary_io.hpp"

namespace alphamargin {

namespace {

constexpr char kMagic[4] = {'A', 'M', 'C', 'K'};

void fill_normal(RowMatrix& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
}

void write_block(std::ostream& os, const double* data, Eigen::Index n) {
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(n * static_cast<Eigen::Index>(sizeof(double))));
}

void read_block(std::istream& is, double* data, Eigen::Index n, const char* what) {
  detail::read_bytes(is, reinterpret_cast<char*>(data),
                     static_cast<std::size_t>(n) * sizeof(double), what);
}

}  // namespace

Eigen::VectorXd random_unit_vector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

Embedder Embedder::random(std::size_t input_dim, std::size_t hidden_dim,
                          std::size_t embedding_dim, std::mt19937_64& rng) {
  Embedder e;
  e.w1.resize(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(input_dim));
  e.w2.resize(static_cast<Eigen::Index>(embedding_dim), static_cast<Eigen::Index>(hidden_dim));
  fill_normal(e.w1, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  fill_normal(e.w2, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
  e.b1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden_dim));
  e.b2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(embedding_dim));
  return e;
}

RowMatrix Embedder::embed(const RowMatrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim()) {
    throw DimensionError("embed: input dimension mismatch");
  }
  RowMatrix h = ((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
  RowMatrix z = (h * w2.transpose()).rowwise() + b2.transpose();
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double n = z.row(i).norm();
    if (n > 0.0) z.row(i) /= n;
  }
  return z;
}

PrototypeMatrix PrototypeMatrix::random(std::size_t k, std::size_t dim, std::mt19937_64& rng) {
  PrototypeMatrix w;
  w.rows.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dim));
  for (std::size_t j = 0; j < k; ++j) {
    w.rows.row(static_cast<Eigen::Index>(j)) = random_unit_vector(dim, rng).transpose();
  }
  return w;
}

void PrototypeMatrix::normalize_rows() {
  for (Eigen::Index j = 0; j < rows.rows(); ++j) {
    const double n = rows.row(j).norm();
    if (n > 0.0) rows.row(j) /= n;
  }
}

double PrototypeMatrix::max_norm_deviation() const {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < rows.rows(); ++j) {
    worst = std::max(worst, std::abs(rows.row(j).norm() - 1.0));
  }
  return worst;
}

RowMatrix forward_cosines(const RowMatrix& embeddings, const PrototypeMatrix& head) {
  if (embeddings.cols() != head.rows.cols()) {
    throw DimensionError("forward_cosines: embedding dim " + std::to_string(embeddings.cols()) +
                         " vs prototype dim " + std::to_string(head.rows.cols()));
  }
  RowMatrix unit = head.rows;
  for (Eigen::Index j = 0; j < unit.rows(); ++j) {
    const double n = unit.row(j).norm();
    if (n > 0.0) unit.row(j) /= n;
  }
  return embeddings * unit.transpose();
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const Embedder& e = model.embedder;
  if (model.head.dim() != e.output_dim()) {
    throw DimensionError("checkpoint: head dim does not match embedder output");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint64_t>(os, e.input_dim());
  detail::write_le<std::uint64_t>(os, e.hidden_dim());
  detail::write_le<std::uint64_t>(os, e.output_dim());
  detail::write_le<std::uint64_t>(os, model.head.size());
  write_block(os, e.w1.data(), e.w1.size());
  write_block(os, e.b1.data(), e.b1.size());
  write_block(os, e.w2.data(), e.w2.size());
  write_block(os, e.b2.data(), e.b2.size());
  write_block(os, model.head.rows.data(), model.head.rows.size());
  if (!os) throw FormatError(FormatError::Kind::kIo, "write failed: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());
  char magic[4];
  detail::read_bytes(is, magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw FormatError(FormatError::Kind::kCorruptHeader, "bad checkpoint magic in " + path.string());
  }
  const auto version = detail::read_le<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(FormatError::Kind::kVersionMismatch,
                      "checkpoint version " + std::to_string(version) + " unsupported");
  }
  const auto in = static_cast<Eigen::Index>(detail::read_le<std::uint64_t>(is, "input_dim"));
  const auto hid = static_cast<Eigen::Index>(detail::read_le<std::uint64_t>(is, "hidden_dim"));
  const auto emb = static_cast<Eigen::Index>(detail::read_le<std::uint64_t>(is, "embedding_dim"));
  const auto k = static_cast<Eigen::Index>(detail::read_le<std::uint64_t>(is, "k"));
  constexpr Eigen::Index kMaxDim = Eigen::Index{1} << 24;
  if (in < 1 || hid < 1 || emb < 1 || k < 1 || in > kMaxDim || hid > kMaxDim || emb > kMaxDim ||
      k > kMaxDim) {
    throw FormatError(FormatError::Kind::kCorruptHeader, "implausible checkpoint header");
  }

  Model m;
  m.embedder.w1.resize(hid, in);
  m.embedder.b1.resize(hid);
  m.embedder.w2.resize(emb, hid);
  m.embedder.b2.resize(emb);
  m.head.rows.resize(k, emb);
  read_block(is, m.embedder.w1.data(), m.embedder.w1.size(), "W1");
  read_block(is, m.embedder.b1.data(), m.embedder.b1.size(), "b1");
  read_block(is, m.embedder.w2.data(), m.embedder.w2.size(), "W2");
  read_block(is, m.embedder.b2.data(), m.embedder.b2.size(), "b2");
  read_block(is, m.head.rows.data(), m.head.rows.size(), "head");
  return m;
}

}  // namespace alphamargin
