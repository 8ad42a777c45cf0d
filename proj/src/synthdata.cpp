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

#include "alphamargin/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "alphamargin/errors.hpp"
#include "binary_io.hpp"

namespace alphamargin {

namespace {

constexpr char kMagic[4] = {'A', 'M', 'D', 'S'};

Eigen::VectorXd random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace

void SynthSpec::validate() const {
  if (k < 2) throw ConfigError("synth: k must be >= 2");
  if (d < 2) throw ConfigError("synth: d must be >= 2");
  if (samples_per_id < 1 || few_count < 1) {
    throw ConfigError("synth: sample counts must be >= 1");
  }
  if (!(few_fraction >= 0.0 && few_fraction <= 1.0)) {
    throw ConfigError("synth: few_fraction must lie in [0, 1]");
  }
  if (!(noise_kappa > 0.0)) throw ConfigError("synth: noise_kappa must be > 0");
}

std::size_t SynthSpec::num_few_shot() const {
  // Small slack so that e.g. 0.3 * 200 does not round up to 61.
  return static_cast<std::size_t>(
      std::ceil(few_fraction * static_cast<double>(k) - 1e-9));
}

void Dataset::recount(std::size_t k) {
  id_counts.assign(k, 0);
  for (auto y : labels) {
    if (y >= k) throw DimensionError("label out of range");
    ++id_counts[y];
  }
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(points.rows()) != labels.size()) {
    throw DimensionError("dataset: points/labels size mismatch");
  }
  std::vector<std::size_t> counts(id_counts.size(), 0);
  for (auto y : labels) {
    if (y >= id_counts.size()) throw DimensionError("dataset: label out of range");
    ++counts[y];
  }
  if (counts != id_counts) throw DimensionError("dataset: id_counts inconsistent");
  for (auto c : counts) {
    if (c == 0) throw DimensionError("dataset: identity without samples");
  }
}

RowMatrix identity_means(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  RowMatrix means(static_cast<Eigen::Index>(spec.k),
                  static_cast<Eigen::Index>(spec.d));
  for (std::size_t i = 0; i < spec.k; ++i) {
    means.row(static_cast<Eigen::Index>(i)) = random_unit(spec.d, rng).transpose();
  }
  return means;
}

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  RowMatrix means(static_cast<Eigen::Index>(spec.k),
                  static_cast<Eigen::Index>(spec.d));
  for (std::size_t i = 0; i < spec.k; ++i) {
    means.row(static_cast<Eigen::Index>(i)) = random_unit(spec.d, rng).transpose();
  }

  std::vector<std::size_t> order(spec.k);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> counts(spec.k, spec.samples_per_id);
  const std::size_t n_few = spec.num_few_shot();
  for (std::size_t i = 0; i < n_few; ++i) counts[order[i]] = spec.few_count;

  Dataset ds;
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  ds.points.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(spec.d));
  ds.labels.reserve(total);

  const double sigma = std::isinf(spec.noise_kappa) ? 0.0 : 1.0 / std::sqrt(spec.noise_kappa);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Index row = 0;
  for (std::size_t id = 0; id < spec.k; ++id) {
    for (std::size_t n = 0; n < counts[id]; ++n, ++row) {
      Eigen::VectorXd x = means.row(static_cast<Eigen::Index>(id)).transpose();
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += sigma * normal(rng);
      const double norm = x.norm();
      // Only reachable for absurd noise levels.
      if (norm == 0.0) x = random_unit(spec.d, rng);
      else x /= norm;
      ds.points.row(row) = x.transpose();
      ds.labels.push_back(static_cast<std::uint32_t>(id));
    }
  }
  ds.id_counts = std::move(counts);
  return ds;
}

void save(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  detail::write_le<std::uint32_t>(os, kDatasetVersion);
  detail::write_le<std::uint64_t>(os, dataset.size());
  detail::write_le<std::uint64_t>(os, dataset.dim());
  detail::write_le<std::uint64_t>(os, dataset.num_classes());
  os.write(reinterpret_cast<const char*>(dataset.points.data()),
           static_cast<std::streamsize>(dataset.points.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(dataset.labels.data()),
           static_cast<std::streamsize>(dataset.labels.size() * sizeof(std::uint32_t)));
  if (!os) throw FormatError(FormatError::Kind::kIo, "write failed: " + path.string());
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());

  char magic[4];
  detail::read_bytes(is, magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw FormatError(FormatError::Kind::kCorruptHeader, "bad dataset magic in " + path.string());
  }
  const auto version = detail::read_le<std::uint32_t>(is, "version");
  if (version != kDatasetVersion) {
    throw FormatError(FormatError::Kind::kVersionMismatch,
                      "dataset version " + std::to_string(version) + " unsupported");
  }
  const auto n = detail::read_le<std::uint64_t>(is, "N");
  const auto d = detail::read_le<std::uint64_t>(is, "d");
  const auto k = detail::read_le<std::uint64_t>(is, "k");
  if (d < 1 || k < 1 || n > (std::uint64_t{1} << 40) || d > (std::uint64_t{1} << 20) ||
      k > (std::uint64_t{1} << 32)) {
    throw FormatError(FormatError::Kind::kCorruptHeader, "implausible dataset header");
  }

  const std::uint64_t header = 4 + 4 + 3 * 8;
  const std::uint64_t expected = header + n * d * sizeof(double) + n * sizeof(std::uint32_t);
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (!ec && actual < expected) {
    throw FormatError(FormatError::Kind::kTruncated,
                      "dataset truncated: " + std::to_string(actual) + " < " +
                          std::to_string(expected) + " bytes");
  }

  Dataset ds;
  ds.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  detail::read_bytes(is, reinterpret_cast<char*>(ds.points.data()), n * d * sizeof(double), "points");
  ds.labels.resize(n);
  detail::read_bytes(is, reinterpret_cast<char*>(ds.labels.data()), n * sizeof(std::uint32_t), "labels");
  try {
    ds.recount(k);
    ds.validate();
  } catch (const DimensionError& e) {
    throw FormatError(FormatError::Kind::kParse, e.what());
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      try {
        if (first) {
          const long label = std::stol(cell);
          if (label < 0) throw std::invalid_argument("negative label");
          labels.push_back(static_cast<std::uint32_t>(label));
          first = false;
        } else {
          row.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw FormatError(FormatError::Kind::kParse,
                          path.string() + ":" + std::to_string(line_no) + ": bad value '" + cell + "'");
      }
    }
    if (row.empty() || (!rows.empty() && row.size() != rows.front().size())) {
      throw FormatError(FormatError::Kind::kParse,
                        path.string() + ":" + std::to_string(line_no) + ": inconsistent row width");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(FormatError::Kind::kParse, "empty CSV " + path.string());

  Dataset ds;
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  ds.points.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::Map<const Eigen::RowVectorXd> r(rows[i].data(), d);
    const double norm = r.norm();
    if (norm == 0.0) {
      throw FormatError(FormatError::Kind::kParse, "zero embedding on row " + std::to_string(i));
    }
    ds.points.row(static_cast<Eigen::Index>(i)) = r / norm;
  }
  ds.labels = std::move(labels);
  const auto k = static_cast<std::size_t>(*std::max_element(ds.labels.begin(), ds.labels.end())) + 1;
  ds.recount(k);
  try {
    ds.validate();
  } catch (const DimensionError& e) {
    throw FormatError(FormatError::Kind::kParse, e.what());
  }
  return ds;
}

}  // namespace alphamargin
