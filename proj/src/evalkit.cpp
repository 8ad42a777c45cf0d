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

#include "alphamargin/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "alphamargin/errors.hpp"

namespace alphamargin {

namespace {

void require_scores(const TrialScoreSet& scores) {
  if (scores.genuine.empty() || scores.impostor.empty()) {
    throw std::invalid_argument("score set needs genuine and impostor scores");
  }
}

// #{v >= t} for v sorted ascending.
std::size_t count_at_or_above(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(sorted.end() -
                                  std::lower_bound(sorted.begin(), sorted.end(), t));
}

// #{v < t} for v sorted ascending.
std::size_t count_below(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) -
                                  sorted.begin());
}

}  // namespace

TrialScoreSet score_trials(const RowMatrix& embeddings, std::span<const Trial> trials) {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  TrialScoreSet out;
  for (const Trial& t : trials) {
    if (t.first >= n || t.second >= n) {
      throw std::out_of_range("trial index out of range (" + std::to_string(t.first) + ", " +
                              std::to_string(t.second) + ") for " + std::to_string(n) +
                              " embeddings");
    }
    const auto a = embeddings.row(static_cast<Eigen::Index>(t.first));
    const auto b = embeddings.row(static_cast<Eigen::Index>(t.second));
    const double score = a.dot(b) / (a.norm() * b.norm());
    (t.same_identity ? out.genuine : out.impostor).push_back(score);
  }
  return out;
}

TrialScoreSet score_trials(const Dataset& dataset, const Embedder& embedder,
                           std::span<const Trial> trials) {
  return score_trials(embedder.embed(dataset.points), trials);
}

std::vector<Trial> make_trials(const Dataset& dataset, std::size_t num_impostor,
                               std::size_t max_genuine, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = dataset.size();

  std::vector<std::vector<std::size_t>> by_id(dataset.num_classes());
  for (std::size_t i = 0; i < n; ++i) by_id[dataset.labels[i]].push_back(i);
  std::vector<Trial> genuine;
  for (const auto& members : by_id) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        genuine.push_back({members[a], members[b], true});
      }
    }
  }
  if (genuine.size() > max_genuine) {
    std::shuffle(genuine.begin(), genuine.end(), rng);
    genuine.resize(max_genuine);
    std::sort(genuine.begin(), genuine.end(), [](const Trial& x, const Trial& y) {
      return std::pair(x.first, x.second) < std::pair(y.first, y.second);
    });
  }

  // Capped by the number of cross-identity pairs.
  std::size_t possible = n * (n - 1) / 2;
  for (const auto& members : by_id) possible -= members.size() * (members.size() - 1) / 2;
  num_impostor = std::min(num_impostor, possible);

  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<Trial> trials = std::move(genuine);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (seen.size() < num_impostor) {
    std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    if (dataset.labels[a] == dataset.labels[b]) continue;
    if (a > b) std::swap(a, b);
    if (seen.insert({a, b}).second) trials.push_back({a, b, false});
  }
  return trials;
}

void write_trials(std::span<const Trial> trials, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string() + " for writing");
  for (const Trial& t : trials) {
    os << t.first << ' ' << t.second << ' ' << (t.same_identity ? 1 : 0) << '\n';
  }
}

std::vector<Trial> read_trials(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());
  std::vector<Trial> trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long a = -1, b = -1;
    int flag = -1;
    if (!(ss >> a >> b >> flag) || a < 0 || b < 0 || (flag != 0 && flag != 1)) {
      throw FormatError(FormatError::Kind::kParse,
                        path.string() + ":" + std::to_string(line_no) + ": expected 'i j flag'");
    }
    trials.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b), flag == 1});
  }
  return trials;
}

FrrAtFar frr_at_far(const TrialScoreSet& scores, double far_target) {
  require_scores(scores);
  if (!(far_target > 0.0) || far_target > 1.0) {
    throw std::invalid_argument("far_target must lie in (0, 1]");
  }
  std::vector<double> imp = scores.impostor;
  std::vector<double> gen = scores.genuine;
  std::sort(imp.begin(), imp.end());
  std::sort(gen.begin(), gen.end());
  const auto n_imp = static_cast<double>(imp.size());

  FrrAtFar out;
  if (far_target * n_imp < 1.0 - 1e-9) {
    out.status = FarStatus::kUnattainable;
    out.threshold = imp.back();
    out.far = static_cast<double>(count_at_or_above(imp, imp.back())) / n_imp;
    out.frr = static_cast<double>(count_below(gen, imp.back())) /
              static_cast<double>(gen.size());
    return out;
  }
  const auto allowed = static_cast<std::size_t>(std::floor(far_target * n_imp + 1e-9));

  // Walk impostor values from the top; the accepted count only grows.
  double threshold = std::nextafter(imp.back(), HUGE_VAL);
  for (auto it = imp.rbegin(); it != imp.rend();) {
    const double v = *it;
    if (count_at_or_above(imp, v) > allowed) break;
    threshold = v;
    while (it != imp.rend() && *it == v) ++it;
  }
  out.threshold = threshold;
  out.far = static_cast<double>(count_at_or_above(imp, threshold)) / n_imp;
  out.frr = static_cast<double>(count_below(gen, threshold)) / static_cast<double>(gen.size());
  return out;
}

std::vector<DetPoint> det_points(const TrialScoreSet& scores) {
  require_scores(scores);
  std::vector<double> imp = scores.impostor;
  std::vector<double> gen = scores.genuine;
  std::sort(imp.begin(), imp.end());
  std::sort(gen.begin(), gen.end());

  std::vector<double> thresholds;
  thresholds.reserve(imp.size() + gen.size());
  thresholds.insert(thresholds.end(), imp.begin(), imp.end());
  thresholds.insert(thresholds.end(), gen.begin(), gen.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<DetPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    out.push_back({static_cast<double>(count_at_or_above(imp, t)) / static_cast<double>(imp.size()),
                   static_cast<double>(count_below(gen, t)) / static_cast<double>(gen.size()), t});
  }
  return out;
}

void write_det_csv(std::span<const DetPoint> points, std::ostream& os) {
  os << "far,frr,threshold\n";
  char buf[96];
  for (const DetPoint& p : points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.far, p.frr, p.threshold);
    os << buf;
  }
}

double average_relative_improvement(const TrialScoreSet& baseline,
                                    const TrialScoreSet& system, double far_lo,
                                    double far_hi, std::size_t n_points) {
  if (!(far_lo > 0.0) || !(far_lo < far_hi) || far_hi > 1.0 || n_points < 2) {
    throw std::invalid_argument("need 0 < far_lo < far_hi <= 1 and n_points >= 2");
  }
  const double log_lo = std::log10(far_lo);
  const double log_hi = std::log10(far_hi);
  const double step = (log_hi - log_lo) / static_cast<double>(n_points - 1);
  std::vector<double> rel(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double far = std::pow(10.0, log_lo + step * static_cast<double>(i));
    const double b = frr_at_far(baseline, far).frr;
    const double s = frr_at_far(system, far).frr;
    rel[i] = b > 0.0 ? (b - s) / b : 0.0;
  }
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < n_points; ++i) area += 0.5 * (rel[i] + rel[i + 1]) * step;
  return area / (log_hi - log_lo);
}

std::string SparsityReport::to_text() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "misaligned_identity_fraction = %.17g\n"
                "misaligned_image_fraction = %.17g\n"
                "posterior_sparsity = %.17g\n"
                "onehot_fraction = %.17g\n",
                misaligned_identity_fraction, misaligned_image_fraction,
                posterior_sparsity, onehot_fraction);
  return buf;
}

SparsityReport sparsity_from_posteriors(std::span<const Posterior> posteriors,
                                        std::span<const std::uint32_t> labels) {
  if (posteriors.size() != labels.size()) {
    throw DimensionError("sparsity: posterior/label count mismatch");
  }
  SparsityReport r;
  if (posteriors.empty()) return r;

  std::size_t k = 0;
  for (const auto& p : posteriors) k = std::max(k, p.size());
  std::vector<std::size_t> seen(k, 0);
  std::vector<std::size_t> misaligned(k, 0);
  std::size_t misaligned_images = 0;
  std::size_t onehot = 0;
  double zero_fraction_sum = 0.0;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const Posterior& p = posteriors[i];
    const std::uint32_t y = labels[i];
    if (y >= p.size()) throw DimensionError("sparsity: label out of range");
    ++seen[y];
    if (p[y] == 0.0) {
      ++misaligned_images;
      ++misaligned[y];
    }
    if (p.nnz() == 1) ++onehot;
    zero_fraction_sum += static_cast<double>(p.size() - p.nnz()) / static_cast<double>(p.size());
  }
  std::size_t ids_present = 0;
  std::size_t ids_misaligned = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (seen[j] == 0) continue;
    ++ids_present;
    if (misaligned[j] == seen[j]) ++ids_misaligned;
  }
  const auto n = static_cast<double>(posteriors.size());
  r.misaligned_identity_fraction =
      static_cast<double>(ids_misaligned) / static_cast<double>(ids_present);
  r.misaligned_image_fraction = static_cast<double>(misaligned_images) / n;
  r.posterior_sparsity = zero_fraction_sum / n;
  r.onehot_fraction = static_cast<double>(onehot) / n;
  return r;
}

std::vector<Posterior> loss_posteriors(const RowMatrix& embeddings,
                                       std::span<const std::uint32_t> labels,
                                       const PrototypeMatrix& head,
                                       const MarginConfig& cfg,
                                       const AlphaParams& params) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw DimensionError("loss_posteriors: embedding/label count mismatch");
  }
  const RowMatrix cos = forward_cosines(embeddings, head);
  std::vector<Posterior> out;
  out.reserve(labels.size());
  for (Eigen::Index i = 0; i < cos.rows(); ++i) {
    std::span<const double> c(cos.row(i).data(), static_cast<std::size_t>(cos.cols()));
    out.push_back(evaluate_loss(c, labels[static_cast<std::size_t>(i)], cfg, params).posterior);
  }
  return out;
}

SparsityReport sparsity_report(const Dataset& dataset, const Model& model,
                               const MarginConfig& cfg, const AlphaParams& params) {
  const RowMatrix emb = model.embedder.embed(dataset.points);
  const auto posteriors = loss_posteriors(emb, dataset.labels, model.head, cfg, params);
  return sparsity_from_posteriors(posteriors, dataset.labels);
}

}  // namespace alphamargin
