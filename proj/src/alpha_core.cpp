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

#include "alphamargin/alpha_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "alphamargin/errors.hpp"

namespace alphamargin {

namespace {

// base^exponent for base >= 0, computed through exp/log; 0^x = 0 for x > 0.
inline double pow_nonneg(double base, double exponent) {
  if (base == 0.0) return 0.0;
  return std::exp(exponent * std::log(base));
}

void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": size mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

void AlphaParams::validate() const {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw ConfigError("alpha must be finite and > 1, got " +
                      std::to_string(alpha));
  }
  if (!(bisect_tol > 0.0)) throw ConfigError("bisect_tol must be > 0");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
}

Posterior::Posterior(std::size_t k, std::vector<Entry> support)
    : k_(k), support_(std::move(support)) {
  for (std::size_t i = 0; i < support_.size(); ++i) {
    const Entry& e = support_[i];
    if (e.index >= k_) throw DimensionError("posterior index out of range");
    if (i > 0 && support_[i - 1].index >= e.index) {
      throw DimensionError("posterior indices must be strictly increasing");
    }
    if (!(e.prob > 0.0) || !std::isfinite(e.prob)) {
      throw DimensionError("posterior support entries must be positive");
    }
  }
}

Posterior Posterior::from_dense(std::span<const double> p) {
  std::vector<Entry> support;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] > 0.0) support.push_back({j, p[j]});
  }
  return Posterior(p.size(), std::move(support));
}

double Posterior::operator[](std::size_t j) const {
  auto it = std::lower_bound(
      support_.begin(), support_.end(), j,
      [](const Entry& e, std::size_t idx) { return e.index < idx; });
  if (it != support_.end() && it->index == j) return it->prob;
  return 0.0;
}

std::vector<double> Posterior::dense() const {
  std::vector<double> out(k_, 0.0);
  for (const Entry& e : support_) out[e.index] = e.prob;
  return out;
}

double Posterior::sum() const noexcept {
  double s = 0.0;
  for (const Entry& e : support_) s += e.prob;
  return s;
}

void validate_logits(std::span<const double> theta) {
  if (theta.size() < 2) throw DimensionError("logit vector needs k >= 2");
  for (double v : theta) {
    if (!std::isfinite(v)) throw DomainError("non-finite logit");
  }
}

void validate_measure(std::span<const double> q) {
  for (double v : q) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("reference measure weights must be finite and > 0");
    }
  }
}

double f_value(double u, const AlphaParams& params) {
  if (u < 0.0) throw DomainError("f(u) requires u >= 0");
  const double a = params.alpha;
  return ((pow_nonneg(u, a) - 1.0) - a * (u - 1.0)) / (a * (a - 1.0));
}

double f_prime(double u, const AlphaParams& params) {
  const double a = params.alpha;
  if (u < 0.0 || (u == 0.0 && a < 2.0)) {
    throw DomainError("f'(u) requires u > 0 (u = 0 only for alpha >= 2)");
  }
  return (pow_nonneg(u, a - 1.0) - 1.0) / (a - 1.0);
}

double f_conj(double v, const AlphaParams& params) {
  const double a = params.alpha;
  const double base = std::max(0.0, 1.0 + (a - 1.0) * v);
  return (pow_nonneg(base, a / (a - 1.0)) - 1.0) / a;
}

double f_conj_prime(double v, const AlphaParams& params) {
  const double a = params.alpha;
  const double base = 1.0 + (a - 1.0) * v;
  if (base <= 0.0) return 0.0;
  return pow_nonneg(base, 1.0 / (a - 1.0));
}

double divergence(std::span<const double> p, std::span<const double> q,
                  const AlphaParams& params) {
  check_same_size(p.size(), q.size(), "divergence");
  double d = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    d += q[j] * f_value(p[j] / q[j], params);
  }
  return d;
}

double divergence(const Posterior& p, std::span<const double> q,
                  const AlphaParams& params) {
  check_same_size(p.size(), q.size(), "divergence");
  const double f0 = f_value(0.0, params);
  double d = 0.0;
  auto it = p.support().begin();
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (it != p.support().end() && it->index == j) {
      d += q[j] * f_value(it->prob / q[j], params);
      ++it;
    } else {
      d += q[j] * f0;
    }
  }
  return d;
}

double tau_residual(std::span<const double> theta, std::span<const double> q,
                    double tau, const AlphaParams& params) {
  double s = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    s += q[j] * f_conj_prime(theta[j] - tau, params);
  }
  return s - 1.0;
}

TauBracket tau_bracket(std::span<const double> theta, std::span<const double> q,
                       const AlphaParams& params) {
  check_same_size(theta.size(), q.size(), "tau_bracket");
  const auto t = static_cast<std::size_t>(
      std::max_element(theta.begin(), theta.end()) - theta.begin());
  const double q_total = std::accumulate(q.begin(), q.end(), 0.0);
  return {theta[t] - f_prime(1.0 / q[t], params),
          theta[t] - f_prime(1.0 / q_total, params)};
}

double root_find_tau(std::span<const double> theta, std::span<const double> q,
                     const AlphaParams& params) {
  params.validate();
  validate_logits(theta);
  check_same_size(theta.size(), q.size(), "root_find_tau");
  validate_measure(q);

  auto [lo, hi] = tau_bracket(theta, q, params);
  if (lo == hi) return lo;

  const double r_lo = tau_residual(theta, q, lo, params);
  if (std::abs(r_lo) <= kResidualTol) return lo;
  const double r_hi = tau_residual(theta, q, hi, params);
  if (std::abs(r_hi) <= kResidualTol) return hi;
  if (r_lo < 0.0 || r_hi > 0.0) {
    throw SolverError("tau bracket does not straddle the root (residuals " +
                      std::to_string(r_lo) + ", " + std::to_string(r_hi) + ")");
  }

  for (int iter = 0; iter < params.max_iters; ++iter) {
    const double mid = lo + 0.5 * (hi - lo);
    // Bracket already at adjacent doubles.
    if (mid <= lo || mid >= hi) return mid;
    const double r = tau_residual(theta, q, mid, params);
    if (std::abs(r) <= kResidualTol) return mid;
    if (r > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= params.bisect_tol) return lo + 0.5 * (hi - lo);
  }
  throw SolverError("bisection did not converge within " +
                    std::to_string(params.max_iters) + " iterations");
}

double sparsemax_tau(std::span<const double> theta, std::span<const double> q) {
  validate_logits(theta);
  check_same_size(theta.size(), q.size(), "sparsemax_tau");
  validate_measure(q);

  std::vector<std::size_t> order(theta.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return theta[a] > theta[b];
  });

  // On support S: sum_S q_j (1 + theta_j - tau) = 1.
  double q_sum = 0.0;
  double q_theta_sum = 0.0;
  double tau = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t j = order[r];
    const double cand_q = q_sum + q[j];
    const double cand_qt = q_theta_sum + q[j] * (1.0 + theta[j]);
    const double cand_tau = (cand_qt - 1.0) / cand_q;
    if (r > 0 && 1.0 + theta[j] - cand_tau <= 0.0) break;
    q_sum = cand_q;
    q_theta_sum = cand_qt;
    tau = cand_tau;
  }
  return tau;
}

AlphaSolution solve_alpha(std::span<const double> theta, std::span<const double> q,
                          const AlphaParams& params) {
  const double tau = root_find_tau(theta, q, params);
  const double a = params.alpha;
  std::vector<Posterior::Entry> support;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double base = 1.0 + (a - 1.0) * (theta[j] - tau);
    if (base <= 0.0) continue;
    const double p = q[j] * pow_nonneg(base, 1.0 / (a - 1.0));
    // A positive base can still underflow to zero for extreme q_j.
    if (p > 0.0) support.push_back({j, p});
  }
  return {tau, Posterior(theta.size(), std::move(support))};
}

double dual_value(std::span<const double> theta, std::span<const double> q, double tau,
                  const AlphaParams& params) {
  check_same_size(theta.size(), q.size(), "dual_value");
  double v = tau;
  for (std::size_t j = 0; j < theta.size(); ++j) v += q[j] * f_conj(theta[j] - tau, params);
  return v;
}

Posterior alpha_softargmax(std::span<const double> theta,
                           std::span<const double> q,
                           const AlphaParams& params) {
  return solve_alpha(theta, q, params).posterior;
}

double alpha_softmax(std::span<const double> theta, std::span<const double> q,
                     const AlphaParams& params) {
  const double tau = root_find_tau(theta, q, params);
  return dual_value(theta, q, tau, params);
}

}  // namespace alphamargin
