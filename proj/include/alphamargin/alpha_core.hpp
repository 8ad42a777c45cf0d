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

// Alpha-divergence kernel: the generator f, its derivative and conjugate,
// the divergence D_f(p:q) = <f(p/q), q>, and the regularized prediction map
//
//   softargmax_f(theta)_j = q_j [1 + (alpha-1)(theta_j - tau*)]_+^(1/(alpha-1))
//
// where tau* is the unique threshold making the output sum to one. The
// threshold is located by bisection on a bracket derived from the argmax
// logit. For alpha = 2 and q = 1 the map is sparsemax.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace alphamargin {

struct AlphaParams {
  double alpha = 1.5;       // divergence index, strictly > 1
  double bisect_tol = 1e-10;  // absolute width tolerance on the tau bracket
  int max_iters = 200;

  // Throws ConfigError when alpha <= 1, bisect_tol <= 0 or max_iters < 1.
  void validate() const;
};

// Residual tolerance at which bisection stops early.
inline constexpr double kResidualTol = 1e-12;

// Sparse probability vector over k classes. Only strictly positive entries
// are stored, sorted by index.
class Posterior {
 public:
  struct Entry {
    std::size_t index;
    double prob;
  };

  Posterior() = default;
  // Throws DimensionError on unsorted/duplicate/out-of-range indices or
  // non-positive probabilities.
  Posterior(std::size_t k, std::vector<Entry> support);

  // Keeps the strictly positive entries of a dense vector.
  static Posterior from_dense(std::span<const double> p);

  std::size_t size() const noexcept { return k_; }
  std::size_t nnz() const noexcept { return support_.size(); }
  std::span<const Entry> support() const noexcept { return support_; }

  // Probability of class j (0 when j is not in the support).
  double operator[](std::size_t j) const;
  std::vector<double> dense() const;
  double sum() const noexcept;

 private:
  std::size_t k_ = 0;
  std::vector<Entry> support_;
};

// Throws DimensionError if k < 2, DomainError if any entry is non-finite.
void validate_logits(std::span<const double> theta);
// Throws DomainError unless every weight is finite and strictly positive.
void validate_measure(std::span<const double> q);

// f(u) = ((u^a - 1) - a(u - 1)) / (a(a - 1)), u >= 0.
double f_value(double u, const AlphaParams& params);
// f'(u) = (u^(a-1) - 1) / (a - 1). u = 0 is only accepted for a >= 2.
double f_prime(double u, const AlphaParams& params);
// Conjugate f*(v) = ([1 + (a-1)v]_+^(a/(a-1)) - 1) / a, taken over u >= 0.
double f_conj(double v, const AlphaParams& params);
// (f*)'(v) = [1 + (a-1)v]_+^(1/(a-1)).
double f_conj_prime(double v, const AlphaParams& params);

// D_f(p:q) = sum_j q_j f(p_j / q_j).
double divergence(std::span<const double> p, std::span<const double> q,
                  const AlphaParams& params);
double divergence(const Posterior& p, std::span<const double> q,
                  const AlphaParams& params);

// sum_j q_j (f*)'(theta_j - tau) - 1; nonincreasing in tau.
double tau_residual(std::span<const double> theta, std::span<const double> q,
                    double tau, const AlphaParams& params);

// Bracket [tau_min, tau_max] guaranteed to contain tau*.
struct TauBracket {
  double lo;
  double hi;
};
TauBracket tau_bracket(std::span<const double> theta, std::span<const double> q,
                       const AlphaParams& params);

// Solves sum_j q_j (f*)'(theta_j - tau) = 1 by bisection.
// Throws SolverError if the bracket does not straddle the root or the
// iteration budget runs out before the bracket shrinks to bisect_tol.
double root_find_tau(std::span<const double> theta, std::span<const double> q,
                     const AlphaParams& params);

// Closed-form threshold for alpha = 2 via sorting (weighted sparsemax).
double sparsemax_tau(std::span<const double> theta, std::span<const double> q);

struct AlphaSolution {
  double tau;
  Posterior posterior;
};

// tau* and the posterior in one pass.
AlphaSolution solve_alpha(std::span<const double> theta, std::span<const double> q,
                          const AlphaParams& params);

// Dual objective tau + sum_j q_j f*(theta_j - tau). Its minimum over tau is
// softmax_f(theta), and it is stationary at tau*, so it is insensitive to
// the bisection tolerance to first order.
double dual_value(std::span<const double> theta, std::span<const double> q, double tau,
                  const AlphaParams& params);

Posterior alpha_softargmax(std::span<const double> theta,
                           std::span<const double> q,
                           const AlphaParams& params);

// softmax_f(theta) = <p*, theta> - D_f(p*:q), evaluated through dual_value.
double alpha_softmax(std::span<const double> theta, std::span<const double> q,
                     const AlphaParams& params);

}  // namespace alphamargin
