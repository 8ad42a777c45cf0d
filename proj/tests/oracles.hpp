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

// Reference implementations used only by the test suites. None of these
// call into the library's solver, so agreement is a genuine cross-check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

// Alpha generator evaluated with std::pow.
inline double f(double u, double a) {
  return ((std::pow(u, a) - 1.0) - a * (u - 1.0)) / (a * (a - 1.0));
}

inline double divergence(const std::vector<double>& p, const std::vector<double>& q, double a) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += q[j] * f(p[j] / q[j], a);
  return s;
}

// <p, theta> - D_f(p : q)
inline double primal_value(const std::vector<double>& theta, const std::vector<double>& q,
                           const std::vector<double>& p, double a) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += p[j] * theta[j];
  return s - divergence(p, q, a);
}

// Euclidean projection of theta onto the probability simplex (sort-based).
inline std::vector<double> sparsemax(const std::vector<double>& theta) {
  std::vector<double> z = theta;
  std::sort(z.begin(), z.end(), std::greater<>());
  double cum = 0.0;
  double t = 0.0;
  for (std::size_t r = 0; r < z.size(); ++r) {
    cum += z[r];
    const double cand = (cum - 1.0) / static_cast<double>(r + 1);
    if (z[r] > cand) t = cand;
  }
  std::vector<double> p(theta.size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::max(theta[j] - t, 0.0);
  return p;
}

inline std::vector<double> softargmax(const std::vector<double>& theta,
                                      const std::vector<double>& q) {
  const double mx = *std::max_element(theta.begin(), theta.end());
  std::vector<double> p(theta.size());
  double z = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) z += p[j] = q[j] * std::exp(theta[j] - mx);
  for (double& v : p) v /= z;
  return p;
}

// -log softargmax(theta)_y
inline double cross_entropy(const std::vector<double>& theta, std::size_t y) {
  const double mx = *std::max_element(theta.begin(), theta.end());
  double z = 0.0;
  for (double t : theta) z += std::exp(t - mx);
  return mx + std::log(z) - theta[y];
}

// max over p in the 1-simplex of <p,theta> - D_f(p:q), dense grid then
// golden-section refinement around the best cell.
inline double grid_max_two_class(const std::vector<double>& theta, const std::vector<double>& q,
                                 double a, int n = 200000) {
  auto obj = [&](double t) { return primal_value(theta, q, {t, 1.0 - t}, a); };
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double v = obj(static_cast<double>(i) / n);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  double lo = std::max(0, best - 1) / static_cast<double>(n);
  double hi = std::min(n, best + 1) / static_cast<double>(n);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double m1 = hi - g * (hi - lo);
    const double m2 = lo + g * (hi - lo);
    if (obj(m1) < obj(m2)) lo = m1; else hi = m2;
  }
  return std::max(best_v, obj(0.5 * (lo + hi)));
}

// Central finite-difference gradient.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& fn,
                                        std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = fn(x);
    x[i] = x0 - h;
    const double dn = fn(x);
    x[i] = x0;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

inline double norm2(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// ||a - b|| / max(||b||, floor). The floor keeps saturated cases, where the
// reference gradient is ~1e-12 and difference quotients carry ~1e-10 of
// rounding noise, from dividing noise by noise.
inline constexpr double kRelFloor = 1e-4;

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm2(d) / std::max(norm2(b), kRelFloor);
}

struct SweepResult {
  double threshold;
  double frr;
};

// Tries every impostor score (plus the next double above the largest) as a
// threshold and keeps the smallest whose acceptance rate (score >= t) is
// within target.
inline SweepResult threshold_sweep(const std::vector<double>& genuine,
                                   const std::vector<double>& impostor, double target) {
  std::vector<double> cands = impostor;
  cands.push_back(std::nextafter(*std::max_element(impostor.begin(), impostor.end()),
                                 std::numeric_limits<double>::infinity()));
  double best = std::numeric_limits<double>::infinity();
  for (double t : cands) {
    const double acc = static_cast<double>(std::count_if(impostor.begin(), impostor.end(),
                                                         [&](double s) { return s >= t; }));
    if (acc <= std::floor(target * impostor.size() + 1e-9)) best = std::min(best, t);
  }
  const double rej = static_cast<double>(std::count_if(genuine.begin(), genuine.end(),
                                                       [&](double s) { return s < best; }));
  return {best, rej / genuine.size()};
}

inline std::vector<double> uniform_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace oracle
