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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <stdexcept>

#include "alphamargin/alpha_core.hpp"
#include "alphamargin/errors.hpp"
#include "alphamargin/evalkit.hpp"
#include "oracles.hpp"

using namespace alphamargin;
namespace fs = std::filesystem;

namespace {

TrialScoreSet worked_example() { return {{0.9, 0.8, 0.3}, {0.4, 0.2, 0.1, 0.05}}; }

TrialScoreSet random_scores(std::mt19937_64& rng, std::size_t ng, std::size_t ni, int levels) {
  // coarse grid so ties are common
  std::uniform_int_distribution<int> g(levels / 3, levels);
  std::uniform_int_distribution<int> i(0, 2 * levels / 3);
  TrialScoreSet s;
  for (std::size_t n = 0; n < ng; ++n) s.genuine.push_back(g(rng) / double(levels));
  for (std::size_t n = 0; n < ni; ++n) s.impostor.push_back(i(rng) / double(levels));
  return s;
}

}  // namespace

TEST_CASE("trial scoring") {
  RowMatrix e(4, 2);
  e << 1.0, 0.0, 0.6, 0.8, -1.0, 0.0, 2.0, 0.0;
  const std::vector<Trial> trials{{0, 3, true}, {0, 2, false}, {0, 1, false}};
  const TrialScoreSet s = score_trials(e, trials);
  CHECK(s.genuine == std::vector<double>{1.0});
  CHECK(s.impostor[0] == doctest::Approx(-1.0));
  CHECK(s.impostor[1] == doctest::Approx(0.6));
  const std::vector<Trial> bad{{0, 4, true}};
  CHECK_THROWS_AS(score_trials(e, bad), std::out_of_range);
}

TEST_CASE("trial lists") {
  SynthSpec s;
  s.k = 10;
  s.samples_per_id = 4;
  const Dataset ds = generate(s);
  const auto trials = make_trials(ds, 200, 1000, 3);
  std::size_t gen = 0;
  for (const Trial& t : trials) {
    CHECK((ds.labels[t.first] == ds.labels[t.second]) == t.same_identity);
    CHECK(t.first != t.second);
    gen += t.same_identity;
  }
  CHECK(gen == 10 * 6);
  CHECK(trials.size() - gen == 200);
  CHECK(make_trials(ds, 50, 20, 3).size() == 70);

  const fs::path p = fs::temp_directory_path() / "am_trials.txt";
  write_trials(trials, p);
  const auto back = read_trials(p);
  REQUIRE(back.size() == trials.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].first == trials[i].first);
    CHECK(back[i].second == trials[i].second);
    CHECK(back[i].same_identity == trials[i].same_identity);
  }
  fs::remove(p);
}

TEST_CASE("frr at far worked example") {
  const FrrAtFar r = frr_at_far(worked_example(), 0.25);
  CHECK(r.status == FarStatus::kOk);
  CHECK(r.threshold == 0.4);
  CHECK(r.frr == doctest::Approx(1.0 / 3.0));
  CHECK(r.far == 0.25);
}

TEST_CASE("frr at far edge cases") {
  const TrialScoreSet sep{{0.9, 0.8, 0.7}, {0.1, 0.2, 0.3, 0.4}};
  for (double far : {0.25, 0.5, 1.0}) CHECK(frr_at_far(sep, far).frr == 0.0);

  const TrialScoreSet ex = worked_example();
  const FrrAtFar all = frr_at_far(ex, 1.0);
  CHECK(all.threshold <= 0.05);
  CHECK(all.frr == 0.0);

  const FrrAtFar un = frr_at_far(ex, 0.1);
  CHECK(un.status == FarStatus::kUnattainable);

  CHECK_THROWS_AS(frr_at_far({{}, {0.1}}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(frr_at_far(ex, 0.0), std::invalid_argument);
}

TEST_CASE("property: frr at far matches an exhaustive sweep") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 300; ++t) {
    const TrialScoreSet s = random_scores(rng, 1 + rng() % 40, 4 + rng() % 60, 25);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double far = std::max(u(rng), 1.0 / s.impostor.size());
    const FrrAtFar got = frr_at_far(s, far);
    const auto want = oracle::threshold_sweep(s.genuine, s.impostor, far);
    CHECK(got.threshold == want.threshold);
    CHECK(got.frr == doctest::Approx(want.frr));
    CHECK(got.far <= far + 1e-12);
  }
}

TEST_CASE("det curve examples") {
  const TrialScoreSet sep{{0.9, 0.8}, {0.1, 0.2}};
  const auto pts = det_points(sep);
  bool origin = false;
  for (const DetPoint& p : pts) origin |= p.far == 0.0 && p.frr == 0.0;
  CHECK(origin);

  const TrialScoreSet single{{0.5}, {0.5}};
  CHECK(det_points(single).size() == 1);

  std::vector<double> same;
  for (int i = 0; i < 20; ++i) same.push_back(i / 20.0);
  for (const DetPoint& p : det_points({same, same})) {
    CHECK(p.far + p.frr == doctest::Approx(1.0));
  }
}

TEST_CASE("property: det curve is monotone and agrees with frr at far") {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 200; ++t) {
    const TrialScoreSet s = random_scores(rng, 1 + rng() % 50, 2 + rng() % 50, 30);
    const auto pts = det_points(s);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      CHECK(pts[i].far >= pts[i - 1].far);
      CHECK(pts[i].frr <= pts[i - 1].frr);
      CHECK(pts[i].threshold < pts[i - 1].threshold);
    }
    for (const DetPoint& p : pts) {
      if (p.far * s.impostor.size() < 1.0 - 1e-9) continue;
      const FrrAtFar r = frr_at_far(s, p.far);
      const auto it = std::find_if(pts.begin(), pts.end(),
                                   [&](const DetPoint& q) { return q.threshold == r.threshold; });
      if (it != pts.end()) {
        CHECK(it->frr == r.frr);
        CHECK(it->far == r.far);
      } else {
        // threshold just above the top impostor
        const auto above = std::find_if(pts.rbegin(), pts.rend(),
                                        [&](const DetPoint& q) { return q.threshold > r.threshold; });
        CHECK(r.far == 0.0);
        CHECK((above == pts.rend() ? r.frr == 1.0 : above->frr == r.frr));
      }
    }
  }
}

TEST_CASE("det csv output") {
  std::ostringstream os;
  const auto pts = det_points(worked_example());
  write_det_csv(pts, os);
  const std::string text = os.str();
  CHECK(text.rfind("far,frr,threshold\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(pts.size() + 1));
}

TEST_CASE("average relative improvement") {
  const TrialScoreSet base{{0.9, 0.5, 0.3, 0.2}, {0.4, 0.35, 0.1, 0.05}};
  CHECK(average_relative_improvement(base, base, 0.25, 1.0) == 0.0);
  const TrialScoreSet better{{0.9, 0.8, 0.7, 0.6}, {0.4, 0.35, 0.1, 0.05}};
  const double imp = average_relative_improvement(base, better, 0.25, 1.0);
  CHECK(imp > 0.0);
  CHECK(imp <= 1.0);
  CHECK_THROWS_AS(average_relative_improvement(base, base, 0.5, 0.25), std::invalid_argument);
}

TEST_CASE("sparsity statistics") {
  const std::vector<Posterior> p{
      Posterior(3, {{1, 1.0}}),               // y=0 misaligned, one-hot
      Posterior(3, {{0, 0.5}, {1, 0.5}}),     // y=0 fine
      Posterior(3, {{0, 0.3}, {2, 0.7}}),     // y=1 misaligned
      Posterior(3, {{2, 1.0}}),               // y=2 one-hot on target
  };
  const std::vector<std::uint32_t> y{0, 0, 1, 2};
  const SparsityReport r = sparsity_from_posteriors(p, y);
  CHECK(r.misaligned_image_fraction == 0.5);
  CHECK(r.misaligned_identity_fraction == doctest::Approx(1.0 / 3.0));
  CHECK(r.onehot_fraction == 0.5);
  CHECK(r.posterior_sparsity == doctest::Approx((2.0 + 1.0 + 1.0 + 2.0) / 12.0));

  const std::vector<Posterior> hot{Posterior(2, {{0, 1.0}}), Posterior(2, {{1, 1.0}})};
  const SparsityReport h = sparsity_from_posteriors(hot, std::vector<std::uint32_t>{0, 1});
  CHECK(h.onehot_fraction == 1.0);
  CHECK(h.misaligned_image_fraction == 0.0);
  CHECK(h.misaligned_identity_fraction == 0.0);

  CHECK_THROWS_AS(sparsity_from_posteriors(hot, std::vector<std::uint32_t>{0}), DimensionError);
  const std::string text = r.to_text();
  CHECK(text.find("misaligned_image_fraction = 0.5") != std::string::npos);
}

TEST_CASE("dense posteriors report no sparsity") {
  SynthSpec s;
  s.k = 8;
  s.d = 4;
  const Dataset ds = generate(s);
  std::mt19937_64 rng(2);
  Model m;
  m.embedder = Embedder::random(4, 10, 4, rng);
  m.head = PrototypeMatrix::random(8, 4, rng);
  MarginConfig cfg;
  cfg.mode = LossMode::kCosFace;
  cfg.scale = 10.0;
  cfg.margin = 0.2;
  const SparsityReport r = sparsity_report(ds, m, cfg, AlphaParams{});
  CHECK(r.posterior_sparsity == 0.0);
  CHECK(r.misaligned_image_fraction == 0.0);

  cfg.mode = LossMode::kA3M;
  AlphaParams p;
  p.alpha = 2.0;
  const SparsityReport sparse = sparsity_report(ds, m, cfg, p);
  CHECK(sparse.posterior_sparsity > 0.0);
}
