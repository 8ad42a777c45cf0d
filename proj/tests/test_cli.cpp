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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "alphamargin/errors.hpp"
#include "alphamargin/synthdata.hpp"
#include "cli.hpp"

using namespace alphamargin;
using namespace alphamargin::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void spill(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << text;
}

class Workdir {
 public:
  Workdir() : path_(fs::temp_directory_path() / ("am_cli_test_" + std::to_string(counter_++))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Workdir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

const char* kConfig = R"([data]
train = train.amds

[model]
hidden_dim = 16
embedding_dim = 6

[train]
epochs = 4
batch_size = 32
lr_schedule = 0:0.1,3:0.01
reinit_epoch = 2
seed = 5

[loss]
mode = a3m
scale = 5
margin = 0.1

[alpha]
alpha = 1.75

[output]
dir = run
)";

void make_data(const Workdir& w) {
  REQUIRE(invoke({"gen", "--k", "12", "--d", "6", "--samples-per-id", "6", "--few-fraction", "0.25",
                  "--kappa", "80", "--seed", "2", "--out", (w / "train.amds").string()})
              .code == kOk);
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_run_config(kConfig, "/base");
  CHECK(c.train_data == fs::path("/base/train.amds"));
  CHECK(c.output_dir == fs::path("/base/run"));
  CHECK(c.train.hidden_dim == 16);
  CHECK(c.train.epochs == 4);
  REQUIRE(c.train.lr_schedule.size() == 2);
  CHECK(c.train.lr_schedule[1].epoch == 3);
  CHECK(c.train.lr_schedule[1].lr == 0.01);
  CHECK(c.train.reinit_epoch == 2);
  CHECK(c.train.loss.mode == LossMode::kA3M);
  CHECK(c.train.alpha.alpha == 1.75);
  CHECK_FALSE(c.train.loss.anneal.has_value());

  const RunConfig again = parse_run_config(format_run_config(c), "/elsewhere");
  CHECK(format_run_config(again) == format_run_config(c));
}

TEST_CASE("config rejection") {
  CHECK_THROWS_AS(parse_run_config(std::string(kConfig) + "\n[model]\ndepth = 3\n", "/"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\ntrain = x\n[extra]\na = 1\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[model]\nhidden_dim = 3\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\ntrain = x\n[train]\nepochs = many\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\ntrain = x\n[loss]\nmode = softmax\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\ntrain = x\n[loss]\nanneal_start = 1\n", "/"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\ntrain = x\n[alpha]\nalpha = 1\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[data]\ntrain = x\n[train]\nlr_schedule = 0.1\n", "/"),
                  ConfigError);
}

TEST_CASE("paper-style q-margin settings are accepted") {
  const RunConfig c = parse_run_config(
      "[data]\ntrain = d\n[loss]\nmode = q_margin\nscale = 32\nmargin = 0.2\n[alpha]\nalpha = 1.25\n",
      "/");
  CHECK(c.train.loss.mode == LossMode::kQMargin);
  CHECK(c.train.loss.scale == 32.0);
  CHECK(c.train.alpha.alpha == 1.25);
}

TEST_CASE("gen writes a documented, reproducible dataset") {
  Workdir w;
  make_data(w);
  const std::string first = slurp(w / "train.amds");
  CHECK(first.substr(0, 4) == "AMDS");
  make_data(w);
  CHECK(slurp(w / "train.amds") == first);
  const Dataset ds = load(w / "train.amds");
  CHECK(ds.num_classes() == 12);

  CHECK(invoke({"gen", "--k", "1", "--out", (w / "x.amds").string()}).code == kUsage);
  CHECK(invoke({"gen"}).code == kUsage);
  CHECK(invoke({}).code == kUsage);
  CHECK(invoke({"frobnicate"}).code == kUsage);
}

TEST_CASE("train writes artifacts and an event line for re-init") {
  Workdir w;
  make_data(w);
  spill(w / "run.ini", kConfig);
  const Outcome o = invoke({"train", (w / "run.ini").string()});
  REQUIRE(o.code == kOk);
  CHECK(o.out.find("event=reinit epoch=2") != std::string::npos);
  for (const char* f : {"metrics.csv", "model.ckpt", "config.ini", "effective_config.ini", "train.log"}) {
    CHECK(fs::exists(w / "run" / f));
  }
  CHECK(slurp(w / "run" / "config.ini") == kConfig);
  CHECK(slurp(w / "run" / "train.log").find("event=reinit epoch=2") != std::string::npos);
  const std::string metrics = slurp(w / "run" / "metrics.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 5);
}

TEST_CASE("train is reproducible from its own effective config") {
  Workdir w;
  make_data(w);
  spill(w / "run.ini", kConfig);
  REQUIRE(invoke({"train", (w / "run.ini").string()}).code == kOk);
  REQUIRE(invoke({"train", (w / "run" / "effective_config.ini").string(), "--out",
                  (w / "again").string()})
              .code == kOk);
  CHECK(slurp(w / "run" / "metrics.csv") == slurp(w / "again" / "metrics.csv"));
  CHECK(slurp(w / "run" / "model.ckpt") == slurp(w / "again" / "model.ckpt"));
}

TEST_CASE("train error exit codes") {
  Workdir w;
  spill(w / "run.ini", kConfig);
  const Outcome missing = invoke({"train", (w / "run.ini").string()});
  CHECK(missing.code == kDataError);
  CHECK_FALSE(missing.err.empty());

  spill(w / "bad.ini", std::string(kConfig) + "[train]\nsurprise = 1\n");
  CHECK(invoke({"train", (w / "bad.ini").string()}).code == kUsage);
  CHECK(invoke({"train", (w / "nope.ini").string()}).code == kDataError);

  make_data(w);
  std::string tight = kConfig;
  tight.replace(tight.find("alpha = 1.75"), 12, "alpha = 1.75\nmax_iters = 2");
  spill(w / "tight.ini", tight);
  CHECK(invoke({"train", (w / "tight.ini").string()}).code == kSolverFailure);
}

TEST_CASE("eval reports frr, flags unattainable targets and writes det csv") {
  Workdir w;
  // two identities on opposite poles: perfect separation
  spill(w / "sep.csv", "0,1,0,0\n0,0.99,0.1,0\n0,0.98,0,0.1\n1,-1,0,0\n1,-0.99,0.1,0\n1,-0.98,0,0.1\n");
  const Dataset ds = load_csv(w / "sep.csv");
  save(ds, w / "sep.amds");
  Model m;
  m.embedder.w1 = RowMatrix::Identity(3, 3);
  m.embedder.b1 = Eigen::VectorXd::Zero(3);
  m.embedder.w2 = RowMatrix::Identity(3, 3);
  m.embedder.b2 = Eigen::VectorXd::Zero(3);
  m.head.rows = RowMatrix::Identity(2, 3);
  save_checkpoint(m, w / "m.ckpt");

  const Outcome o = invoke({"eval", "--checkpoint", (w / "m.ckpt").string(), "--data",
                            (w / "sep.amds").string(), "--far", "0.001,0.2", "--out",
                            (w / "ev").string()});
  REQUIRE(o.code == kOk);
  CHECK(o.out.find("far=0.001 status=unattainable") != std::string::npos);
  CHECK(o.out.find("far=0.2 status=ok frr=0 ") != std::string::npos);
  CHECK(slurp(w / "ev" / "det.csv").rfind("far,frr,threshold\n", 0) == 0);
  CHECK(slurp(w / "ev" / "report.txt").find("status=unattainable") != std::string::npos);

  CHECK(invoke({"eval", "--checkpoint", (w / "none.ckpt").string(), "--data",
                (w / "sep.amds").string(), "--out", (w / "ev").string()})
            .code == kDataError);
}

TEST_CASE("probe prints the solver state") {
  const Outcome o = invoke({"probe", "--theta", "0.5,0", "--alpha", "2"});
  REQUIRE(o.code == kOk);
  CHECK(o.out.find("tau = 0.75") != std::string::npos);
  CHECK(o.out.find("posterior = 0.75 0.25\n") != std::string::npos);

  const Outcome u = invoke({"probe", "--theta", "1,1,1", "--alpha", "1.5"});
  CHECK(u.out.find("support_size = 3") != std::string::npos);

  const Outcome soft = invoke({"probe", "--theta", "1,0,-1", "--alpha", "1.001"});
  std::istringstream is(soft.out.substr(soft.out.find("posterior = ") + 12));
  const double z = std::exp(1.0) + 1.0 + std::exp(-1.0);
  double p0 = 0.0;
  is >> p0;
  CHECK(p0 == doctest::Approx(std::exp(1.0) / z).epsilon(5e-3));

  CHECK(invoke({"probe", "--theta", "1"}).code == kDataError);
  CHECK(invoke({"probe", "--theta", "1,x"}).code == kUsage);
  CHECK(invoke({"probe", "--theta", "1,0", "--alpha", "0.5"}).code == kUsage);
  CHECK(invoke({"probe", "--theta", "1,0", "--target", "4"}).code == kDataError);
}

TEST_CASE("stats prints the sparsity report") {
  Workdir w;
  make_data(w);
  spill(w / "run.ini", kConfig);
  REQUIRE(invoke({"train", (w / "run.ini").string()}).code == kOk);
  const Outcome o = invoke({"stats", "--checkpoint", (w / "run" / "model.ckpt").string(), "--data",
                            (w / "train.amds").string(), "--config", (w / "run.ini").string()});
  REQUIRE(o.code == kOk);
  CHECK(o.out.find("posterior_sparsity = ") != std::string::npos);
  // the last metrics row is the same report
  const std::string metrics = slurp(w / "run" / "metrics.csv");
  const std::string last = metrics.substr(metrics.rfind("\n4,") + 1);
  const std::string sparsity = o.out.substr(o.out.find("posterior_sparsity = ") + 21);
  CHECK(last.find(sparsity.substr(0, sparsity.find('\n'))) != std::string::npos);
}
