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

#include "cli.hpp"

#include <CLI11.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "alphamargin/errors.hpp"
#include "alphamargin/evalkit.hpp"
#include "alphamargin/synthdata.hpp"

namespace alphamargin::cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"data", {"train"}},
      {"model", {"hidden_dim", "embedding_dim"}},
      {"train",
       {"epochs", "batch_size", "lr_schedule", "momentum", "weight_decay", "reinit_epoch", "seed"}},
      {"loss", {"mode", "scale", "margin", "anneal_start", "anneal_end"}},
      {"alpha", {"alpha", "bisect_tol", "max_iters"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_double(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
  }
  return v;
}

long long to_int(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + key + "': expected an integer, got '" + text + "'");
  }
  return v;
}

std::size_t to_size(const std::string& text, const std::string& key) {
  const long long v = to_int(text, key);
  if (v < 0) throw ConfigError("'" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

bool is_none(const std::string& text) { return trim(text) == "none" || trim(text).empty(); }

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(to_double(cell, key));
  return out;
}

std::vector<LrStep> parse_lr_schedule(const std::string& text) {
  std::vector<LrStep> steps;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto colon = cell.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("lr_schedule entries must be 'epoch:lr', got '" + cell + "'");
    }
    steps.push_back({static_cast<int>(to_int(cell.substr(0, colon), "lr_schedule")),
                     to_double(cell.substr(colon + 1), "lr_schedule")});
  }
  return steps;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string() + " for writing");
  os << text;
}

void print_posterior(std::ostream& out, const Posterior& p) {
  out << "posterior =";
  const auto dense = p.dense();
  for (double v : dense) out << ' ' << fmt_double(v);
  out << '\n';
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  RunConfig cfg;
  bool have_data = false;
  std::optional<double> anneal_start;
  std::optional<double> anneal_end;
  for (const auto& [section, body] : tree) {
    auto sec = known_keys().find(section);
    if (sec == known_keys().end()) {
      if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      if (!sec->second.count(key)) {
        throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
      }
      const std::string value = trim(node.get_value<std::string>());
      const std::string name = section + "." + key;
      if (section == "data") {
        const fs::path p(value);
        cfg.train_data = p.is_absolute() ? p : base_dir / p;
        have_data = true;
      } else if (section == "output") {
        const fs::path p(value);
        cfg.output_dir = p.is_absolute() ? p : base_dir / p;
      } else if (section == "model") {
        (key == "hidden_dim" ? cfg.train.hidden_dim : cfg.train.embedding_dim) = to_size(value, name);
      } else if (section == "train") {
        if (key == "epochs") cfg.train.epochs = static_cast<int>(to_int(value, name));
        else if (key == "batch_size") cfg.train.batch_size = to_size(value, name);
        else if (key == "lr_schedule") cfg.train.lr_schedule = parse_lr_schedule(value);
        else if (key == "momentum") cfg.train.momentum = to_double(value, name);
        else if (key == "weight_decay") cfg.train.weight_decay = to_double(value, name);
        else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(to_size(value, name));
        else if (key == "reinit_epoch") {
          if (is_none(value)) cfg.train.reinit_epoch.reset();
          else cfg.train.reinit_epoch = static_cast<int>(to_int(value, name));
        }
      } else if (section == "loss") {
        if (key == "mode") cfg.train.loss.mode = parse_loss_mode(value);
        else if (key == "scale") cfg.train.loss.scale = to_double(value, name);
        else if (key == "margin") cfg.train.loss.margin = to_double(value, name);
        else if (key == "anneal_start") {
          if (!is_none(value)) anneal_start = to_double(value, name);
        } else if (key == "anneal_end") {
          if (!is_none(value)) anneal_end = to_double(value, name);
        }
      } else if (section == "alpha") {
        if (key == "alpha") cfg.train.alpha.alpha = to_double(value, name);
        else if (key == "bisect_tol") cfg.train.alpha.bisect_tol = to_double(value, name);
        else if (key == "max_iters") cfg.train.alpha.max_iters = static_cast<int>(to_int(value, name));
      }
    }
  }
  if (!have_data) throw ConfigError("config: [data] train is required");
  if (anneal_start.has_value() != anneal_end.has_value()) {
    throw ConfigError("config: anneal_start and anneal_end must be given together");
  }
  if (anneal_start) cfg.train.loss.anneal = AnnealSchedule{*anneal_start, *anneal_end};
  if (cfg.output_dir.empty()) cfg.output_dir = base_dir / "run";
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  return parse_run_config(read_file(path), base);
}

std::string format_run_config(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  std::ostringstream os;
  os << "[data]\ntrain = " << fs::absolute(cfg.train_data).lexically_normal().string() << "\n\n";
  os << "[model]\nhidden_dim = " << t.hidden_dim << "\nembedding_dim = " << t.embedding_dim
     << "\n\n";
  os << "[train]\nepochs = " << t.epochs << "\nbatch_size = " << t.batch_size
     << "\nlr_schedule = ";
  for (std::size_t i = 0; i < t.lr_schedule.size(); ++i) {
    os << (i ? "," : "") << t.lr_schedule[i].epoch << ':' << fmt_double(t.lr_schedule[i].lr);
  }
  os << "\nmomentum = " << fmt_double(t.momentum) << "\nweight_decay = "
     << fmt_double(t.weight_decay) << "\nreinit_epoch = "
     << (t.reinit_epoch ? std::to_string(*t.reinit_epoch) : "none") << "\nseed = " << t.seed
     << "\n\n";
  os << "[loss]\nmode = " << to_string(t.loss.mode) << "\nscale = " << fmt_double(t.loss.scale)
     << "\nmargin = " << fmt_double(t.loss.margin) << "\nanneal_start = "
     << (t.loss.anneal ? fmt_double(t.loss.anneal->start_epoch) : "none")
     << "\nanneal_end = " << (t.loss.anneal ? fmt_double(t.loss.anneal->end_epoch) : "none")
     << "\n\n";
  os << "[alpha]\nalpha = " << fmt_double(t.alpha.alpha) << "\nbisect_tol = "
     << fmt_double(t.alpha.bisect_tol) << "\nmax_iters = " << t.alpha.max_iters << "\n\n";
  os << "[output]\ndir = " << fs::absolute(cfg.output_dir).lexically_normal().string() << "\n";
  return os.str();
}

TrainResult cmd_train(const fs::path& config_path, const std::optional<fs::path>& output_override,
                      std::ostream& out) {
  const std::string raw = read_file(config_path);
  RunConfig cfg = parse_run_config(raw, fs::absolute(config_path).parent_path());
  if (output_override) cfg.output_dir = fs::absolute(*output_override);

  const Dataset dataset = load(cfg.train_data);
  fs::create_directories(cfg.output_dir);
  write_file(cfg.output_dir / "config.ini", raw);
  write_file(cfg.output_dir / "effective_config.ini", format_run_config(cfg));

  std::ofstream log(cfg.output_dir / "train.log", std::ios::trunc);
  TrainResult result = train(dataset, cfg.train, &log);

  std::ofstream csv(cfg.output_dir / "metrics.csv", std::ios::trunc);
  result.log.write_csv(csv);
  save_checkpoint(result.model, cfg.output_dir / "model.ckpt");

  for (const auto& e : result.log.events) out << e << '\n';
  if (!result.log.epochs.empty()) {
    const EpochMetrics& last = result.log.epochs.back();
    out << "final_epoch = " << last.epoch << "\nfinal_loss = " << fmt_double(last.loss) << '\n'
        << last.report.to_text();
  }
  out << "output_dir = " << cfg.output_dir.string() << '\n';
  return result;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Margin-based alpha-divergence losses: data generation, training, evaluation"};
  app.require_subcommand(1);

  // gen
  SynthSpec spec;
  fs::path gen_out;
  fs::path trials_out;
  std::size_t gen_impostors = 10000;
  std::size_t gen_max_genuine = 20000;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic identity dataset");
  gen->add_option("--k", spec.k, "Number of identities")->capture_default_str();
  gen->add_option("--d", spec.d, "Ambient dimension")->capture_default_str();
  gen->add_option("--samples-per-id", spec.samples_per_id, "Samples per regular identity")
      ->capture_default_str();
  gen->add_option("--few-fraction", spec.few_fraction, "Fraction of few-shot identities")
      ->capture_default_str();
  gen->add_option("--few-count", spec.few_count, "Samples per few-shot identity")
      ->capture_default_str();
  gen->add_option("--kappa", spec.noise_kappa, "Cluster concentration")->capture_default_str();
  gen->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset file")->required();
  gen->add_option("--trials-out", trials_out, "Also write a trial list for this dataset");
  gen->add_option("--impostors", gen_impostors, "Impostor trials in the trial list")
      ->capture_default_str();
  gen->add_option("--max-genuine", gen_max_genuine, "Cap on genuine trials")
      ->capture_default_str();

  // train
  fs::path train_config;
  std::optional<fs::path> train_out;
  auto* trn = app.add_subcommand("train", "Train an embedder + prototype head from a config");
  trn->add_option("config", train_config, "Config file")->required();
  trn->add_option("--out", train_out, "Override [output] dir");

  // eval
  fs::path eval_ckpt;
  fs::path eval_data;
  fs::path eval_trials;
  fs::path eval_out;
  std::vector<double> fars{1e-3, 1e-2, 1e-1};
  std::size_t eval_impostors = 10000;
  std::size_t eval_max_genuine = 20000;
  std::uint64_t eval_seed = 1;
  auto* ev = app.add_subcommand("eval", "Score verification trials: FRR@FAR and DET");
  ev->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  ev->add_option("--data", eval_data, "Evaluation dataset")->required();
  ev->add_option("--trials", eval_trials, "Trial list (generated when omitted)");
  ev->add_option("--far", fars, "FAR operating points")->delimiter(',')->capture_default_str();
  ev->add_option("--impostors", eval_impostors, "Impostor trials when generating")
      ->capture_default_str();
  ev->add_option("--max-genuine", eval_max_genuine, "Genuine cap when generating")
      ->capture_default_str();
  ev->add_option("--seed", eval_seed, "Seed for trial generation")->capture_default_str();
  ev->add_option("--out", eval_out, "Directory for det.csv and report.txt")->required();

  // probe
  std::string probe_theta;
  std::string probe_q;
  double probe_alpha = 1.5;
  std::size_t probe_target = 0;
  auto* pr = app.add_subcommand("probe", "Solve one alpha-softargmax instance");
  pr->add_option("--theta", probe_theta, "Comma-separated logits")->required();
  pr->add_option("--q", probe_q, "Comma-separated reference measure (default all ones)");
  pr->add_option("--alpha", probe_alpha, "Divergence index > 1")->capture_default_str();
  pr->add_option("--target", probe_target, "Class index for the loss")->capture_default_str();

  // stats
  fs::path stats_ckpt;
  fs::path stats_data;
  fs::path stats_config;
  std::string stats_mode = "a3m";
  double stats_scale = 5.0;
  double stats_margin = 0.1;
  double stats_alpha = 1.75;
  auto* st = app.add_subcommand("stats", "Posterior sparsity and prototype misalignment");
  st->add_option("--checkpoint", stats_ckpt, "Model checkpoint")->required();
  st->add_option("--data", stats_data, "Dataset")->required();
  st->add_option("--config", stats_config, "Take loss and alpha settings from a train config");
  st->add_option("--mode", stats_mode, "Loss mode")->capture_default_str();
  st->add_option("--scale", stats_scale, "Scale s")->capture_default_str();
  st->add_option("--margin", stats_margin, "Margin m")->capture_default_str();
  st->add_option("--alpha", stats_alpha, "Divergence index")->capture_default_str();

  std::vector<std::string> argv_store{"alphamargin"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const Dataset ds = generate(spec);
      save(ds, gen_out);
      out << "wrote " << gen_out.string() << " N=" << ds.size() << " d=" << ds.dim()
          << " k=" << ds.num_classes() << " few_shot=" << spec.num_few_shot() << '\n';
      if (!trials_out.empty()) {
        const auto trials = make_trials(ds, gen_impostors, gen_max_genuine, spec.seed);
        write_trials(trials, trials_out);
        out << "wrote " << trials_out.string() << " trials=" << trials.size() << '\n';
      }
    } else if (*trn) {
      cmd_train(train_config, train_out, out);
    } else if (*ev) {
      const Model model = load_checkpoint(eval_ckpt);
      const Dataset ds = load(eval_data);
      if (ds.dim() != model.embedder.input_dim()) {
        throw DimensionError("dataset dimension does not match the checkpoint");
      }
      const auto trials = eval_trials.empty()
                              ? make_trials(ds, eval_impostors, eval_max_genuine, eval_seed)
                              : read_trials(eval_trials);
      const TrialScoreSet scores = score_trials(ds, model.embedder, trials);
      out << "genuine_trials = " << scores.genuine.size()
          << "\nimpostor_trials = " << scores.impostor.size() << '\n';
      std::ostringstream report;
      for (double far : fars) {
        const FrrAtFar r = frr_at_far(scores, far);
        char buf[256];
        if (r.status == FarStatus::kUnattainable) {
          std::snprintf(buf, sizeof(buf), "far=%g status=unattainable min_far=%.17g\n", far,
                        1.0 / static_cast<double>(scores.impostor.size()));
        } else {
          std::snprintf(buf, sizeof(buf), "far=%g status=ok frr=%.17g threshold=%.17g achieved_far=%.17g\n",
                        far, r.frr, r.threshold, r.far);
        }
        report << buf;
      }
      out << report.str();
      fs::create_directories(eval_out);
      write_file(eval_out / "report.txt", report.str());
      std::ofstream det(eval_out / "det.csv", std::ios::trunc);
      write_det_csv(det_points(scores), det);
      out << "det_csv = " << (eval_out / "det.csv").string() << '\n';
    } else if (*pr) {
      const auto theta = parse_list(probe_theta, "--theta");
      const auto q = probe_q.empty() ? std::vector<double>(theta.size(), 1.0)
                                     : parse_list(probe_q, "--q");
      AlphaParams params;
      params.alpha = probe_alpha;
      params.validate();
      const AlphaSolution sol = solve_alpha(theta, q, params);
      const LossOutput loss = fy_loss(theta, probe_target, q, params);
      out << "tau = " << fmt_double(sol.tau) << '\n';
      print_posterior(out, sol.posterior);
      out << "support_size = " << sol.posterior.nnz() << "\nsum = " << fmt_double(sol.posterior.sum())
          << "\nsoftmax_f = " << fmt_double(dual_value(theta, q, sol.tau, params))
          << "\nloss = " << fmt_double(loss.value) << '\n';
    } else if (*st) {
      MarginConfig mc;
      AlphaParams params;
      if (!stats_config.empty()) {
        const RunConfig rc = load_run_config(stats_config);
        mc = rc.train.loss.resolved(static_cast<double>(rc.train.epochs));
        params = rc.train.alpha;
      } else {
        mc.mode = parse_loss_mode(stats_mode);
        mc.scale = stats_scale;
        mc.margin = stats_margin;
        params.alpha = stats_alpha;
      }
      mc.validate();
      if (is_alpha_mode(mc.mode)) params.validate();
      const Model model = load_checkpoint(stats_ckpt);
      const Dataset ds = load(stats_data);
      if (ds.dim() != model.embedder.input_dim()) {
        throw DimensionError("dataset dimension does not match the checkpoint");
      }
      if (ds.num_classes() != model.head.size()) {
        throw DimensionError("dataset identities do not match the prototype count");
      }
      out << sparsity_report(ds, model, mc, params).to_text();
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace alphamargin::cli
