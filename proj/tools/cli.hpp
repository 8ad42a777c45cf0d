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

// Command-line front end: gen, train, eval, probe, stats.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 solver or
// numerical failure.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "alphamargin/trainer.hpp"

namespace alphamargin::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kSolverFailure = 3 };

// Everything cmd_train needs, after defaults.
struct RunConfig {
  std::filesystem::path train_data;
  std::filesystem::path output_dir;
  TrainConfig train;
};

// Parses the sectioned key-value config. Relative paths resolve against the
// config file's directory. Unknown sections or keys raise ConfigError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);

// Effective config with every key spelled out; parses back to the same
// RunConfig.
std::string format_run_config(const RunConfig& cfg);

// Runs one training job and writes config.ini, effective_config.ini,
// metrics.csv, train.log and model.ckpt into the output directory.
TrainResult cmd_train(const std::filesystem::path& config_path,
                      const std::optional<std::filesystem::path>& output_override,
                      std::ostream& out);

// Full dispatcher; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace alphamargin::cli
