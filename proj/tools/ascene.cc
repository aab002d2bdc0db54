// tools/ascene.cc

// Copyright 2026  The ascene Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ascene/error.h"
#include "ascene/pipeline.h"

namespace {

struct Command {
  const char *name;
  const char *help;
};

constexpr Command kCommands[] = {
    {"synth-data", "render the synthetic scene corpus and its manifest"},
    {"augment", "generate extra training clips for the enabled waveform strategies"},
    {"features", "extract log-mel, delta and delta-delta tensors for every clip"},
    {"train", "train every configured (family, class count) model"},
    {"predict", "score the test split with each model and the ensembles"},
    {"fuse", "combine the 3-class and 10-class ensembles by two-stage fusion"},
    {"evaluate", "write device-grouped accuracy reports"},
    {"cam", "export class activation heatmaps from the resnet model"},
    {"ablate", "train and evaluate the cumulative augmentation sets"},
};

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"ascene: acoustic scene classification pipeline"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<int> workers;
  bool force = false;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--seed", seed, "seed for data synthesis, augmentation and training");
  app.add_option("--set", overrides, "override one config key (key=value); repeatable")->allow_extra_args(false);
  app.add_option("--workers", workers, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("--force", force, "accept inputs produced under a different config hash");
  app.fallthrough();

  for (const Command &c : kCommands) app.add_subcommand(c.name, c.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (workers) overrides.push_back("run.workers=" + std::to_string(*workers));
    std::optional<std::filesystem::path> file;
    if (!config_path.empty()) file = config_path;
    ascene::RunContext ctx{ascene::RunConfig::Resolve(file, overrides, seed), force, &std::cout};
    ascene::RunCommand(app.get_subcommands().front()->get_name(), ctx);
  } catch (const std::exception &e) {
    std::cerr << "ascene: " << e.what() << "\n";
    return ascene::ExitCodeFor(e);
  }
  return 0;
}
