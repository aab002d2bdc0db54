// include/ascene/pipeline.h

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

#ifndef ASCENE_PIPELINE_H_
#define ASCENE_PIPELINE_H_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ascene/augment.h"
#include "ascene/features.h"
#include "ascene/fusion.h"
#include "ascene/keyvalue.h"
#include "ascene/models.h"
#include "ascene/synth.h"

namespace ascene {

/// Resolved run configuration: built-in defaults, then the config file, then
/// `--seed`, then `--set` overrides. Keys not present in the defaults are
/// rejected.
class RunConfig {
 public:
  static KeyValues Defaults();
  static RunConfig Resolve(const std::optional<std::filesystem::path> &file,
                           const std::vector<std::string> &overrides = {},
                           std::optional<uint64_t> seed = std::nullopt);
  /// Validates an already merged key set.
  static RunConfig FromKeyValues(const KeyValues &kv);

  const KeyValues &values() const { return kv_; }

  /// FNV-1a over the sorted key=value text, excluding `paths.*` and `run.*`.
  std::string Hash() const;

  /// `paths.<name>` resolved against `paths.root`.
  std::filesystem::path Dir(const std::string &name) const;

  SynthSpec Synth() const;
  FeatureConfig Features() const;
  AugmentConfig Augment() const;
  std::vector<Strategy> Enabled() const;
  ArchitectureConfig Arch(Family family, size_t n_classes) const;
  TrainConfig Train() const;
  std::vector<Family> Families(size_t n_classes) const;
  std::vector<DeviceGroup> Groups() const;
  ClassHierarchy Hierarchy() const;
  std::vector<std::string> Labels(size_t n_classes) const;
  size_t Workers() const;

 private:
  KeyValues kv_;
};

/// Cumulative augmentation sets compared by `ablate`, in report order.
struct AblationStep {
  std::string name;
  std::vector<Strategy> enabled;
};
std::vector<AblationStep> AblationSteps();

/// Artifact sidecars: `<artifact>.meta` holding the config hash.
std::filesystem::path MetaPath(const std::filesystem::path &artifact);
void WriteMeta(const std::filesystem::path &artifact, const RunConfig &cfg, const std::string &command);
/// MissingArtifactError when the sidecar is absent, ConfigError on a hash
/// mismatch; both skipped when `force` is set.
void CheckMeta(const std::filesystem::path &artifact, const RunConfig &cfg, bool force);

struct RunContext {
  RunConfig config;
  bool force = false;
  std::ostream *log = nullptr;
};

/// Subcommands. Each reads upstream artifacts from the configured
/// directories and writes its own outputs plus `<root>/runs/<command>.meta`.
void SynthDataCommand(const RunContext &ctx);
void AugmentCommand(const RunContext &ctx);
void FeaturesCommand(const RunContext &ctx);
void TrainCommand(const RunContext &ctx);
void PredictCommand(const RunContext &ctx);
void FuseCommand(const RunContext &ctx);
void EvaluateCommand(const RunContext &ctx);
void CamCommand(const RunContext &ctx);
void AblateCommand(const RunContext &ctx);

/// Dispatches by name; throws ConfigError on an unknown command.
void RunCommand(const std::string &command, const RunContext &ctx);

/// Process exit status for an exception escaping a command:
/// 2 configuration, 3 missing artifact, 4 numerical failure, 1 otherwise.
int ExitCodeFor(const std::exception &e);

}  // namespace ascene

#endif  // ASCENE_PIPELINE_H_
