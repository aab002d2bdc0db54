// include/ascene/fusion.h

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

#ifndef ASCENE_FUSION_H_
#define ASCENE_FUSION_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ascene/audio_io.h"

namespace ascene {

/// Two-level label tree: every fine class has exactly one coarse parent.
struct ClassHierarchy {
  std::vector<std::string> coarse;
  std::vector<std::string> fine;
  std::vector<size_t> parent;  // fine index -> coarse index

  /// indoor / outdoor / transportation over the ten scene labels.
  static ClassHierarchy Default();
  /// Text form: one `fine=coarse` line per fine class, `#` comments;
  /// both class lists keep first-appearance order.
  static ClassHierarchy Parse(std::string_view text);
  static ClassHierarchy Load(const std::filesystem::path &path);
  std::string Format() const;

  void Validate() const;
  size_t FineIndex(std::string_view label) const;
  size_t CoarseIndex(std::string_view label) const;
  const std::string &Parent(std::string_view fine_label) const;
};

/// Copy of the manifest with every scene replaced by its coarse parent.
DatasetManifest CoarseLabels(const DatasetManifest &manifest, const ClassHierarchy &h);

/// Per-clip probability rows over a fixed label list.
struct ScoreTable {
  std::vector<std::string> labels;
  std::vector<std::string> clip_ids;
  std::vector<std::vector<double>> rows;

  void Validate() const;
  /// Header `clip_id,<labels...>`, probabilities with 17 significant digits.
  std::string ToCsv() const;
  static ScoreTable FromCsv(std::string_view text);
  void Save(const std::filesystem::path &path) const;
  static ScoreTable Load(const std::filesystem::path &path);

  /// Label with the largest score per row; ties go to the lowest index.
  std::vector<std::string> Argmax() const;
};

size_t ArgmaxIndex(const std::vector<double> &row);

/// Weighted mean of probability rows; equal weights by default. Rows are
/// renormalized only when the weights do not sum to 1.
ScoreTable Ensemble(const std::vector<ScoreTable> &tables,
                    const std::optional<std::vector<double>> &weights = std::nullopt);

/// Index of the fine class maximizing coarse[parent(q)] * fine[q].
size_t FuseRow(const std::vector<double> &coarse, const std::vector<double> &fine,
               const std::vector<size_t> &parent);

struct FusionResult {
  std::vector<std::string> predictions;  // per clip, table order
  ScoreTable fused;                      // products, rows renormalized
};

FusionResult FuseTwoStage(const ScoreTable &coarse, const ScoreTable &fine, const ClassHierarchy &h);

struct DeviceGroup {
  std::string name;
  std::vector<std::string> devices;
};

/// A | B&C | s1-s3 | s4-s6.
std::vector<DeviceGroup> DefaultDeviceGroups();
std::vector<DeviceGroup> ParseDeviceGroups(std::string_view spec);

struct DeviceGroupReport {
  std::vector<std::string> group_names;
  std::vector<double> group_accuracy;  // NaN for a group without clips
  std::vector<size_t> group_clips;
  std::map<std::string, double> device_accuracy;
  std::map<std::string, size_t> device_clips;
  /// Mean of per-device accuracies.
  double overall = 0.0;
  size_t correct = 0, total = 0;
  std::vector<std::string> labels;
  std::vector<std::vector<size_t>> confusion;  // [true][predicted]

  /// Table with percentages and a key=value block.
  std::string ToText(std::string_view system_name) const;
};

/// predictions: clip id (manifest path) -> predicted label.
DeviceGroupReport DeviceReport(const std::map<std::string, std::string> &predictions,
                               const DatasetManifest &manifest,
                               const std::vector<DeviceGroup> &groups = DefaultDeviceGroups(),
                               const std::vector<std::string> &labels = {});

/// Overall accuracy implied by group accuracies under per-device macro
/// averaging: sum(multiplicity_g * acc_g) / sum(multiplicity_g).
double MacroAverage(const std::vector<double> &group_accuracy, const std::vector<size_t> &multiplicity);

}  // namespace ascene

#endif  // ASCENE_FUSION_H_
