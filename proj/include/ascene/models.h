// include/ascene/models.h

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

#ifndef ASCENE_MODELS_H_
#define ASCENE_MODELS_H_

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ascene/augment.h"
#include "ascene/features.h"
#include "ascene/keyvalue.h"
#include "ascene/model.h"
#include "ascene/optim.h"

namespace ascene {

enum class Family { kResnet, kFcnn, kFsFcnn };

std::string_view FamilyName(Family f);
std::optional<Family> ParseFamily(std::string_view name);

struct ArchitectureConfig {
  Family family = Family::kFcnn;
  size_t n_classes = 10;
  size_t base_channels = 16;
  /// Residual blocks per branch (resnet only).
  size_t depth = 2;
  double dropout_rate = 0.1;
  /// Input tensor geometry: time frames seen by the network, mel bins, channels.
  size_t time_frames = 400;
  size_t mel_bins = 128;
  size_t channels = 3;

  static ArchitectureConfig Defaults(Family family, size_t n_classes = 10);
  void Validate() const;
  KeyValues ToKeyValues() const;
  static ArchitectureConfig FromKeyValues(const KeyValues &kv);
};

Model BuildResnet(const ArchitectureConfig &cfg);
Model BuildFcnn(const ArchitectureConfig &cfg);
Model BuildFsFcnn(const ArchitectureConfig &cfg);
Model BuildModel(const ArchitectureConfig &cfg);

/// Graph inspection.
size_t BodyConvCount(const Model &model);
/// Pooling or striding steps that shrink the frequency axis.
size_t FrequencyDownsamplings(const Model &model);
/// Id of the 1x1 classifier conv that feeds global average pooling.
int ClassifierNode(const Model &model);

/// (N, C, T, F) batch from feature tensors of identical shape.
Tensor ToBatch(const std::vector<const FeatureTensor *> &features);

struct TrainOptions {
  bool random_crop = true;
  bool mixup = true;
  bool spec_augment = false;
  AugmentConfig augment;
  /// Called after each epoch with (epoch index, mean training loss).
  std::function<void(size_t, double)> on_epoch;
};

struct TrainedModel {
  Model model;
  ArchitectureConfig arch;
  TrainConfig train;
  double final_loss = 0.0;
  std::vector<double> loss_curve;

  std::string ConfigText() const;
};

/// Mini-batch SGD with the cosine-restart schedule. Per batch: crop, mixup,
/// then one SpecAugment mask shared by the batch. Returns the model in
/// eval mode (batch-norm statistics frozen).
TrainedModel Train(const ArchitectureConfig &arch, const std::vector<LabeledTensor> &data,
                   const TrainConfig &tc, const TrainOptions &opts = {});

/// Class probabilities. Clips longer than the network's time span are
/// scored on evenly spaced windows and the probabilities averaged.
std::vector<double> Predict(const TrainedModel &model, const FeatureTensor &features);
std::vector<std::vector<double>> PredictAll(const TrainedModel &model,
                                            const std::vector<const FeatureTensor *> &features,
                                            int workers = 1);

/// Window offsets used by Predict for a clip of `time` frames.
std::vector<size_t> WindowOffsets(size_t time, size_t window);

void SaveTrainedModel(const std::filesystem::path &path, const TrainedModel &model);
TrainedModel LoadTrainedModel(const std::filesystem::path &path);

}  // namespace ascene

#endif  // ASCENE_MODELS_H_
