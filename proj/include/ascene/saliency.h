// include/ascene/saliency.h

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

#ifndef ASCENE_SALIENCY_H_
#define ASCENE_SALIENCY_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ascene/features.h"
#include "ascene/models.h"

namespace ascene {

/// Class activation map over (time, frequency).
struct CamMap {
  std::string clip_id;
  size_t target = 0;
  size_t time = 0;
  size_t freq = 0;
  /// values[t * freq + f], upsampled to the input's spatial shape.
  std::vector<double> values;

  /// Class map as produced by the network, before upsampling.
  size_t raw_time = 0;
  size_t raw_freq = 0;
  std::vector<double> raw;
  /// Pre-softmax score of the target class for the whole clip.
  double logit = 0.0;

  double at(size_t t, size_t f) const { return values[t * freq + f]; }
};

/// bias + sum_k weights[k] * maps[0, k, :, :], flattened time-major.
std::vector<double> WeightedMapSum(const Tensor &maps, const std::vector<double> &weights, double bias);

/// Bilinear resampling of a rows x cols grid (pixel-center alignment).
std::vector<double> BilinearResize(const std::vector<double> &in, size_t rows, size_t cols, size_t out_rows,
                                   size_t out_cols);

/// CAM for one clip. The network is run over the whole clip (resnet is
/// fully convolutional), so the map covers every frame.
/// Throws ConfigError unless the model is a resnet whose head is a 1x1 conv
/// feeding global average pooling; ShapeError on a mel/channel mismatch.
CamMap ComputeCam(const TrainedModel &model, const FeatureTensor &features, size_t target,
                  const std::string &clip_id = "");

/// Mean over frequency for each frame.
std::vector<double> TimeMarginal(const CamMap &cam);

/// Colormap for a min-max normalized value v in [0, 1]:
/// r = 128 + 127 v, g = b = 128 (1 - v). v = 0 is mid-gray, v = 1 pure red.
std::array<uint8_t, 3> CamColor(double v);

/// Binary PPM: width = time, height = frequency, low frequencies at the
/// bottom. A constant map normalizes to 0 everywhere.
void WriteCamImage(const CamMap &cam, const std::filesystem::path &path);

/// Comma-separated text, one time frame per line.
void WriteCamText(const CamMap &cam, const std::filesystem::path &path);

/// Reads WriteCamText output into time/freq/values of a CamMap.
CamMap ReadCamText(const std::filesystem::path &path);

/// Writes `<stem>.ppm` and `<stem>.csv`.
void ExportHeatmap(const CamMap &cam, const std::filesystem::path &stem);

}  // namespace ascene

#endif  // ASCENE_SALIENCY_H_
