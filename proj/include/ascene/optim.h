// include/ascene/optim.h

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

#ifndef ASCENE_OPTIM_H_
#define ASCENE_OPTIM_H_

#include <cstdint>
#include <vector>

#include "ascene/layers.h"

namespace ascene {

struct TrainConfig {
  double lr_max = 0.1;
  double lr_min = 1e-5;
  double restart_period_epochs = 10;
  double period_multiplier = 2.0;
  double momentum = 0.9;
  size_t batch_size = 32;
  size_t epochs = 60;
  uint64_t seed = 0;

  void Validate() const;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d logits
};

/// Mean over rows of -sum y log softmax(z). Label rows must sum to 1.
LossResult SoftmaxCrossEntropy(const Tensor &logits, const Tensor &labels);

/// Cosine decay with warm restarts; cycle i lasts T_i = T_0 * mult^i steps.
class CosineRestartSchedule {
 public:
  CosineRestartSchedule(const TrainConfig &config, size_t steps_per_epoch);
  double lr(size_t step) const;
  /// Learning rate at position t of a cycle of length T.
  static double CycleLr(double t, double T, double lr_max, double lr_min);

 private:
  double lr_max_, lr_min_, first_period_, mult_;
};

/// SGD with heavy-ball momentum: v = m v + g; p -= lr v.
class Sgd {
 public:
  explicit Sgd(double momentum) : momentum_(momentum) {}
  void Step(const std::vector<Param *> &params, double lr);

 private:
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace ascene

#endif  // ASCENE_OPTIM_H_
