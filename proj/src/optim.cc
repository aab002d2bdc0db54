// src/optim.cc

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

#include "ascene/optim.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ascene/error.h"

namespace ascene {

void TrainConfig::Validate() const {
  if (!(lr_min >= 0.0 && lr_min < lr_max)) throw ConfigError("train: need 0 <= lr_min < lr_max");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(restart_period_epochs > 0.0)) throw ConfigError("train: restart period must be > 0");
  if (!(period_multiplier >= 1.0)) throw ConfigError("train: period multiplier must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
}

LossResult SoftmaxCrossEntropy(const Tensor &logits, const Tensor &labels) {
  if (logits.rank() != 2 || labels.shape != logits.shape)
    throw ShapeError("cross_entropy: logits " + ShapeString(logits.shape) + " vs labels " +
                     ShapeString(labels.shape));
  const size_t n = logits.dim(0), k = logits.dim(1);
  if (n == 0) throw ShapeError("cross_entropy: empty batch");
  LossResult r;
  r.grad = Tensor(logits.shape);
  for (size_t i = 0; i < n; ++i) {
    const double *z = logits.data() + i * k;
    const double *y = labels.data() + i * k;
    double ysum = 0.0;
    for (size_t j = 0; j < k; ++j) ysum += y[j];
    if (std::abs(ysum - 1.0) > 1e-6)
      throw ConfigError("cross_entropy: label row " + std::to_string(i) + " sums to " + std::to_string(ysum));
    double mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
    double log_norm = mx + std::log(sum);
    for (size_t j = 0; j < k; ++j) {
      if (y[j] != 0.0) r.loss -= y[j] * (z[j] - log_norm);
      r.grad[i * k + j] = (std::exp(z[j] - log_norm) - y[j]) / static_cast<double>(n);
    }
  }
  r.loss /= static_cast<double>(n);
  return r;
}

CosineRestartSchedule::CosineRestartSchedule(const TrainConfig &config, size_t steps_per_epoch)
    : lr_max_(config.lr_max),
      lr_min_(config.lr_min),
      first_period_(config.restart_period_epochs * static_cast<double>(steps_per_epoch)),
      mult_(config.period_multiplier) {
  config.Validate();
  if (steps_per_epoch == 0) throw ConfigError("schedule: steps_per_epoch must be >= 1");
}

double CosineRestartSchedule::CycleLr(double t, double T, double lr_max, double lr_min) {
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t / T));
}

double CosineRestartSchedule::lr(size_t step) const {
  double t = static_cast<double>(step), T = first_period_;
  while (t >= T) {
    t -= T;
    T *= mult_;
  }
  return CycleLr(t, T, lr_max_, lr_min_);
}

void Sgd::Step(const std::vector<Param *> &params, double lr) {
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const Param *p : params) velocity_.emplace_back(p->value.size(), 0.0);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const Param &p = *params[i];
    if (p.grad.size() != p.value.size() || velocity_[i].size() != p.value.size())
      throw ShapeError("sgd: parameter '" + p.name + "' shape changed");
    for (size_t k = 0; k < p.grad.size(); ++k)
      if (!std::isfinite(p.grad[k]))
        throw NumericalError("sgd: non-finite gradient in parameter '" + p.name + "' (tensor " +
                             std::to_string(i) + ", element " + std::to_string(k) + ")");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    Param &p = *params[i];
    std::vector<double> &v = velocity_[i];
    for (size_t k = 0; k < v.size(); ++k) {
      v[k] = momentum_ * v[k] + p.grad[k];
      p.value[k] -= lr * v[k];
    }
  }
}

}  // namespace ascene
