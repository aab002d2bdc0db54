// src/models.cc

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

#include "ascene/models.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ascene/error.h"
#include "ascene/parallel.h"

namespace ascene {

namespace {

constexpr std::string_view kFamilyNames[] = {"resnet", "fcnn", "fsfcnn"};

int ConvBnRelu(Model &m, int x, size_t in, size_t out) {
  x = m.Add(std::make_unique<Conv2d>(in, out, 3, 3), x);
  x = m.Add(std::make_unique<BatchNorm>(out), x);
  return m.Add(std::make_unique<Relu>(), x);
}

int ResidualBlock(Model &m, int x, size_t ch) {
  int y = ConvBnRelu(m, x, ch, ch);
  y = m.Add(std::make_unique<Conv2d>(ch, ch, 3, 3), y);
  y = m.Add(std::make_unique<BatchNorm>(ch), y);
  y = m.Add(std::make_unique<ResidualAdd>(), std::vector<int>{y, x});
  return m.Add(std::make_unique<Relu>(), y);
}

void Head(Model &m, int x, size_t in, size_t n_classes) {
  x = m.Add(std::make_unique<Conv2d>(in, n_classes, 1, 1), x);
  x = m.Add(std::make_unique<GlobalAvgPool>(), x);
  m.Add(std::make_unique<Softmax>(), x);
}

// Shared body for the two fully convolutional families: conv widths per
// layer, and after which layers (1-based) a pool of the given window sits.
struct PoolSite {
  size_t after;
  size_t ph, pw;
};

Model BuildPlainCnn(const ArchitectureConfig &cfg, const std::vector<size_t> &widths,
                    const std::vector<PoolSite> &pools) {
  Model m({cfg.channels, cfg.time_frames, cfg.mel_bins});
  int x = 0;
  size_t in = cfg.channels;
  for (size_t i = 0; i < widths.size(); ++i) {
    x = ConvBnRelu(m, x, in, widths[i]);
    in = widths[i];
    for (const PoolSite &p : pools)
      if (p.after == i + 1) {
        x = m.Add(std::make_unique<MaxPool>(p.ph, p.pw), x);
        x = m.Add(std::make_unique<Dropout>(cfg.dropout_rate), x);
      }
  }
  x = m.Add(std::make_unique<ChannelAttention>(in, 4), x);
  Head(m, x, in, cfg.n_classes);
  return m;
}

void Require(bool ok, const std::string &msg) {
  if (!ok) throw ConfigError(msg);
}

void CheckLabel(const LabeledTensor &ex, size_t n_classes, size_t index) {
  if (ex.label.size() != n_classes)
    throw ShapeError("train: example " + std::to_string(index) + " has " +
                     std::to_string(ex.label.size()) + " label entries, expected " +
                     std::to_string(n_classes));
  double s = 0.0;
  for (double v : ex.label) {
    if (!(v >= 0.0)) throw ConfigError("train: negative label entry in example " + std::to_string(index));
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-6) throw ConfigError("train: label of example " + std::to_string(index) + " does not sum to 1");
}

}  // namespace

std::string_view FamilyName(Family f) { return kFamilyNames[static_cast<size_t>(f)]; }

std::optional<Family> ParseFamily(std::string_view name) {
  for (size_t i = 0; i < 3; ++i)
    if (kFamilyNames[i] == name) return static_cast<Family>(i);
  return std::nullopt;
}

ArchitectureConfig ArchitectureConfig::Defaults(Family family, size_t n_classes) {
  ArchitectureConfig c;
  c.family = family;
  c.n_classes = n_classes;
  c.base_channels = family == Family::kResnet ? 24 : 16;
  return c;
}

void ArchitectureConfig::Validate() const {
  Require(n_classes == 3 || n_classes == 10, "arch: n_classes must be 3 or 10");
  Require(base_channels >= 4, "arch: base_channels must be >= 4");
  Require(dropout_rate >= 0.0 && dropout_rate < 1.0, "arch: dropout_rate must lie in [0, 1)");
  Require(channels >= 1 && time_frames >= 1 && mel_bins >= 1, "arch: empty input geometry");
  switch (family) {
    case Family::kResnet:
      Require(depth >= 1, "arch: resnet depth must be >= 1");
      Require(mel_bins % 2 == 0, "arch: resnet needs an even mel dimension");
      break;
    case Family::kFcnn:
      Require(time_frames >= 8 && mel_bins >= 8, "arch: input too small for three 2x2 poolings");
      break;
    case Family::kFsFcnn:
      Require(time_frames >= 8 && mel_bins >= 2, "arch: input too small for the pooling schedule");
      break;
  }
}

KeyValues ArchitectureConfig::ToKeyValues() const {
  KeyValues kv;
  kv.Set("family", std::string(FamilyName(family)));
  kv.Set("n_classes", std::to_string(n_classes));
  kv.Set("base_channels", std::to_string(base_channels));
  kv.Set("depth", std::to_string(depth));
  kv.Set("dropout_rate", FormatDouble(dropout_rate));
  kv.Set("time_frames", std::to_string(time_frames));
  kv.Set("mel_bins", std::to_string(mel_bins));
  kv.Set("channels", std::to_string(channels));
  return kv;
}

ArchitectureConfig ArchitectureConfig::FromKeyValues(const KeyValues &kv) {
  auto fam = ParseFamily(kv.Get("family", "fcnn"));
  if (!fam) throw ConfigError("arch: unknown family '" + kv.Get("family") + "'");
  ArchitectureConfig c = Defaults(*fam, static_cast<size_t>(kv.GetInt("n_classes", 10)));
  auto count = [&](const char *key, size_t fallback) {
    int64_t v = kv.GetInt(key, static_cast<int64_t>(fallback));
    if (v < 0) throw ConfigError(std::string("arch: ") + key + " must be >= 0");
    return static_cast<size_t>(v);
  };
  c.base_channels = count("base_channels", c.base_channels);
  c.depth = count("depth", c.depth);
  c.dropout_rate = kv.GetDouble("dropout_rate", c.dropout_rate);
  c.time_frames = count("time_frames", c.time_frames);
  c.mel_bins = count("mel_bins", c.mel_bins);
  c.channels = count("channels", c.channels);
  c.Validate();
  return c;
}

Model BuildResnet(const ArchitectureConfig &cfg) {
  if (cfg.family != Family::kResnet) throw ConfigError("build_resnet: family is not resnet");
  cfg.Validate();
  const size_t half = cfg.mel_bins / 2, b = cfg.base_channels;
  Model m({cfg.channels, cfg.time_frames, cfg.mel_bins});
  std::vector<int> branch_out;
  for (size_t lo : {size_t{0}, half}) {
    int x = m.Add(std::make_unique<FreqSlice>(lo, lo + half), 0);
    x = ConvBnRelu(m, x, cfg.channels, b);
    for (size_t d = 0; d < cfg.depth; ++d) x = ResidualBlock(m, x, b);
    branch_out.push_back(x);
  }
  int x = m.Add(std::make_unique<FreqConcat>(), branch_out);
  Head(m, x, b, cfg.n_classes);
  return m;
}

Model BuildFcnn(const ArchitectureConfig &cfg) {
  if (cfg.family != Family::kFcnn) throw ConfigError("build_fcnn: family is not fcnn");
  cfg.Validate();
  const size_t b = cfg.base_channels;
  return BuildPlainCnn(cfg, {b, b, 2 * b, 2 * b, 4 * b, 4 * b, 4 * b, 4 * b, 4 * b},
                       {{2, 2, 2}, {4, 2, 2}, {7, 2, 2}});
}

Model BuildFsFcnn(const ArchitectureConfig &cfg) {
  if (cfg.family != Family::kFsFcnn) throw ConfigError("build_fsfcnn: family is not fsfcnn");
  cfg.Validate();
  const size_t b = cfg.base_channels;
  return BuildPlainCnn(cfg, {b, b, 2 * b, 2 * b, 2 * b, 4 * b, 4 * b, 4 * b, 4 * b, 4 * b, 4 * b},
                       {{2, 2, 1}, {5, 2, 1}, {9, 2, 2}});
}

Model BuildModel(const ArchitectureConfig &cfg) {
  switch (cfg.family) {
    case Family::kResnet:
      return BuildResnet(cfg);
    case Family::kFcnn:
      return BuildFcnn(cfg);
    case Family::kFsFcnn:
      return BuildFsFcnn(cfg);
  }
  throw ConfigError("unknown family");
}

int ClassifierNode(const Model &model) {
  for (int id = 1; id < static_cast<int>(model.size()); ++id) {
    if (model.layer(id)->kind() != LayerKind::kGlobalAvgPool) continue;
    int src = model.inputs(id)[0];
    const Layer *l = model.layer(src);
    if (l && l->kind() == LayerKind::kConv2d) {
      Hyper h = l->hyper();
      if (h.at("kh") == 1 && h.at("kw") == 1) return src;
    }
  }
  return -1;
}

size_t BodyConvCount(const Model &model) {
  int head = ClassifierNode(model);
  size_t n = 0;
  for (int id = 1; id < static_cast<int>(model.size()); ++id)
    if (id != head && model.layer(id)->kind() == LayerKind::kConv2d) ++n;
  return n;
}

size_t FrequencyDownsamplings(const Model &model) {
  size_t n = 0;
  for (int id = 1; id < static_cast<int>(model.size()); ++id) {
    const Layer *l = model.layer(id);
    if (l->kind() == LayerKind::kMaxPool && l->hyper().at("pw") > 1) ++n;
    if (l->kind() == LayerKind::kConv2d && l->hyper().at("sw") > 1) ++n;
  }
  return n;
}

Tensor ToBatch(const std::vector<const FeatureTensor *> &features) {
  if (features.empty()) throw ShapeError("to_batch: empty batch");
  const FeatureTensor &f0 = *features[0];
  const size_t t = f0.time, m = f0.mel, c = f0.channels;
  Tensor x({features.size(), c, t, m});
  for (size_t n = 0; n < features.size(); ++n) {
    const FeatureTensor &f = *features[n];
    if (!f.SameShape(f0)) throw ShapeError("to_batch: feature tensors differ in shape");
    double *dst = x.data() + n * c * t * m;
    for (size_t ti = 0; ti < t; ++ti)
      for (size_t mi = 0; mi < m; ++mi)
        for (size_t ci = 0; ci < c; ++ci) dst[(ci * t + ti) * m + mi] = f.values[(ti * m + mi) * c + ci];
  }
  return x;
}

std::string TrainedModel::ConfigText() const {
  KeyValues kv;
  KeyValues a = arch.ToKeyValues();
  for (const auto &[k, v] : a.entries()) kv.Set("arch." + k, v);
  kv.Set("train.lr_max", FormatDouble(train.lr_max));
  kv.Set("train.lr_min", FormatDouble(train.lr_min));
  kv.Set("train.restart_period_epochs", FormatDouble(train.restart_period_epochs));
  kv.Set("train.period_multiplier", FormatDouble(train.period_multiplier));
  kv.Set("train.momentum", FormatDouble(train.momentum));
  kv.Set("train.batch_size", std::to_string(train.batch_size));
  kv.Set("train.epochs", std::to_string(train.epochs));
  kv.Set("train.seed", std::to_string(train.seed));
  kv.Set("train.final_loss", FormatDouble(final_loss));
  return kv.Format();
}

TrainedModel Train(const ArchitectureConfig &arch, const std::vector<LabeledTensor> &data,
                   const TrainConfig &tc, const TrainOptions &opts) {
  arch.Validate();
  tc.Validate();
  if (data.empty()) throw ConfigError("train: empty dataset");
  const FeatureTensor &f0 = data[0].features;
  for (size_t i = 0; i < data.size(); ++i) {
    const FeatureTensor &f = data[i].features;
    if (!f.SameShape(f0)) throw ShapeError("train: feature tensors differ in shape");
    CheckLabel(data[i], arch.n_classes, i);
  }
  if (f0.mel != arch.mel_bins || f0.channels != arch.channels || f0.time < arch.time_frames)
    throw ShapeError("train: features are " + std::to_string(f0.time) + "x" + std::to_string(f0.mel) + "x" +
                     std::to_string(f0.channels) + ", network expects >= " + std::to_string(arch.time_frames) +
                     "x" + std::to_string(arch.mel_bins) + "x" + std::to_string(arch.channels));
  if (opts.spec_augment && !(opts.augment.specaug_fraction >= 0.0 && opts.augment.specaug_fraction < 1.0))
    throw ConfigError("train: spec_augment fraction must lie in [0, 1)");

  TrainedModel out{BuildModel(arch), arch, tc, 0.0, {}};
  Model &m = out.model;
  Rng init_rng(DeriveSeed({tc.seed, 1}));
  m.Init(init_rng);
  Rng rng(DeriveSeed({tc.seed, 2}));

  const size_t n = data.size(), bs = std::min(tc.batch_size, n);
  const size_t steps_per_epoch = (n + bs - 1) / bs;
  CosineRestartSchedule schedule(tc, steps_per_epoch);
  Sgd sgd(tc.momentum);
  const int logits = m.logits_node();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const size_t center = (f0.time - arch.time_frames) / 2;
  size_t step = 0;

  for (size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < n; start += bs) {
      size_t count = std::min(bs, n - start);
      std::vector<LabeledTensor> batch;
      batch.reserve(count);
      for (size_t i = 0; i < count; ++i) {
        const LabeledTensor &ex = data[order[start + i]];
        FeatureTensor f = opts.random_crop ? RandomCrop(ex.features, arch.time_frames, rng)
                                           : CropAt(ex.features, center, arch.time_frames);
        batch.push_back({std::move(f), ex.label});
      }
      if (opts.mixup && count > 1) batch = Mixup(batch, opts.augment.mixup_alpha, rng);
      if (opts.spec_augment) {
        SpecAugmentMask mask =
            DrawSpecAugmentMask(arch.time_frames, arch.mel_bins, opts.augment.specaug_fraction, rng);
        for (auto &ex : batch) ApplySpecAugmentMask(ex.features, mask);
      }
      std::vector<const FeatureTensor *> fs;
      Tensor labels({count, arch.n_classes});
      for (size_t i = 0; i < count; ++i) {
        fs.push_back(&batch[i].features);
        std::copy(batch[i].label.begin(), batch[i].label.end(), labels.values.begin() + i * arch.n_classes);
      }
      Tensor x = ToBatch(fs);
      double lr = schedule.lr(step);
      LossResult loss = SoftmaxCrossEntropy(m.Forward(x, Mode::kTrain, &rng, logits), labels);
      if (!std::isfinite(loss.loss))
        throw NumericalError("train: non-finite loss at step " + std::to_string(step) + " (lr " +
                             FormatDouble(lr) + ")");
      m.ZeroGrad();
      m.Backward(loss.grad, logits);
      sgd.Step(m.Params(), lr);
      epoch_loss += loss.loss * static_cast<double>(count);
      ++step;
    }
    epoch_loss /= static_cast<double>(n);
    out.loss_curve.push_back(epoch_loss);
    out.final_loss = epoch_loss;
    if (opts.on_epoch) opts.on_epoch(epoch, epoch_loss);
  }
  return out;
}

std::vector<size_t> WindowOffsets(size_t time, size_t window) {
  if (time < window)
    throw ShapeError("predict: clip has " + std::to_string(time) + " frames, network needs " +
                     std::to_string(window));
  if (time == window) return {0};
  size_t k = (time + window - 1) / window + 1;
  std::vector<size_t> offsets;
  for (size_t i = 0; i < k; ++i) {
    size_t off = static_cast<size_t>(std::llround(static_cast<double>(i) * (time - window) / (k - 1)));
    if (offsets.empty() || offsets.back() != off) offsets.push_back(off);
  }
  return offsets;
}

std::vector<double> Predict(const TrainedModel &model, const FeatureTensor &features) {
  const ArchitectureConfig &a = model.arch;
  if (features.mel != a.mel_bins || features.channels != a.channels)
    throw ShapeError("predict: feature shape does not match the network input");
  std::vector<FeatureTensor> windows;
  for (size_t off : WindowOffsets(features.time, a.time_frames))
    windows.push_back(CropAt(features, off, a.time_frames));
  std::vector<const FeatureTensor *> ptrs;
  for (const auto &w : windows) ptrs.push_back(&w);
  Tensor p = model.model.Infer(ToBatch(ptrs));
  std::vector<double> out(a.n_classes, 0.0);
  for (size_t w = 0; w < windows.size(); ++w)
    for (size_t k = 0; k < a.n_classes; ++k) out[k] += p[w * a.n_classes + k];
  for (double &v : out) v /= static_cast<double>(windows.size());
  return out;
}

std::vector<std::vector<double>> PredictAll(const TrainedModel &model,
                                            const std::vector<const FeatureTensor *> &features,
                                            int workers) {
  std::vector<std::vector<double>> out(features.size());
  ParallelFor(features.size(), static_cast<size_t>(std::max(1, workers)),
              [&](size_t i) { out[i] = Predict(model, *features[i]); });
  return out;
}

void SaveTrainedModel(const std::filesystem::path &path, const TrainedModel &model) {
  SaveCheckpoint(path, model.model, model.ConfigText());
}

TrainedModel LoadTrainedModel(const std::filesystem::path &path) {
  Checkpoint c = LoadCheckpoint(path);
  KeyValues kv = KeyValues::Parse(c.config_text);
  ArchitectureConfig arch = ArchitectureConfig::FromKeyValues(kv.Section("arch"));
  if (BuildModel(arch).Describe() != c.model.Describe())
    throw Error("checkpoint " + path.string() + ": graph does not match its architecture config");
  TrainConfig tc;
  KeyValues t = kv.Section("train");
  tc.lr_max = t.GetDouble("lr_max", tc.lr_max);
  tc.lr_min = t.GetDouble("lr_min", tc.lr_min);
  tc.restart_period_epochs = t.GetDouble("restart_period_epochs", tc.restart_period_epochs);
  tc.period_multiplier = t.GetDouble("period_multiplier", tc.period_multiplier);
  tc.momentum = t.GetDouble("momentum", tc.momentum);
  tc.batch_size = static_cast<size_t>(t.GetInt("batch_size", static_cast<int64_t>(tc.batch_size)));
  tc.epochs = static_cast<size_t>(t.GetInt("epochs", static_cast<int64_t>(tc.epochs)));
  tc.seed = static_cast<uint64_t>(t.GetInt("seed", 0));
  TrainedModel out{std::move(c.model), arch, tc, t.GetDouble("final_loss", 0.0), {}};
  return out;
}

}  // namespace ascene
