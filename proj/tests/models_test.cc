// tests/models_test.cc

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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ascene/error.h"
#include "ascene/models.h"
#include "test_util.h"

namespace ascene {
namespace {

ArchitectureConfig Arch(Family f, size_t time = 423, size_t mel = 128, size_t classes = 10) {
  ArchitectureConfig a = ArchitectureConfig::Defaults(f, classes);
  a.time_frames = time;
  a.mel_bins = mel;
  return a;
}

int FindKind(const Model &m, LayerKind kind, int start = 1) {
  for (int id = start; id < static_cast<int>(m.size()); ++id)
    if (m.layer(id)->kind() == kind) return id;
  return -1;
}

FeatureTensor Uniform(size_t t, size_t m, double v = 0.5) { return FeatureTensor(t, m, 3, v); }

template <typename V>
double Sum(const V &v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

TEST(Resnet, SplitsFrequencyIntoTwoHalves) {
  Model m = BuildResnet(Arch(Family::kResnet));
  int a = FindKind(m, LayerKind::kFreqSlice);
  int b = FindKind(m, LayerKind::kFreqSlice, a + 1);
  ASSERT_GT(a, 0);
  ASSERT_GT(b, 0);
  EXPECT_EQ(m.shape(a), Shape({3, 423, 64}));
  EXPECT_EQ(m.shape(b), Shape({3, 423, 64}));
  EXPECT_EQ(m.layer(a)->hyper().at("begin"), 0.0);
  EXPECT_EQ(m.layer(b)->hyper().at("begin"), 64.0);
  int cat = FindKind(m, LayerKind::kFreqConcat);
  EXPECT_EQ(m.shape(cat)[2], 128u);
}

TEST(Resnet, NeverShrinksFrequency) {
  Model m = BuildResnet(Arch(Family::kResnet));
  EXPECT_EQ(FrequencyDownsamplings(m), 0u);
  EXPECT_EQ(FindKind(m, LayerKind::kMaxPool), -1);
  for (int id = 1; id < static_cast<int>(m.size()); ++id)
    if (m.shape(id).size() == 3) {
      EXPECT_TRUE(m.shape(id)[2] == 64 || m.shape(id)[2] == 128) << id;
      EXPECT_EQ(m.shape(id)[1], 423u);
    }
}

TEST(Resnet, OutputsDistribution) {
  ArchitectureConfig a = Arch(Family::kResnet, 20, 16);
  a.base_channels = 4;
  Model m = BuildResnet(a);
  Rng rng(1);
  m.Init(rng);
  FeatureTensor f(20, 16, 3);
  f.values = testing::RandomVector(f.values.size(), 3, 0.0, 1.0);
  Tensor p = m.Infer(ToBatch({&f}));
  ASSERT_EQ(p.shape, Shape({1, 10}));
  EXPECT_NEAR(Sum(p.values), 1.0, 1e-9);
  a.mel_bins = 15;
  EXPECT_THROW(BuildResnet(a), ConfigError);
}

TEST(Fcnn, NineBodyConvsWithAttention) {
  Model m = BuildFcnn(Arch(Family::kFcnn));
  EXPECT_EQ(BodyConvCount(m), 9u);
  EXPECT_EQ(FrequencyDownsamplings(m), 3u);
  int att = FindKind(m, LayerKind::kChannelAttention);
  ASSERT_GT(att, 0);
  EXPECT_EQ(m.shape(att)[2], 16u);
  int head = ClassifierNode(m);
  ASSERT_GT(head, att);
  EXPECT_EQ(m.shape(head)[0], 10u);
  for (int id = 1; id < static_cast<int>(m.size()); ++id)
    if (m.layer(id)->kind() == LayerKind::kMaxPool) {
      EXPECT_EQ(m.layer(id + 1)->kind(), LayerKind::kDropout);
    } else if (m.layer(id)->kind() == LayerKind::kConv2d && id != head) {
      EXPECT_EQ(m.layer(id)->hyper().at("kh"), 3.0);
      EXPECT_EQ(m.layer(id + 1)->kind(), LayerKind::kBatchNorm);
      EXPECT_EQ(m.layer(id + 2)->kind(), LayerKind::kRelu);
    }
}

TEST(Fcnn, EvalIsDeterministicAndUniformInputGivesDistribution) {
  ArchitectureConfig a = Arch(Family::kFcnn, 16, 32);
  a.base_channels = 4;
  a.dropout_rate = 0.5;
  Model m = BuildFcnn(a);
  Rng rng(2);
  m.Init(rng);
  FeatureTensor f = Uniform(16, 32);
  Tensor x = ToBatch({&f});
  Tensor p1 = m.Infer(x), p2 = m.Infer(x);
  EXPECT_EQ(p1.values, p2.values);
  EXPECT_NEAR(Sum(p1.values), 1.0, 1e-9);
  for (double v : p1.values) EXPECT_GT(v, 0.0);
  a.time_frames = 7;
  EXPECT_THROW(BuildFcnn(a), ConfigError);
}

TEST(FsFcnn, ElevenConvsAndKeepsMoreFrequency) {
  Model fs = BuildFsFcnn(Arch(Family::kFsFcnn));
  Model fc = BuildFcnn(Arch(Family::kFcnn));
  EXPECT_EQ(BodyConvCount(fs), 11u);
  EXPECT_LT(FrequencyDownsamplings(fs), FrequencyDownsamplings(fc));
  int att = FindKind(fs, LayerKind::kChannelAttention);
  EXPECT_EQ(fs.shape(att)[2], 64u);
  EXPECT_EQ(fc.shape(FindKind(fc, LayerKind::kChannelAttention))[2], 16u);
  // Time is pooled three times in both.
  EXPECT_EQ(fs.shape(att)[1], 423u / 8);
}

TEST(FsFcnn, OutputsDistribution) {
  ArchitectureConfig a = Arch(Family::kFsFcnn, 16, 8, 3);
  a.base_channels = 4;
  Model m = BuildFsFcnn(a);
  Rng rng(3);
  m.Init(rng);
  FeatureTensor f = Uniform(16, 8, 0.2);
  Tensor p = m.Infer(ToBatch({&f}));
  ASSERT_EQ(p.size(), 3u);
  EXPECT_NEAR(Sum(p.values), 1.0, 1e-9);
}

TEST(Architectures, ClassCountOnlyChangesHead) {
  for (Family f : {Family::kResnet, Family::kFcnn, Family::kFsFcnn}) {
    Model m10 = BuildModel(Arch(f, 32, 32, 10));
    Model m3 = BuildModel(Arch(f, 32, 32, 3));
    ASSERT_EQ(m10.size(), m3.size());
    int head = ClassifierNode(m10);
    EXPECT_EQ(head, ClassifierNode(m3));
    for (int id = 1; id < head; ++id) EXPECT_EQ(m10.shape(id), m3.shape(id)) << id;
    size_t in = m10.shape(m10.inputs(head)[0])[0];
    EXPECT_EQ(m10.ParameterCount() - m3.ParameterCount(), 7 * (in + 1));
  }
}

TEST(Architectures, ConfigValidationAndText) {
  ArchitectureConfig a = Arch(Family::kFcnn);
  a.n_classes = 5;
  EXPECT_THROW(a.Validate(), ConfigError);
  a = Arch(Family::kResnet);
  a.base_channels = 3;
  EXPECT_THROW(a.Validate(), ConfigError);
  a = Arch(Family::kFsFcnn, 50, 64, 3);
  a.dropout_rate = 0.25;
  ArchitectureConfig b = ArchitectureConfig::FromKeyValues(a.ToKeyValues());
  EXPECT_EQ(b.ToKeyValues().Format(), a.ToKeyValues().Format());
  KeyValues bad = a.ToKeyValues();
  bad.Set("family", "vgg");
  EXPECT_THROW(ArchitectureConfig::FromKeyValues(bad), ConfigError);
}

TEST(ToBatch, ChannelsBecomePlanes) {
  FeatureTensor f(2, 3, 3);
  for (size_t t = 0; t < 2; ++t)
    for (size_t m = 0; m < 3; ++m)
      for (size_t c = 0; c < 3; ++c) f.at(t, m, c) = 100 * c + 10 * t + m;
  Tensor x = ToBatch({&f, &f});
  EXPECT_EQ(x.shape, Shape({2, 3, 2, 3}));
  for (size_t c = 0; c < 3; ++c)
    for (size_t t = 0; t < 2; ++t)
      for (size_t m = 0; m < 3; ++m) EXPECT_EQ(x[18 + (c * 2 + t) * 3 + m], 100.0 * c + 10 * t + m);
}

TEST(WindowOffsets, CoverClip) {
  EXPECT_EQ(WindowOffsets(400, 400), std::vector<size_t>({0}));
  EXPECT_EQ(WindowOffsets(423, 400), std::vector<size_t>({0, 12, 23}));
  auto w = WindowOffsets(100, 30);
  EXPECT_EQ(w.front(), 0u);
  EXPECT_EQ(w.back(), 70u);
  EXPECT_THROW(WindowOffsets(10, 11), ShapeError);
}

// Three tone classes rendered to 1 s clips and turned into features.
std::vector<LabeledTensor> ToyToneSet(size_t per_class, uint64_t seed) {
  const double freqs[3] = {300.0, 1200.0, 4800.0};
  FeatureExtractor fx;
  Rng rng(seed);
  std::vector<LabeledTensor> out;
  for (size_t k = 0; k < per_class; ++k)
    for (size_t c = 0; c < 3; ++c) {
      AudioClip clip;
      clip.samples.resize(44100);
      double f = freqs[c] * rng.Uniform(0.95, 1.05), amp = rng.Uniform(0.1, 0.4);
      for (size_t i = 0; i < clip.samples.size(); ++i)
        clip.samples[i] = amp * std::sin(2 * std::numbers::pi * f * i / 44100.0) + 0.01 * rng.Normal();
      LabeledTensor ex{fx.Extract(clip), std::vector<double>(3, 0.0)};
      ex.label[c] = 1.0;
      out.push_back(std::move(ex));
    }
  return out;
}

ArchitectureConfig ToyArch() {
  ArchitectureConfig a = Arch(Family::kFcnn, 32, 128, 3);
  a.base_channels = 4;
  return a;
}

TrainConfig ToyTrain(size_t epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 8;
  tc.restart_period_epochs = static_cast<double>(epochs ? epochs : 1);
  tc.seed = 5;
  return tc;
}

size_t Argmax(const std::vector<double> &v) {
  return static_cast<size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

TEST(Train, ZeroEpochsLeavesInitialParameters) {
  auto data = ToyToneSet(2, 1);
  TrainedModel t = Train(ToyArch(), data, ToyTrain(0));
  Model fresh = BuildModel(ToyArch());
  Rng init(DeriveSeed({5, 1}));
  fresh.Init(init);
  auto a = t.model.State();
  auto b = fresh.State();
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->values, b[i]->values);
}

TEST(Train, ToyThreeClassSetIsLearnedAndDeterministic) {
  auto data = ToyToneSet(10, 2);  // 30 clips
  TrainOptions opts;
  opts.mixup = false;
  TrainedModel t = Train(ToyArch(), data, ToyTrain(30), opts);
  size_t correct = 0;
  for (const auto &ex : data) correct += Argmax(Predict(t, ex.features)) == Argmax(ex.label);
  EXPECT_GE(correct / 30.0, 0.95);
  EXPECT_EQ(t.loss_curve.size(), 30u);
  EXPECT_LT(t.loss_curve.back(), t.loss_curve.front());

  auto held_out = ToyToneSet(10, 99);
  size_t ok = 0;
  for (const auto &ex : held_out) ok += Argmax(Predict(t, ex.features)) == Argmax(ex.label);
  EXPECT_GE(ok / 30.0, 0.9);

  TrainedModel again = Train(ToyArch(), data, ToyTrain(30), opts);
  EXPECT_EQ(again.final_loss, t.final_loss);
}

TEST(Train, AugmentedTrainingRunsAndStaysFinite) {
  auto data = ToyToneSet(3, 3);
  TrainOptions opts;
  opts.spec_augment = true;
  TrainedModel t = Train(ToyArch(), data, ToyTrain(3), opts);
  EXPECT_TRUE(std::isfinite(t.final_loss));
  TrainedModel u = Train(ToyArch(), data, ToyTrain(3), opts);
  EXPECT_EQ(u.loss_curve, t.loss_curve);
}

TEST(Train, RejectsBadInputs) {
  auto data = ToyToneSet(1, 4);
  auto wrong_label = data;
  wrong_label[0].label = {0.5, 0.2, 0.2};
  EXPECT_THROW(Train(ToyArch(), wrong_label, ToyTrain(1)), ConfigError);
  auto nan = data;
  nan[0].features.values[(18 * 128 + 5) * 3] = std::nan("");
  TrainOptions plain;
  plain.random_crop = false;
  plain.mixup = false;
  TrainConfig tc = ToyTrain(1);
  tc.batch_size = 1;
  EXPECT_THROW(Train(ToyArch(), nan, tc, plain), NumericalError);
  ArchitectureConfig big = ToyArch();
  big.time_frames = 40;
  EXPECT_THROW(Train(big, data, ToyTrain(1)), ShapeError);
  EXPECT_THROW(Train(ToyArch(), {}, ToyTrain(1)), ConfigError);
}

TEST(Predict, DistributionAndRepeatable) {
  auto data = ToyToneSet(1, 6);
  TrainedModel t = Train(ToyArch(), data, ToyTrain(1));
  for (const auto &ex : data) {
    auto p = Predict(t, ex.features);
    ASSERT_EQ(p.size(), 3u);
    EXPECT_NEAR(Sum(p), 1.0, 1e-9);
    EXPECT_EQ(p, Predict(t, ex.features));
  }
  std::vector<const FeatureTensor *> fs;
  for (const auto &ex : data) fs.push_back(&ex.features);
  auto all = PredictAll(t, fs, 3);
  for (size_t i = 0; i < fs.size(); ++i) EXPECT_EQ(all[i], Predict(t, *fs[i]));
  EXPECT_THROW(Predict(t, FeatureTensor(36, 64, 3)), ShapeError);
}

TEST(SavedModel, RoundTripAndGraphValidation) {
  auto data = ToyToneSet(1, 7);
  TrainedModel t = Train(ToyArch(), data, ToyTrain(1));
  testing::TempDir dir("models");
  SaveTrainedModel(dir / "m.ckpt", t);
  TrainedModel back = LoadTrainedModel(dir / "m.ckpt");
  EXPECT_EQ(back.arch.ToKeyValues().Format(), t.arch.ToKeyValues().Format());
  EXPECT_EQ(back.train.seed, 5u);
  EXPECT_EQ(back.final_loss, t.final_loss);
  EXPECT_EQ(Predict(back, data[0].features), Predict(t, data[0].features));

  std::string text = t.ConfigText();
  text.replace(text.find("arch.base_channels=4"), 20, "arch.base_channels=5");
  SaveCheckpoint(dir / "bad.ckpt", t.model, text);
  EXPECT_THROW(LoadTrainedModel(dir / "bad.ckpt"), Error);
  EXPECT_THROW(LoadTrainedModel(dir / "none.ckpt"), MissingArtifactError);
}

}  // namespace
}  // namespace ascene
