// tests/acceptance_test.cc

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

// Acceptance suite: one PASS/FAIL line per criterion, each under its own
// wall-clock budget. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "ascene/augment.h"
#include "ascene/features.h"
#include "ascene/fusion.h"
#include "ascene/models.h"
#include "ascene/optim.h"
#include "ascene/saliency.h"
#include "ascene/synth.h"
#include "grad_check.h"
#include "test_util.h"
#include "toy_burst.h"

namespace ascene {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char *format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

std::vector<double> RandomDistribution(size_t n, Rng &rng) {
  std::vector<double> v(n);
  double s = 0.0;
  for (double &x : v) s += (x = -std::log(1.0 - rng.Uniform()));
  for (double &x : v) x /= s;
  return v;
}

// 1 ------------------------------------------------------------------------
Outcome FeatureShape() {
  AudioClip clip;
  clip.sample_rate = 44100;
  clip.samples = testing::RandomVector(10 * 44100, 1, -0.5, 0.5);
  FeatureTensor t = FeatureExtractor().Extract(clip);
  bool ok = t.time == 423 && t.mel == 128 && t.channels == 3;
  return {ok, Fmt("%.0f x %.0f x %.0f", t.time, t.mel, t.channels)};
}

// 2 ------------------------------------------------------------------------
double ReportedAverage(const std::vector<double> &group_pct) {
  DatasetManifest m;
  std::map<std::string, std::string> predictions;
  auto groups = DefaultDeviceGroups();
  for (size_t g = 0; g < groups.size(); ++g) {
    const size_t correct = static_cast<size_t>(std::llround(group_pct[g] * 10.0));
    for (const auto &dev : groups[g].devices)
      for (size_t i = 0; i < 1000; ++i) {
        std::string truth(kSceneLabels[i % 10]), path = dev + "-" + std::to_string(i);
        m.entries.push_back({path, truth, dev, Split::kTest, ""});
        predictions[path] = i < correct ? truth : std::string(kSceneLabels[(i + 1) % 10]);
      }
  }
  return 100.0 * DeviceReport(predictions, m, groups).overall;
}

Outcome TableAggregation() {
  double base = ReportedAverage({70.6, 61.6, 53.3, 44.3});
  double ens = ReportedAverage({87.9, 84.1, 80.4, 79.9});
  bool ok = std::abs(base - 54.1) <= 0.05 && std::abs(ens - 81.9) <= 0.05;
  return {ok, Fmt("baseline %.4f (54.1 +/- 0.05), 2-stage ensemble %.4f (81.9 +/- 0.05)", base, ens)};
}

// 3 ------------------------------------------------------------------------
Outcome FusionOracle() {
  ClassHierarchy h = ClassHierarchy::Default();
  Rng rng(3);
  ScoreTable coarse, fine;
  coarse.labels = h.coarse;
  fine.labels = h.fine;
  for (size_t i = 0; i < 1000; ++i) {
    std::string id = "clip" + std::to_string(i);
    coarse.clip_ids.push_back(id);
    fine.clip_ids.push_back(id);
    coarse.rows.push_back(RandomDistribution(3, rng));
    fine.rows.push_back(RandomDistribution(10, rng));
  }
  FusionResult r = FuseTwoStage(coarse, fine, h);
  size_t agree = 0;
  for (size_t i = 0; i < 1000; ++i) {
    // Exhaustive enumeration by label name.
    double best = -1.0;
    std::string label;
    for (size_t q = 0; q < 10; ++q) {
      double p = coarse.rows[i][h.CoarseIndex(h.Parent(h.fine[q]))] * fine.rows[i][q];
      if (p > best) {
        best = p;
        label = h.fine[q];
      }
    }
    agree += r.predictions[i] == label;
  }
  return {agree == 1000, Fmt("%.0f / 1000 agree", agree)};
}

// 4 ------------------------------------------------------------------------
Outcome FusionReductions() {
  ClassHierarchy h = ClassHierarchy::Default();
  Rng rng(4);
  size_t uniform_ok = 0, onehot_ok = 0, onehot_n = 0;
  for (size_t i = 0; i < 1000; ++i) {
    std::vector<double> f = RandomDistribution(10, rng);
    uniform_ok += FuseRow({1.0 / 3, 1.0 / 3, 1.0 / 3}, f, h.parent) == ArgmaxIndex(f);
  }
  // Half the rows are sparse; rows with no fine mass in the chosen superset
  // are redrawn.
  for (size_t i = 0; onehot_n < 1000; ++i) {
    std::vector<double> f = RandomDistribution(10, rng);
    const size_t sup = rng.Index(3);
    if (i % 2) {
      for (size_t q = 0; q < 10; ++q)
        if (rng.Uniform() < 0.5) f[q] = 0.0;
    }
    double mass = 0.0;
    for (size_t q = 0; q < 10; ++q) mass += h.parent[q] == sup ? f[q] : 0.0;
    if (mass <= 0.0) continue;
    std::vector<double> c(3, 0.0);
    c[sup] = 1.0;
    ++onehot_n;
    onehot_ok += h.parent[FuseRow(c, f, h.parent)] == sup;
  }
  bool ok = uniform_ok == 1000 && onehot_ok == 1000;
  return {ok, Fmt("uniform coarse %.0f / 1000, one-hot coarse %.0f / %.0f", uniform_ok, onehot_ok, onehot_n)};
}

// 5 ------------------------------------------------------------------------
Outcome GradientChecks() {
  const LayerKind kinds[] = {LayerKind::kConv2d,        LayerKind::kBatchNorm,   LayerKind::kRelu,
                             LayerKind::kMaxPool,       LayerKind::kDropout,     LayerKind::kGlobalAvgPool,
                             LayerKind::kChannelAttention, LayerKind::kResidualAdd, LayerKind::kDense,
                             LayerKind::kSoftmax,       LayerKind::kFreqSlice,   LayerKind::kFreqConcat};
  double worst = 0.0;
  std::string worst_kind;
  size_t instances = 0;
  for (LayerKind kind : kinds) {
    Rng rng(DeriveSeed({static_cast<uint64_t>(kind), 5}));
    for (int trial = 0; trial < 20; ++trial) {
      testing::Instance inst = testing::MakeInstance(kind, rng);
      double err = testing::GradCheck(*inst.layer, inst.inputs, 2000 + trial);
      ++instances;
      if (!(err <= worst)) {
        worst = err;
        worst_kind = std::string(LayerKindName(kind));
      }
    }
  }
  // Loss: softmax cross-entropy against soft labels.
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    size_t n = 1 + rng.Index(4), k = 2 + rng.Index(9);
    Tensor z = testing::Random({n, k}, rng, -3.0, 3.0);
    Tensor y({n, k});
    for (size_t r = 0; r < n; ++r) {
      std::vector<double> d = RandomDistribution(k, rng);
      for (size_t j = 0; j < k; ++j) y[r * k + j] = d[j];
    }
    LossResult res = SoftmaxCrossEntropy(z, y);
    double diff = 0.0, scale = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
      double keep = z[i];
      z[i] = keep + 1e-5;
      double up = SoftmaxCrossEntropy(z, y).loss;
      z[i] = keep - 1e-5;
      double down = SoftmaxCrossEntropy(z, y).loss;
      z[i] = keep;
      diff = std::max(diff, std::abs(res.grad[i] - (up - down) / 2e-5));
      scale = std::max(scale, std::abs(res.grad[i]));
    }
    double err = diff / std::max(1.0, scale);
    ++instances;
    if (!(err <= worst)) {
      worst = err;
      worst_kind = "cross_entropy";
    }
  }
  return {worst <= 1e-3, Fmt("%.0f instances over 12 layer kinds + loss, worst relative error ", instances) +
                             Fmt("%.2e", worst) + " (" + worst_kind + ")"};
}

// 6 ------------------------------------------------------------------------
Outcome AugmentationSuite() {
  std::vector<std::string> failures;
  Rng rng(6);
  // SpecAugment.
  for (int trial = 0; trial < 50; ++trial) {
    FeatureTensor x(423, 128, 3);
    x.values = testing::RandomVector(x.values.size(), 600 + trial, 0.1, 1.0);
    SpecAugmentMask m = DrawSpecAugmentMask(423, 128, 0.10, rng);
    if (m.time_width != 42 || m.freq_width != 12) failures.push_back("mask width");
    FeatureTensor y = x;
    ApplySpecAugmentMask(y, m);
    for (size_t t = 0; t < 423; ++t)
      for (size_t f = 0; f < 128; ++f)
        for (size_t c = 0; c < 3; ++c) {
          bool masked = (t >= m.time_start && t < m.time_start + m.time_width) ||
                        (f >= m.freq_start && f < m.freq_start + m.freq_width);
          if (masked ? y.at(t, f, c) != 0.0 : y.at(t, f, c) != x.at(t, f, c)) {
            failures.push_back("specaugment zeroing/complement");
            t = 423, f = 128, c = 3;
          }
        }
  }
  // Mixup.
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LabeledTensor> batch;
    for (size_t i = 0; i < 8; ++i) {
      FeatureTensor x(20, 16, 3);
      x.values = testing::RandomVector(x.values.size(), 700 + 8 * trial + i);
      std::vector<double> label(10, 0.0);
      label[rng.Index(10)] = 1.0;
      batch.push_back({x, label});
    }
    std::vector<LabeledTensor> out = Mixup(batch, 0.4, rng);
    for (const auto &ex : out) {
      double s = 0.0;
      for (double v : ex.label) s += v;
      if (std::abs(s - 1.0) > 1e-12) failures.push_back("mixup label sum");
    }
    for (size_t k = 0; k < out[0].features.values.size(); ++k) {
      double lo = 1e300, hi = -1e300;
      for (const auto &ex : batch) lo = std::min(lo, ex.features.values[k]), hi = std::max(hi, ex.features.values[k]);
      for (const auto &ex : out)
        if (ex.features.values[k] < lo - 1e-12 || ex.features.values[k] > hi + 1e-12) {
          failures.push_back("mixup convexity");
          k = out[0].features.values.size();
          break;
        }
    }
  }
  // Length preservation and the octave shifts of a 440 Hz tone.
  AudioClip tone;
  tone.sample_rate = 44100;
  tone.samples.resize(2 * 44100);
  for (size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 44100.0);
  for (double rate : {0.9, 1.1, 0.5, 2.0})
    if (SpeedChange(tone, rate).samples.size() != tone.samples.size()) failures.push_back("speed-change length");
  for (double st : {-12.0, -2.0, 2.0, 12.0})
    if (PitchShift(tone, st).samples.size() != tone.samples.size()) failures.push_back("pitch-shift length");
  const double up = testing::PeakHz(PitchShift(tone, 12.0).samples, 44100);
  const double down = testing::PeakHz(PitchShift(tone, -12.0).samples, 44100);
  if (std::abs(up - 880.0) > 0.02 * 880.0 || std::abs(down - 220.0) > 0.02 * 220.0)
    failures.push_back("pitch-shift peak");
  // Spectrum correction with the reference equal to the source spectrum.
  SynthSpec spec;
  std::vector<AudioClip> clips;
  for (int k = 0; k < 3; ++k)
    for (const auto &d : spec.devices) clips.push_back(RenderClip(spec, k, k, d));
  auto [ref, src] = BuildReferenceSpectrum(clips, "a");
  double worst = 0.0;
  for (const auto &c : clips) {
    if (c.device != "a") continue;
    AudioClip y = SpectrumCorrection(c, src, src);
    for (size_t i = 0; i < c.samples.size(); ++i) worst = std::max(worst, std::abs(y.samples[i] - c.samples[i]));
  }
  if (worst > 1e-3) failures.push_back("spectrum-correction identity");

  std::string detail = Fmt("masks 42x12 on 423x128; pitch +12 -> %.1f Hz, -12 -> %.1f Hz; correction max error %.1e",
                           up, down, worst);
  if (!failures.empty()) detail += "; failed: " + failures.front();
  return {failures.empty(), detail};
}

// 7 ------------------------------------------------------------------------
Outcome ScheduleEndpoints() {
  TrainConfig tc;
  const size_t steps = 7;
  CosineRestartSchedule s(tc, steps);
  const size_t cycle = static_cast<size_t>(tc.restart_period_epochs) * steps;
  double lr0 = s.lr(0), mid = s.lr(cycle / 2), end = CosineRestartSchedule::CycleLr(
                                                              static_cast<double>(cycle), static_cast<double>(cycle),
                                                              tc.lr_max, tc.lr_min);
  double mid2 = CosineRestartSchedule::CycleLr(0.5, 1.0, tc.lr_max, tc.lr_min);
  bool ok = lr0 == 0.1 && std::abs(mid - 0.050005) <= 1e-9 && std::abs(mid2 - 0.050005) <= 1e-9 &&
            std::abs(end - 1e-5) <= 1e-12;
  return {ok, Fmt("lr(0) = %.6g, lr(mid) = %.9g, lr(end) = %.6g", lr0, mid, end)};
}

// 8 ------------------------------------------------------------------------
Outcome ArchitectureConformance() {
  Model resnet = BuildResnet(ArchitectureConfig::Defaults(Family::kResnet));
  Model fcnn = BuildFcnn(ArchitectureConfig::Defaults(Family::kFcnn));
  Model fs = BuildFsFcnn(ArchitectureConfig::Defaults(Family::kFsFcnn));
  std::vector<std::pair<double, double>> slices;
  for (int id = 1; id < static_cast<int>(resnet.size()); ++id)
    if (resnet.layer(id)->kind() == LayerKind::kFreqSlice) {
      Hyper h = resnet.layer(id)->hyper();
      slices.emplace_back(h.at("begin"), h.at("end"));
    }
  bool split = slices == std::vector<std::pair<double, double>>{{0, 64}, {64, 128}};
  size_t r_down = FrequencyDownsamplings(resnet), f_down = FrequencyDownsamplings(fcnn),
         s_down = FrequencyDownsamplings(fs);
  size_t f_conv = BodyConvCount(fcnn), s_conv = BodyConvCount(fs);
  bool ok = split && r_down == 0 && f_conv == 9 && s_conv == 11 && s_down < f_down;
  return {ok, Fmt("resnet: %.0f freq downsamplings, branches ", r_down) + (split ? "[0,64)+[64,128)" : "wrong") +
                  Fmt("; fcnn: %.0f body convs, %.0f freq halvings; fsfcnn: %.0f body convs, %.0f freq halvings",
                      f_conv, f_down, s_conv, s_down)};
}

// 9 ------------------------------------------------------------------------
Outcome DeskScale() {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  SynthSpec spec;
  spec.clips_per_class = 50;
  spec.clip_seconds = 1.0;
  ClassHierarchy h = ClassHierarchy::Default();
  FeatureExtractor fx;
  const int n_train = static_cast<int>(std::lround(spec.clips_per_class * (1.0 - spec.test_fraction)));
  std::vector<LabeledTensor> fine_train, coarse_train;
  std::vector<FeatureTensor> test;
  std::vector<size_t> truth;
  for (int c = 0; c < 10; ++c)
    for (int k = 0; k < spec.clips_per_class; ++k)
      for (const auto &d : spec.devices) {
        FeatureTensor f = fx.Extract(RenderClip(spec, c, k, d));
        if (k < n_train) {
          LabeledTensor a{f, std::vector<double>(10, 0.0)}, b{f, std::vector<double>(3, 0.0)};
          a.label[c] = 1.0;
          b.label[h.parent[c]] = 1.0;
          fine_train.push_back(std::move(a));
          coarse_train.push_back(std::move(b));
        } else {
          test.push_back(std::move(f));
          truth.push_back(static_cast<size_t>(c));
        }
      }
  ArchitectureConfig arch = ArchitectureConfig::Defaults(Family::kFcnn);
  arch.base_channels = 8;
  arch.time_frames = 32;
  TrainConfig tc;
  tc.epochs = 12;
  tc.restart_period_epochs = 12;
  TrainedModel fine_model = Train(arch, fine_train, tc);
  std::vector<const FeatureTensor *> ptrs;
  for (const auto &f : test) ptrs.push_back(&f);
  std::vector<std::vector<double>> fine = PredictAll(fine_model, ptrs);
  size_t fine_ok = 0;
  for (size_t i = 0; i < test.size(); ++i) fine_ok += ArgmaxIndex(fine[i]) == truth[i];
  const double fine_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  const double fine_acc = 100.0 * static_cast<double>(fine_ok) / static_cast<double>(test.size());

  ArchitectureConfig coarse_arch = arch;
  coarse_arch.n_classes = 3;
  TrainConfig ctc = tc;
  // Mixup's label blending slows the 3-way head at this epoch budget.
  TrainOptions copts;
  copts.mixup = false;
  TrainedModel coarse_model = Train(coarse_arch, coarse_train, ctc, copts);
  std::vector<std::vector<double>> coarse = PredictAll(coarse_model, ptrs);
  size_t fused_ok = 0;
  for (size_t i = 0; i < test.size(); ++i) fused_ok += FuseRow(coarse[i], fine[i], h.parent) == truth[i];
  const double fused_acc = 100.0 * static_cast<double>(fused_ok) / static_cast<double>(test.size());

  bool ok = fine_acc >= 90.0 && fine_seconds <= 300.0 && fused_acc >= fine_acc - 1.0;
  return {ok, Fmt("fcnn held-out %.1f%% (>= 90) reached in %.0f s (<= 300); two-stage %.1f%% vs fine-only %.1f%% "
                  "(>= fine - 1.0)",
                  fine_acc, fine_seconds, fused_acc, fine_acc) +
                  Fmt("; %.0f train / %.0f test clips", static_cast<double>(fine_train.size()),
                      static_cast<double>(test.size()))};
}

// 10 -----------------------------------------------------------------------
Outcome CamChecks() {
  testing::ToyBurst toy;
  std::vector<LabeledTensor> train = toy.Data(8, 1), test = toy.Data(3, 2);
  ArchitectureConfig a = ArchitectureConfig::Defaults(Family::kResnet, 3);
  a.base_channels = 8;
  a.depth = 1;
  a.time_frames = train[0].features.time;
  a.mel_bins = toy.features.n_mels;
  TrainConfig tc;
  tc.epochs = 20;
  tc.restart_period_epochs = 20;
  tc.batch_size = 8;
  tc.lr_max = 0.05;
  TrainOptions opts;
  opts.random_crop = false;
  opts.mixup = false;
  TrainedModel m = Train(a, train, tc, opts);

  double gap_err = 0.0;
  bool linear = true;
  size_t in_burst = 0, burst_clips = 0;
  const int head = ClassifierNode(m.model);
  for (const auto &ex : test) {
    std::vector<const FeatureTensor *> one = {&ex.features};
    std::vector<Tensor> acts = m.model.InferAll(ToBatch(one));
    const Tensor &logits = acts[m.model.logits_node()];
    const Tensor &maps = acts[m.model.inputs(head)[0]];
    const Tensor &w = static_cast<const Conv2d *>(m.model.layer(head))->weight().value;
    const size_t k = maps.dim(1);
    for (size_t c = 0; c < 3; ++c) {
      CamMap cam = ComputeCam(m, ex.features, c);
      double mean = 0.0;
      for (double v : cam.raw) mean += v;
      mean /= static_cast<double>(cam.raw.size());
      gap_err = std::max(gap_err, std::abs(mean - logits[c]));
      // Linearity: the weighted map equals the weighted sum of one-hot maps.
      std::vector<double> weights(w.data() + c * k, w.data() + (c + 1) * k);
      std::vector<double> direct = WeightedMapSum(maps, weights, 0.0), sum(direct.size(), 0.0);
      for (size_t j = 0; j < k; ++j) {
        std::vector<double> onehot(k, 0.0);
        onehot[j] = 1.0;
        std::vector<double> part = WeightedMapSum(maps, onehot, 0.0);
        for (size_t i = 0; i < sum.size(); ++i) sum[i] += weights[j] * part[i];
      }
      linear = linear && direct == sum;
    }
    if (ex.label[toy.kBurstClass] == 1.0) {
      CamMap cam = ComputeCam(m, ex.features, toy.kBurstClass);
      std::vector<double> tm = TimeMarginal(cam);
      size_t peak = static_cast<size_t>(std::max_element(tm.begin(), tm.end()) - tm.begin());
      ++burst_clips;
      in_burst += toy.InBurst(peak);
    }
  }
  bool ok = gap_err <= 1e-9 && linear && burst_clips > 0 && in_burst == burst_clips;
  return {ok, Fmt("GAP consistency max error %.1e (<= 1e-9); linearity ", gap_err) + (linear ? "exact" : "broken") +
                  Fmt("; burst-class CAM peak inside 2-5 s for %.0f / %.0f clips", in_burst, burst_clips)};
}

struct Criterion {
  int id;
  const char *name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace ascene

int main() {
  using namespace ascene;
  const std::vector<Criterion> criteria = {
      {1, "feature shape", 1.0, FeatureShape},
      {2, "device-group aggregation", 1.0, TableAggregation},
      {3, "fusion oracle equivalence", 1.0, FusionOracle},
      {4, "fusion reductions", 1.0, FusionReductions},
      {5, "gradient checks", 30.0, GradientChecks},
      {6, "augmentation invariants", 60.0, AugmentationSuite},
      {7, "learning-rate schedule endpoints", 1.0, ScheduleEndpoints},
      {8, "architecture conformance", 1.0, ArchitectureConformance},
      {9, "desk-scale end-to-end", 600.0, DeskScale},
      {10, "class activation maps", 300.0, CamChecks},
  };
  int failed = 0;
  for (const auto &c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %2d %-34s %s  %s  [%.2f s, budget %.0f s%s]\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
