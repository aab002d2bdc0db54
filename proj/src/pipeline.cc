// src/pipeline.cc

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

#include "ascene/pipeline.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "ascene/audio_io.h"
#include "ascene/error.h"
#include "ascene/parallel.h"
#include "ascene/saliency.h"

namespace ascene {

namespace fs = std::filesystem;

namespace {

const char kDefaultConfig[] = R"(# ascene defaults
seed = 0

[paths]
root = ascene-work
corpus = corpus
features = features
models = models
scores = scores
reports = reports
cams = cams
hierarchy =

[synth]
clips_per_class = 5
clip_seconds = 10
test_fraction = 0.2
# id:gain_db:tilt_db_per_octave
devices = a:0:0,b:-4:-1.5,c:-2:1,s1:-6:-2.5,s2:2:1.5,s3:-3:-1,s4:-1:2.5,s5:-5:0.5,s6:1:-2

[features]
sample_rate = 44100
fft_size = 2048
window = 2048
hop = 1024
n_mels = 128

[augment]
enabled = mixup,random_crop
mixup_alpha = 0.4
crop_frames = 400
specaug_fraction = 0.1
pitch_semitones = -2,2
speed_range = 0.9,1.1
noise_sigma = 0.002,0.02
rt60 = 0.2,0.8
# threshold_db:ratio:attack_ms:release_ms
drc_presets = -20:4:5:50,-30:8:1:100
source_device = a

[model]
families = resnet,fcnn,fsfcnn
coarse_families = resnet,fcnn
resnet.base_channels = 24
fcnn.base_channels = 16
fsfcnn.base_channels = 16
depth = 2
dropout = 0.1

[train]
lr_max = 0.1
lr_min = 0.00001
restart_period_epochs = 10
period_multiplier = 2
momentum = 0.9
batch_size = 32
epochs = 60
exclude_devices = s4,s5,s6

[fuse]
coarse = ensemble-3
fine = ensemble-10
output = two-stage

[eval]
groups = A=a;B&C=b,c;s1-s3=s1,s2,s3;s4-s6=s4,s5,s6
systems =

[cam]
classes = 10
clips = 4
target =

[ablate]
family = resnet

[run]
workers = 0
)";

// Constants of the implementation that no config key controls.
const char kFixedSettings[] = R"(fixed.batch_norm_momentum=0.9
fixed.batch_norm_eps=1e-05
fixed.batch_norm_running_variance=unbiased
fixed.channel_attention_reduction=4
fixed.conv_init=he_uniform
fixed.weight_decay=0
fixed.stft_window=hann
fixed.stft_padding=fft_size/2 reflected samples at both ends
fixed.delta_width=2
fixed.feature_scaling=min-max per clip and channel
fixed.specaugment_mask=one time and one frequency stripe shared by the batch
fixed.predict_windows=ceil(T/w)+1 evenly spaced, probabilities averaged
fixed.ensemble=equal-weight mean of probabilities
fixed.fusion_ties=lowest class index
fixed.overall_accuracy=mean of per-device accuracies
fixed.cam_upsampling=bilinear
fixed.cam_colormap=r=128+127v g=b=128(1-v)
)";

std::ostream &Log(const RunContext &ctx) { return ctx.log ? *ctx.log : std::cout; }

std::pair<double, double> Range(const KeyValues &kv, const std::string &key) {
  std::vector<std::string> v = kv.GetList(key);
  if (v.size() != 2) throw ConfigError("config key '" + key + "' needs two comma-separated numbers");
  try {
    return {std::stod(v[0]), std::stod(v[1])};
  } catch (const std::exception &) {
    throw ConfigError("config key '" + key + "' needs two comma-separated numbers");
  }
}

double ParseNumber(const std::string &s, const std::string &key) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw ConfigError("config key '" + key + "': bad number '" + s + "'");
  }
}

std::vector<std::string> SplitColon(const std::string &s) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t p = s.find(':', start);
    out.push_back(s.substr(start, p == std::string::npos ? std::string::npos : p - start));
    if (p == std::string::npos) return out;
    start = p + 1;
  }
}

size_t PositiveSize(const KeyValues &kv, const std::string &key) {
  int64_t v = kv.GetInt(key);
  if (v <= 0) throw ConfigError("config key '" + key + "' must be positive");
  return static_cast<size_t>(v);
}

bool Contains(const std::vector<Strategy> &v, Strategy s) { return std::find(v.begin(), v.end(), s) != v.end(); }

std::string ModelName(Family f, size_t n_classes) {
  return std::string(FamilyName(f)) + "-" + std::to_string(n_classes);
}

void EnsureDir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

void WriteRunMeta(const RunContext &ctx, const std::string &command) {
  const RunConfig &cfg = ctx.config;
  fs::path dir = cfg.Dir("root") / "runs";
  EnsureDir(dir);
  KeyValues kv = cfg.values();
  kv.Merge(KeyValues::Parse(kFixedSettings));
  kv.Set("run.command", command);
  kv.Set("run.config_hash", cfg.Hash());
  kv.Set("run.force", ctx.force ? "true" : "false");
  kv.Save(dir / (command + ".meta"));
}

// --- corpus views ---------------------------------------------------------

fs::path ManifestPath(const RunConfig &cfg) { return cfg.Dir("corpus") / "manifest.csv"; }
fs::path AugmentedManifestPath(const RunConfig &cfg) { return cfg.Dir("corpus") / "augmented.csv"; }

fs::path FeaturePath(const RunConfig &cfg, const std::string &clip) {
  return cfg.Dir("features") / (clip + ".feat");
}

DatasetManifest LoadCorpus(const RunConfig &cfg) { return LoadManifest(ManifestPath(cfg).string()); }

// Training entries: recorded train clips from non-excluded devices plus
// generated clips of the enabled waveform strategies.
std::vector<ManifestEntry> TrainingEntries(const RunConfig &cfg, const DatasetManifest &corpus,
                                           const DatasetManifest &extra, const std::vector<Strategy> &enabled) {
  std::vector<std::string> excluded = cfg.values().GetList("train.exclude_devices");
  std::vector<ManifestEntry> out;
  for (const auto &e : corpus.Select(Split::kTrain)) {
    if (std::find(excluded.begin(), excluded.end(), e.device) != excluded.end()) continue;
    out.push_back(e);
  }
  for (const auto &e : extra.entries) {
    auto s = ParseStrategy(e.source_transform);
    if (s && Contains(enabled, *s)) out.push_back(e);
  }
  if (out.empty()) throw ConfigError("no training clips selected");
  return out;
}

DatasetManifest LoadExtra(const RunConfig &cfg, const std::vector<Strategy> &enabled) {
  bool needed = std::any_of(enabled.begin(), enabled.end(), GeneratesExtraData);
  if (!needed) return {};
  DatasetManifest extra = LoadManifest(AugmentedManifestPath(cfg).string());
  for (Strategy s : enabled) {
    if (!GeneratesExtraData(s)) continue;
    bool found = std::any_of(extra.entries.begin(), extra.entries.end(),
                             [&](const ManifestEntry &e) { return e.source_transform == StrategyName(s); });
    if (!found)
      throw MissingArtifactError(AugmentedManifestPath(cfg).string() + " has no clips for '" +
                                 std::string(StrategyName(s)) + "'; run augment");
  }
  return extra;
}

std::vector<FeatureTensor> LoadFeatures(const RunConfig &cfg, const std::vector<ManifestEntry> &entries) {
  std::vector<FeatureTensor> out(entries.size());
  ParallelFor(entries.size(), cfg.Workers(),
              [&](size_t i) { out[i] = ReadFeatureFile(FeaturePath(cfg, entries[i].path).string()); });
  return out;
}

void ExtractAll(const RunConfig &cfg, const std::vector<ManifestEntry> &entries) {
  FeatureExtractor fx(cfg.Features());
  const fs::path corpus = cfg.Dir("corpus");
  ParallelFor(entries.size(), cfg.Workers(), [&](size_t i) {
    AudioClip clip = ReadWav((corpus / entries[i].path).string());
    fs::path out = FeaturePath(cfg, entries[i].path);
    EnsureDir(out.parent_path());
    WriteFeatureFile(fx.Extract(clip), out.string());
  });
}

std::vector<LabeledTensor> Labeled(const std::vector<ManifestEntry> &entries, std::vector<FeatureTensor> features,
                                   const std::vector<std::string> &labels, const ClassHierarchy *h) {
  std::vector<LabeledTensor> out;
  for (size_t i = 0; i < entries.size(); ++i) {
    std::string scene = h ? h->Parent(entries[i].scene) : entries[i].scene;
    auto it = std::find(labels.begin(), labels.end(), scene);
    if (it == labels.end()) throw ConfigError("clip " + entries[i].path + " has unknown label '" + scene + "'");
    LabeledTensor ex{std::move(features[i]), std::vector<double>(labels.size(), 0.0)};
    ex.label[static_cast<size_t>(it - labels.begin())] = 1.0;
    out.push_back(std::move(ex));
  }
  return out;
}

TrainOptions OptionsFor(const RunConfig &cfg, const std::vector<Strategy> &enabled) {
  TrainOptions o;
  o.random_crop = Contains(enabled, Strategy::kRandomCrop);
  o.mixup = Contains(enabled, Strategy::kMixup);
  o.spec_augment = Contains(enabled, Strategy::kSpecAugment);
  o.augment = cfg.Augment();
  return o;
}

TrainedModel TrainOne(const RunContext &ctx, Family family, size_t n_classes, const std::vector<ManifestEntry> &entries,
                      const std::vector<Strategy> &enabled) {
  const RunConfig &cfg = ctx.config;
  ClassHierarchy h = cfg.Hierarchy();
  std::vector<LabeledTensor> data =
      Labeled(entries, LoadFeatures(cfg, entries), cfg.Labels(n_classes), n_classes == 10 ? nullptr : &h);
  TrainOptions opts = OptionsFor(cfg, enabled);
  const std::string name = ModelName(family, n_classes);
  opts.on_epoch = [&](size_t epoch, double loss) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  %s epoch %zu loss %.6f\n", name.c_str(), epoch + 1, loss);
    Log(ctx) << buf << std::flush;
  };
  Log(ctx) << "training " << name << " on " << data.size() << " clips\n";
  return Train(cfg.Arch(family, n_classes), data, cfg.Train(), opts);
}

ScoreTable Score(const RunConfig &cfg, const TrainedModel &model, const std::vector<ManifestEntry> &entries,
                 const std::vector<FeatureTensor> &features) {
  std::vector<const FeatureTensor *> ptrs;
  for (const auto &f : features) ptrs.push_back(&f);
  ScoreTable t;
  t.labels = cfg.Labels(model.arch.n_classes);
  for (const auto &e : entries) t.clip_ids.push_back(e.path);
  t.rows = PredictAll(model, ptrs, static_cast<int>(cfg.Workers()));
  return t;
}

std::map<std::string, std::string> Predictions(const ScoreTable &t) {
  std::map<std::string, std::string> out;
  std::vector<std::string> labels = t.Argmax();
  for (size_t i = 0; i < labels.size(); ++i) out[t.clip_ids[i]] = labels[i];
  return out;
}

std::string FormatPct(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

std::string SummaryTable(const std::vector<std::pair<std::string, DeviceGroupReport>> &rows) {
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-24s", "System");
  out += buf;
  if (!rows.empty())
    for (const auto &g : rows[0].second.group_names) {
      std::snprintf(buf, sizeof(buf), " %8s", g.c_str());
      out += buf;
    }
  std::snprintf(buf, sizeof(buf), " %8s\n", "Avg.");
  out += buf;
  for (const auto &[name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-24s", name.c_str());
    out += buf;
    for (double a : r.group_accuracy) {
      std::snprintf(buf, sizeof(buf), " %8s", FormatPct(a).c_str());
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), " %8s\n", FormatPct(r.overall).c_str());
    out += buf;
  }
  return out;
}

void WriteText(const fs::path &path, const std::string &text) {
  EnsureDir(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string SafeName(const std::string &clip) {
  std::string s = clip;
  for (char &c : s)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  if (s.size() > 4 && s.ends_with(".wav")) s.resize(s.size() - 4);
  return s;
}

}  // namespace

// --- RunConfig ------------------------------------------------------------

KeyValues RunConfig::Defaults() { return KeyValues::Parse(kDefaultConfig); }

RunConfig RunConfig::Resolve(const std::optional<fs::path> &file, const std::vector<std::string> &overrides,
                             std::optional<uint64_t> seed) {
  KeyValues kv = Defaults();
  KeyValues user;
  if (file) user = KeyValues::Load(*file);
  if (seed) user.Set("seed", std::to_string(*seed));
  for (const auto &o : overrides) user.Assign(o);
  for (const auto &[k, v] : user.entries())
    if (!kv.Has(k)) throw ConfigError("unknown config key '" + k + "'");
  kv.Merge(user);
  return FromKeyValues(kv);
}

RunConfig RunConfig::FromKeyValues(const KeyValues &kv) {
  RunConfig c;
  c.kv_ = kv;
  const KeyValues defaults = Defaults();
  for (const auto &[k, v] : kv.entries())
    if (!defaults.Has(k)) throw ConfigError("unknown config key '" + k + "'");
  // Touch every typed view so a bad value fails before any work starts.
  c.Synth().Validate();
  FeatureConfig fc = c.Features();
  if (fc.sample_rate != c.Synth().sample_rate) throw ConfigError("config key 'features.sample_rate' must match the corpus rate");
  c.Augment().Validate(c.Augment().crop_frames);
  c.Train().Validate();
  for (size_t n : {size_t{10}, size_t{3}})
    for (Family f : c.Families(n)) c.Arch(f, n).Validate();
  c.Enabled();
  c.Groups();
  c.Hierarchy();
  c.Workers();
  if (!ParseFamily(kv.Get("ablate.family"))) throw ConfigError("config key 'ablate.family': unknown family");
  int64_t cam_classes = kv.GetInt("cam.classes");
  if (cam_classes != 3 && cam_classes != 10) throw ConfigError("config key 'cam.classes' must be 3 or 10");
  return c;
}

std::string RunConfig::Hash() const {
  std::string text;
  for (const auto &[k, v] : kv_.entries()) {
    if (k.starts_with("paths.") || k.starts_with("run.")) continue;
    text += k + "=" + v + "\n";
  }
  return HexHash(Fnv1a64(text));
}

fs::path RunConfig::Dir(const std::string &name) const {
  fs::path root = kv_.Get("paths.root");
  if (name == "root") return root;
  fs::path p = kv_.Get("paths." + name);
  return p.is_absolute() ? p : root / p;
}

SynthSpec RunConfig::Synth() const {
  SynthSpec s;
  s.clips_per_class = static_cast<int>(PositiveSize(kv_, "synth.clips_per_class"));
  s.clip_seconds = kv_.GetDouble("synth.clip_seconds");
  s.sample_rate = static_cast<int>(PositiveSize(kv_, "features.sample_rate"));
  s.seed = static_cast<uint64_t>(kv_.GetInt("seed"));
  s.test_fraction = kv_.GetDouble("synth.test_fraction");
  s.devices.clear();
  for (const auto &item : kv_.GetList("synth.devices")) {
    std::vector<std::string> f = SplitColon(item);
    if (f.size() != 3 || f[0].empty()) throw ConfigError("config key 'synth.devices': expected id:gain_db:tilt, got '" + item + "'");
    s.devices.push_back({f[0], ParseNumber(f[1], "synth.devices"), ParseNumber(f[2], "synth.devices")});
  }
  if (s.devices.empty()) throw ConfigError("config key 'synth.devices' is empty");
  return s;
}

FeatureConfig RunConfig::Features() const {
  FeatureConfig f;
  f.sample_rate = static_cast<int>(PositiveSize(kv_, "features.sample_rate"));
  f.fft_size = PositiveSize(kv_, "features.fft_size");
  f.window = PositiveSize(kv_, "features.window");
  f.hop = PositiveSize(kv_, "features.hop");
  f.n_mels = PositiveSize(kv_, "features.n_mels");
  if (f.window > f.fft_size) throw ConfigError("config key 'features.window' exceeds features.fft_size");
  return f;
}

AugmentConfig RunConfig::Augment() const {
  AugmentConfig a;
  a.mixup_alpha = kv_.GetDouble("augment.mixup_alpha");
  a.crop_frames = PositiveSize(kv_, "augment.crop_frames");
  a.specaug_fraction = kv_.GetDouble("augment.specaug_fraction");
  a.pitch_semitones_range = Range(kv_, "augment.pitch_semitones");
  a.speed_range = Range(kv_, "augment.speed_range");
  a.noise_sigma_range = Range(kv_, "augment.noise_sigma");
  a.rt60_range = Range(kv_, "augment.rt60");
  a.drc_presets.clear();
  for (const auto &item : kv_.GetList("augment.drc_presets")) {
    std::vector<std::string> f = SplitColon(item);
    if (f.size() != 4) throw ConfigError("config key 'augment.drc_presets': expected thr:ratio:attack:release");
    a.drc_presets.push_back({ParseNumber(f[0], "augment.drc_presets"), ParseNumber(f[1], "augment.drc_presets"),
                             ParseNumber(f[2], "augment.drc_presets"), ParseNumber(f[3], "augment.drc_presets")});
  }
  a.source_device = kv_.Get("augment.source_device");
  a.seed = static_cast<uint64_t>(kv_.GetInt("seed"));
  return a;
}

std::vector<Strategy> RunConfig::Enabled() const {
  std::vector<Strategy> out;
  for (const auto &name : kv_.GetList("augment.enabled")) {
    auto s = ParseStrategy(name);
    if (!s) throw ConfigError("config key 'augment.enabled': unknown strategy '" + name + "'");
    if (!Contains(out, *s)) out.push_back(*s);
  }
  return out;
}

ArchitectureConfig RunConfig::Arch(Family family, size_t n_classes) const {
  ArchitectureConfig a = ArchitectureConfig::Defaults(family, n_classes);
  a.base_channels = PositiveSize(kv_, "model." + std::string(FamilyName(family)) + ".base_channels");
  a.depth = PositiveSize(kv_, "model.depth");
  a.dropout_rate = kv_.GetDouble("model.dropout");
  a.time_frames = PositiveSize(kv_, "augment.crop_frames");
  a.mel_bins = PositiveSize(kv_, "features.n_mels");
  return a;
}

TrainConfig RunConfig::Train() const {
  TrainConfig t;
  t.lr_max = kv_.GetDouble("train.lr_max");
  t.lr_min = kv_.GetDouble("train.lr_min");
  t.restart_period_epochs = kv_.GetDouble("train.restart_period_epochs");
  t.period_multiplier = kv_.GetDouble("train.period_multiplier");
  t.momentum = kv_.GetDouble("train.momentum");
  t.batch_size = PositiveSize(kv_, "train.batch_size");
  int64_t epochs = kv_.GetInt("train.epochs");
  if (epochs < 0) throw ConfigError("config key 'train.epochs' must be >= 0");
  t.epochs = static_cast<size_t>(epochs);
  t.seed = static_cast<uint64_t>(kv_.GetInt("seed"));
  return t;
}

std::vector<Family> RunConfig::Families(size_t n_classes) const {
  const std::string key = n_classes == 10 ? "model.families" : "model.coarse_families";
  std::vector<Family> out;
  for (const auto &name : kv_.GetList(key)) {
    auto f = ParseFamily(name);
    if (!f) throw ConfigError("config key '" + key + "': unknown family '" + name + "'");
    out.push_back(*f);
  }
  return out;
}

std::vector<DeviceGroup> RunConfig::Groups() const {
  try {
    return ParseDeviceGroups(kv_.Get("eval.groups"));
  } catch (const ConfigError &e) {
    throw ConfigError("config key 'eval.groups': " + std::string(e.what()));
  }
}

ClassHierarchy RunConfig::Hierarchy() const {
  const std::string file = kv_.Get("paths.hierarchy");
  ClassHierarchy h = file.empty() ? ClassHierarchy::Default() : ClassHierarchy::Load(file);
  std::set<std::string> fine(h.fine.begin(), h.fine.end()), scenes;
  for (std::string_view l : kSceneLabels) scenes.emplace(l);
  if (fine != scenes) throw ConfigError("hierarchy fine classes must be exactly the 10 scene labels");
  if (h.coarse.size() != 3) throw ConfigError("hierarchy must have 3 coarse classes");
  return h;
}

std::vector<std::string> RunConfig::Labels(size_t n_classes) const {
  if (n_classes == 3) return Hierarchy().coarse;
  std::vector<std::string> out;
  for (std::string_view l : kSceneLabels) out.emplace_back(l);
  return out;
}

size_t RunConfig::Workers() const {
  int64_t w = kv_.GetInt("run.workers");
  if (w < 0) throw ConfigError("config key 'run.workers' must be >= 0");
  return w == 0 ? DefaultWorkerCount() : static_cast<size_t>(w);
}

std::vector<AblationStep> AblationSteps() {
  using S = Strategy;
  std::vector<AblationStep> steps = {{"baseline-aug", {S::kMixup, S::kRandomCrop}}};
  auto next = [&](const std::string &name, std::vector<S> add) {
    AblationStep s = steps.back();
    s.name = name;
    s.enabled.insert(s.enabled.end(), add.begin(), add.end());
    steps.push_back(s);
  };
  next("+specaugment", {S::kSpecAugment});
  next("+spectrum-correction", {S::kSpectrumCorrection});
  next("+reverb-drc", {S::kReverbDrc});
  next("+remaining-four", {S::kPitchShift, S::kSpeedChange, S::kRandomNoise, S::kMixAudio});
  return steps;
}

// --- sidecars -------------------------------------------------------------

fs::path MetaPath(const fs::path &artifact) { return fs::path(artifact.string() + ".meta"); }

void WriteMeta(const fs::path &artifact, const RunConfig &cfg, const std::string &command) {
  KeyValues kv;
  kv.Set("artifact", artifact.filename().string());
  kv.Set("command", command);
  kv.Set("config_hash", cfg.Hash());
  kv.Save(MetaPath(artifact));
}

void CheckMeta(const fs::path &artifact, const RunConfig &cfg, bool force) {
  if (force) return;
  fs::path meta = MetaPath(artifact);
  if (!fs::exists(meta)) throw MissingArtifactError(meta.string() + " (pass --force to skip the config check)");
  std::string hash = KeyValues::Load(meta).Get("config_hash", "");
  if (hash != cfg.Hash())
    throw ConfigError(artifact.string() + " was produced with config hash " + hash + " but the current config hashes to " +
                      cfg.Hash() + "; rerun upstream or pass --force");
}

// --- commands ---------------------------------------------------------------

void SynthDataCommand(const RunContext &ctx) {
  const RunConfig &cfg = ctx.config;
  DatasetManifest m = SynthDataset(cfg.Synth(), cfg.Dir("corpus").string(), cfg.Workers());
  SaveManifest(m, ManifestPath(cfg).string());
  WriteMeta(ManifestPath(cfg), cfg, "synth-data");
  Log(ctx) << "wrote " << m.entries.size() << " clips and " << ManifestPath(cfg).string() << "\n";
  WriteRunMeta(ctx, "synth-data");
}

void AugmentCommand(const RunContext &ctx) {
  const RunConfig &cfg = ctx.config;
  DatasetManifest corpus = LoadCorpus(cfg);
  std::vector<Strategy> wave;
  for (Strategy s : cfg.Enabled())
    if (GeneratesExtraData(s)) wave.push_back(s);
  DatasetManifest extra = GenerateExtraData(corpus, cfg.Dir("corpus").string(), wave, cfg.Augment(), cfg.Workers());
  SaveManifest(extra, AugmentedManifestPath(cfg).string());
  WriteMeta(AugmentedManifestPath(cfg), cfg, "augment");
  Log(ctx) << "generated " << extra.entries.size() << " clips with " << wave.size() << " waveform strategies\n";
  WriteRunMeta(ctx, "augment");
}

void FeaturesCommand(const RunContext &ctx) {
  const RunConfig &cfg = ctx.config;
  std::vector<ManifestEntry> entries = LoadCorpus(cfg).entries;
  if (fs::exists(AugmentedManifestPath(cfg))) {
    DatasetManifest extra = LoadManifest(AugmentedManifestPath(cfg).string());
    entries.insert(entries.end(), extra.entries.begin(), extra.entries.end());
  }
  ExtractAll(cfg, entries);
  fs::path index = cfg.Dir("features") / "index.csv";
  DatasetManifest listed;
  listed.entries = entries;
  SaveManifest(listed, index.string());
  WriteMeta(index, cfg, "features");
  Log(ctx) << "extracted features for " << entries.size() << " clips\n";
  WriteRunMeta(ctx, "features");
}

void TrainCommand(const RunContext &ctx) {
  const RunConfig &cfg = ctx.config;
  DatasetManifest corpus = LoadCorpus(cfg);
  std::vector<Strategy> enabled = cfg.Enabled();
  std::vector<ManifestEntry> entries = TrainingEntries(cfg, corpus, LoadExtra(cfg, enabled), enabled);
  EnsureDir(cfg.Dir("models"));
  for (size_t n : {size_t{10}, size_t{3}}) {
    for (Family f : cfg.Families(n)) {
      TrainedModel m = TrainOne(ctx, f, n, entries, enabled);
      fs::path out = cfg.Dir("models") / (ModelName(f, n) + ".ckpt");
      SaveTrainedModel(out, m);
      WriteMeta(out, cfg, "train");
      Log(ctx) << "saved " << out.string() << "\n";
    }
  }
  WriteRunMeta(ctx, "train");
}

void PredictCommand(const RunContext &ctx) {
  const RunConfig &cfg = ctx.config;
  std::vector<ManifestEntry> test = LoadCorpus(cfg).Select(Split::kTest);
  if (test.empty()) throw ConfigError("the corpus has no test clips");
  std::vector<FeatureTensor> features = LoadFeatures(cfg, test);
  EnsureDir(cfg.Dir("scores"));
  for (size_t n : {size_t{10}, size_t{3}}) {
    std::vector<ScoreTable> tables;
    for (Family f : cfg.Families(n)) {
      fs::path ckpt = cfg.Dir("models") / (ModelName(f, n) + ".ckpt");
      CheckMeta(ckpt, cfg, ctx.force);
      ScoreTable t = Score(cfg, LoadTrainedModel(ckpt), test, features);
      fs::path out = cfg.Dir("scores") / (ModelName(f, n) + ".csv");
      t.Save(out);
      WriteMeta(out, cfg, "predict");
      tables.push_back(std::move(t));
    }
    if (tables.empty()) continue;
    fs::path out = cfg.Dir("scores") / ("ensemble-" + std::to_string(n) + ".csv");
    Ensemble(tables).Save(out);
    WriteMeta(out, cfg, "predict");
  }
  Log(ctx) << "scored " << test.size() << " test clips\n";
  WriteRunMeta(ctx, "predict");
}

void FuseCommand(const RunContext &ctx) {
  const RunConfig &cfg = ctx.config;
  const KeyValues &kv = cfg.values();
  fs::path coarse_path = cfg.Dir("scores") / (kv.Get("fuse.coarse") + ".csv");
  fs::path fine_path = cfg.Dir("scores") / (kv.Get("fuse.fine") + ".csv");
  CheckMeta(coarse_path, cfg, ctx.force);
  CheckMeta(fine_path, cfg, ctx.force);
  FusionResult r = FuseTwoStage(ScoreTable::Load(coarse_path), ScoreTable::Load(fine_path), cfg.Hierarchy());
  fs::path out = cfg.Dir("scores") / (kv.Get("fuse.output") + ".csv");
  r.fused.Save(out);
  WriteMeta(out, cfg, "fuse");
  std::string text = "clip_id,label\n";
  for (size_t i = 0; i < r.predictions.size(); ++i) text += r.fused.clip_ids[i] + "," + r.predictions[i] + "\n";
  fs::path pred = cfg.Dir("scores") / (kv.Get("fuse.output") + ".predictions.csv");
  WriteText(pred, text);
  WriteMeta(pred, cfg, "fuse");
  Log(ctx) << "fused " << r.predictions.size() << " clips into " << out.string() << "\n";
  WriteRunMeta(ctx, "fuse");
}

void EvaluateCommand(const RunContext &ctx) {
  const RunConfig &cfg = ctx.config;
  const KeyValues &kv = cfg.values();
  std::vector<std::string> systems = kv.GetList("eval.systems");
  if (systems.empty()) {
    for (Family f : cfg.Families(10)) systems.push_back(ModelName(f, 10));
    if (!systems.empty()) systems.push_back("ensemble-10");
    if (!cfg.Families(3).empty() && !systems.empty()) systems.push_back(kv.Get("fuse.output"));
  }
  if (systems.empty()) throw ConfigError("nothing to evaluate: set eval.systems");
  DatasetManifest corpus = LoadCorpus(cfg);
  std::vector<std::pair<std::string, DeviceGroupReport>> rows;
  for (const auto &system : systems) {
    fs::path scores = cfg.Dir("scores") / (system + ".csv");
    CheckMeta(scores, cfg, ctx.force);
    ScoreTable t = ScoreTable::Load(scores);
    DeviceGroupReport r = DeviceReport(Predictions(t), corpus, cfg.Groups(), t.labels);
    fs::path out = cfg.Dir("reports") / (system + ".txt");
    WriteText(out, r.ToText(system) + "config_hash=" + cfg.Hash() + "\n");
    WriteMeta(out, cfg, "evaluate");
    rows.emplace_back(system, std::move(r));
  }
  std::string summary = SummaryTable(rows);
  fs::path out = cfg.Dir("reports") / "summary.txt";
  WriteText(out, summary);
  WriteMeta(out, cfg, "evaluate");
  Log(ctx) << summary;
  WriteRunMeta(ctx, "evaluate");
}

void CamCommand(const RunContext &ctx) {
  const RunConfig &cfg = ctx.config;
  const KeyValues &kv = cfg.values();
  const size_t n = static_cast<size_t>(kv.GetInt("cam.classes"));
  fs::path ckpt = cfg.Dir("models") / (ModelName(Family::kResnet, n) + ".ckpt");
  CheckMeta(ckpt, cfg, ctx.force);
  TrainedModel model = LoadTrainedModel(ckpt);
  std::vector<std::string> labels = cfg.Labels(n);
  ClassHierarchy h = cfg.Hierarchy();
  std::vector<ManifestEntry> all = LoadCorpus(cfg).Select(Split::kTest);
  const size_t count = std::min(all.size(), PositiveSize(kv, "cam.clips"));
  // Evenly spaced over the test list, which is grouped by scene.
  std::vector<ManifestEntry> test;
  for (size_t i = 0; i < count; ++i) test.push_back(all[i * all.size() / count]);
  std::vector<FeatureTensor> features = LoadFeatures(cfg, test);
  const std::string fixed_target = kv.Get("cam.target");
  EnsureDir(cfg.Dir("cams"));
  for (size_t i = 0; i < count; ++i) {
    std::string target = fixed_target.empty() ? (n == 10 ? test[i].scene : h.Parent(test[i].scene)) : fixed_target;
    auto it = std::find(labels.begin(), labels.end(), target);
    if (it == labels.end()) throw ConfigError("config key 'cam.target': unknown class '" + target + "'");
    CamMap cam = ComputeCam(model, features[i], static_cast<size_t>(it - labels.begin()), test[i].path);
    fs::path stem = cfg.Dir("cams") / (SafeName(test[i].path) + "-" + target);
    ExportHeatmap(cam, stem);
    WriteMeta(stem.string() + ".ppm", cfg, "cam");
    WriteMeta(stem.string() + ".csv", cfg, "cam");
    Log(ctx) << "wrote " << stem.string() << ".ppm/.csv\n";
  }
  WriteRunMeta(ctx, "cam");
}

void AblateCommand(const RunContext &ctx) {
  const RunConfig &cfg = ctx.config;
  const Family family = *ParseFamily(cfg.values().Get("ablate.family"));
  DatasetManifest corpus = LoadCorpus(cfg);
  std::vector<ManifestEntry> test = corpus.Select(Split::kTest);
  if (test.empty()) throw ConfigError("the corpus has no test clips");
  std::vector<FeatureTensor> test_features = LoadFeatures(cfg, test);

  DatasetManifest extra;
  std::vector<Strategy> generated;
  std::vector<std::pair<std::string, DeviceGroupReport>> rows;
  const fs::path dir = cfg.Dir("reports") / "ablation";
  EnsureDir(dir);
  std::vector<AblationStep> steps = AblationSteps();
  for (size_t k = 0; k < steps.size(); ++k) {
    const AblationStep &step = steps[k];
    std::vector<Strategy> fresh;
    for (Strategy s : step.enabled)
      if (GeneratesExtraData(s) && !Contains(generated, s)) fresh.push_back(s);
    if (!fresh.empty()) {
      DatasetManifest more = GenerateExtraData(corpus, cfg.Dir("corpus").string(), fresh, cfg.Augment(), cfg.Workers());
      ExtractAll(cfg, more.entries);
      extra.entries.insert(extra.entries.end(), more.entries.begin(), more.entries.end());
      generated.insert(generated.end(), fresh.begin(), fresh.end());
    }
    Log(ctx) << "ablation step " << k + 1 << ": " << step.name << "\n";
    TrainedModel m = TrainOne(ctx, family, 10, TrainingEntries(cfg, corpus, extra, step.enabled), step.enabled);
    ScoreTable t = Score(cfg, m, test, test_features);
    DeviceGroupReport r = DeviceReport(Predictions(t), corpus, cfg.Groups(), t.labels);
    std::string name = step.name;
    if (name[0] == '+') name = name.substr(1);
    fs::path out = dir / (std::to_string(k + 1) + "-" + name + ".txt");
    std::string enabled;
    for (Strategy s : step.enabled) enabled += (enabled.empty() ? "" : ",") + std::string(StrategyName(s));
    WriteText(out, r.ToText(step.name) + "enabled=" + enabled + "\nconfig_hash=" + cfg.Hash() + "\n");
    rows.emplace_back(step.name, std::move(r));
  }
  Log(ctx) << SummaryTable(rows);
  WriteRunMeta(ctx, "ablate");
}

void RunCommand(const std::string &command, const RunContext &ctx) {
  if (command == "synth-data") return SynthDataCommand(ctx);
  if (command == "features") return FeaturesCommand(ctx);
  if (command == "augment") return AugmentCommand(ctx);
  if (command == "train") return TrainCommand(ctx);
  if (command == "predict") return PredictCommand(ctx);
  if (command == "fuse") return FuseCommand(ctx);
  if (command == "evaluate") return EvaluateCommand(ctx);
  if (command == "cam") return CamCommand(ctx);
  if (command == "ablate") return AblateCommand(ctx);
  throw ConfigError("unknown command '" + command + "'");
}

int ExitCodeFor(const std::exception &e) {
  if (dynamic_cast<const MissingArtifactError *>(&e)) return 3;
  if (dynamic_cast<const NumericalError *>(&e)) return 4;
  if (dynamic_cast<const ConfigError *>(&e) || dynamic_cast<const ShapeError *>(&e)) return 2;
  return 1;
}

}  // namespace ascene
