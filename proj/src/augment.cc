// augment.cc

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

#include "ascene/augment.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <map>
#include <numbers>
#include <numeric>

#include "ascene/fft.h"
#include "ascene/parallel.h"

namespace ascene {

namespace {

constexpr std::string_view kStrategyNames[] = {
    "mixup",        "random_crop",  "spec_augment", "spectrum_correction", "reverb_drc",
    "pitch_shift",  "speed_change", "random_noise", "mix_audio"};

constexpr double kCorrectionEps = 1e-8;

AudioClip WithSamples(const AudioClip &like, std::vector<double> samples) {
  AudioClip out;
  out.samples = std::move(samples);
  out.sample_rate = like.sample_rate;
  out.scene = like.scene;
  out.device = like.device;
  return out;
}

void RescalePeak(std::vector<double> &y, double target_peak) {
  double peak = PeakAbs(y);
  if (peak <= 0.0) return;
  double g = target_peak / peak;
  for (auto &v : y) v *= g;
}

// Kaiser-windowed sinc kernel tabulated on a fine grid; evaluated with linear
// interpolation.
class SincTable {
 public:
  static constexpr int kZeros = 16;
  static constexpr int kResolution = 512;
  static constexpr double kBeta = 8.6;

  SincTable() : table_(kZeros * kResolution + 2) {
    const double i0b = std::cyl_bessel_i(0.0, kBeta);
    for (size_t i = 0; i < table_.size(); ++i) {
      double t = static_cast<double>(i) / kResolution;  // in zero crossings
      double r = t / kZeros;
      double w = r < 1.0 ? std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / i0b : 0.0;
      double s = t == 0.0 ? 1.0 : std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
      table_[i] = s * w;
    }
  }

  // Kernel value at distance t, measured in zero crossings.
  double operator()(double t) const {
    t = std::abs(t) * kResolution;
    size_t i = static_cast<size_t>(t);
    if (i + 1 >= table_.size()) return 0.0;
    double f = t - i;
    return table_[i] + f * (table_[i + 1] - table_[i]);
  }

 private:
  std::vector<double> table_;
};

const SincTable &Sinc() {
  static const SincTable table;
  return table;
}

}  // namespace

std::string_view StrategyName(Strategy s) { return kStrategyNames[static_cast<int>(s)]; }

std::optional<Strategy> ParseStrategy(std::string_view name) {
  for (Strategy s : kAllStrategies)
    if (StrategyName(s) == name) return s;
  return std::nullopt;
}

bool GeneratesExtraData(Strategy s) {
  return s != Strategy::kMixup && s != Strategy::kRandomCrop && s != Strategy::kSpecAugment;
}

void AugmentConfig::Validate(size_t time_frames) const {
  if (!(mixup_alpha > 0.0)) throw ConfigError("augment: mixup_alpha must be > 0");
  if (!(specaug_fraction > 0.0 && specaug_fraction < 1.0))
    throw ConfigError("augment: specaug_fraction must be in (0, 1)");
  if (crop_frames == 0) throw ConfigError("augment: crop_frames must be >= 1");
  if (time_frames > 0 && crop_frames > time_frames)
    throw ConfigError("augment: crop_frames " + std::to_string(crop_frames) + " exceeds " +
                      std::to_string(time_frames) + " frames");
  if (!(speed_range.first > 0.0) || speed_range.second < speed_range.first)
    throw ConfigError("augment: speed_range must be positive and ordered");
  if (pitch_semitones_range.second < pitch_semitones_range.first ||
      std::abs(pitch_semitones_range.first) > 12 || std::abs(pitch_semitones_range.second) > 12)
    throw ConfigError("augment: pitch range must be ordered and within 12 semitones");
  if (noise_sigma_range.first < 0.0 || noise_sigma_range.second < noise_sigma_range.first)
    throw ConfigError("augment: noise_sigma_range must be non-negative and ordered");
  if (drc_presets.empty()) throw ConfigError("augment: at least one DRC preset is required");
  for (const auto &p : drc_presets)
    if (!(p.ratio >= 1.0) || !(p.attack_ms > 0.0) || !(p.release_ms > 0.0))
      throw ConfigError("augment: DRC ratio must be >= 1 and time constants > 0");
  if (!(rt60_range.first > 0.0) || rt60_range.second < rt60_range.first)
    throw ConfigError("augment: rt60_range must be positive and ordered");
}

std::vector<LabeledTensor> MixupWith(const std::vector<LabeledTensor> &batch, double lambda,
                                     const std::vector<size_t> &partner) {
  if (batch.empty()) throw ShapeError("mixup: empty batch");
  if (partner.size() != batch.size()) throw ShapeError("mixup: partner list size mismatch");
  for (const auto &item : batch)
    if (!item.features.SameShape(batch[0].features) || item.label.size() != batch[0].label.size())
      throw ShapeError("mixup: all tensors and labels in a batch must share a shape");
  std::vector<LabeledTensor> out(batch.size());
  const double mu = 1.0 - lambda;
  for (size_t i = 0; i < batch.size(); ++i) {
    const LabeledTensor &a = batch[i];
    const LabeledTensor &b = batch[partner[i]];
    out[i].features = a.features;
    for (size_t j = 0; j < a.features.values.size(); ++j)
      out[i].features.values[j] = lambda * a.features.values[j] + mu * b.features.values[j];
    out[i].label.resize(a.label.size());
    for (size_t j = 0; j < a.label.size(); ++j)
      out[i].label[j] = lambda * a.label[j] + mu * b.label[j];
  }
  return out;
}

std::vector<LabeledTensor> Mixup(const std::vector<LabeledTensor> &batch, double alpha, Rng &rng) {
  if (batch.empty()) throw ShapeError("mixup: empty batch");
  double lambda = rng.Beta(alpha, alpha);
  std::vector<size_t> partner(batch.size());
  std::iota(partner.begin(), partner.end(), size_t{0});
  std::shuffle(partner.begin(), partner.end(), rng);
  return MixupWith(batch, lambda, partner);
}

FeatureTensor CropAt(const FeatureTensor &tensor, size_t offset, size_t frames) {
  if (frames == 0 || offset + frames > tensor.time)
    throw ShapeError("crop of " + std::to_string(frames) + " frames at " + std::to_string(offset) +
                     " does not fit " + std::to_string(tensor.time) + " frames");
  FeatureTensor out(frames, tensor.mel, tensor.channels);
  const size_t row = tensor.mel * tensor.channels;
  std::copy(tensor.values.begin() + offset * row, tensor.values.begin() + (offset + frames) * row,
            out.values.begin());
  return out;
}

FeatureTensor RandomCrop(const FeatureTensor &tensor, size_t crop_frames, Rng &rng) {
  if (crop_frames > tensor.time)
    throw ShapeError("random_crop: crop of " + std::to_string(crop_frames) +
                     " frames is longer than the input (" + std::to_string(tensor.time) + ")");
  size_t offset = rng.Index(tensor.time - crop_frames + 1);
  return CropAt(tensor, offset, crop_frames);
}

SpecAugmentMask DrawSpecAugmentMask(size_t time, size_t mel, double fraction, Rng &rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("spec_augment: fraction must be in (0, 1)");
  SpecAugmentMask m;
  m.time_width = static_cast<size_t>(std::floor(fraction * time));
  m.freq_width = static_cast<size_t>(std::floor(fraction * mel));
  m.time_start = rng.Index(time - m.time_width + 1);
  m.freq_start = rng.Index(mel - m.freq_width + 1);
  return m;
}

void ApplySpecAugmentMask(FeatureTensor &tensor, const SpecAugmentMask &mask) {
  for (size_t t = 0; t < tensor.time; ++t) {
    bool time_masked = t >= mask.time_start && t < mask.time_start + mask.time_width;
    for (size_t m = 0; m < tensor.mel; ++m) {
      bool freq_masked = m >= mask.freq_start && m < mask.freq_start + mask.freq_width;
      if (!time_masked && !freq_masked) continue;
      for (size_t c = 0; c < tensor.channels; ++c) tensor.at(t, m, c) = 0.0;
    }
  }
}

FeatureTensor SpecAugment(const FeatureTensor &tensor, double fraction, Rng &rng) {
  FeatureTensor out = tensor;
  ApplySpecAugmentMask(out, DrawSpecAugmentMask(tensor.time, tensor.mel, fraction, rng));
  return out;
}

std::vector<double> TimeAveragedSpectrum(const AudioClip &clip) {
  ComplexSpectrogram s = StftComplex(clip.samples, kCorrectionFft, kCorrectionFft, kCorrectionHop);
  std::vector<double> mean(s.bins, 0.0);
  for (size_t f = 0; f < s.frames; ++f)
    for (size_t b = 0; b < s.bins; ++b) mean[b] += std::abs(s.at(f, b));
  for (auto &v : mean) v /= static_cast<double>(s.frames);
  return mean;
}

std::pair<ReferenceSpectrum, ReferenceSpectrum> BuildReferenceSpectrum(
    const std::vector<AudioClip> &clips, const std::string &source_device) {
  const size_t bins = kCorrectionFft / 2 + 1;
  ReferenceSpectrum ref{std::vector<double>(bins, 0.0)}, src{std::vector<double>(bins, 0.0)};
  size_t n_ref = 0, n_src = 0;
  for (const auto &clip : clips) {
    std::vector<double> s = TimeAveragedSpectrum(clip);
    bool is_src = clip.device.value_or("") == source_device;
    auto &target = is_src ? src.values : ref.values;
    for (size_t b = 0; b < bins; ++b) target[b] += s[b];
    (is_src ? n_src : n_ref)++;
  }
  if (n_ref == 0) throw ConfigError("reference spectrum: no clips from devices other than '" + source_device + "'");
  if (n_src == 0) throw ConfigError("reference spectrum: no clips from device '" + source_device + "'");
  for (auto &v : ref.values) v /= static_cast<double>(n_ref);
  for (auto &v : src.values) v /= static_cast<double>(n_src);
  return {ref, src};
}

std::pair<ReferenceSpectrum, ReferenceSpectrum> BuildReferenceSpectrum(
    const DatasetManifest &manifest, const std::string &corpus_dir, const std::string &source_device) {
  std::vector<AudioClip> clips;
  for (const auto &e : manifest.entries) {
    if (e.split != Split::kTrain || !e.source_transform.empty()) continue;
    AudioClip c = ReadWav((std::filesystem::path(corpus_dir) / e.path).string());
    c.device = e.device;
    clips.push_back(std::move(c));
  }
  return BuildReferenceSpectrum(clips, source_device);
}

AudioClip SpectrumCorrection(const AudioClip &clip, const ReferenceSpectrum &ref,
                             const ReferenceSpectrum &src) {
  ValidateClip(clip);
  ComplexSpectrogram s = StftComplex(clip.samples, kCorrectionFft, kCorrectionFft, kCorrectionHop);
  if (ref.values.size() != s.bins || src.values.size() != s.bins)
    throw ShapeError("spectrum_correction: reference spectra must have " + std::to_string(s.bins) + " bins");
  std::vector<double> factor(s.bins);
  for (size_t b = 0; b < s.bins; ++b) factor[b] = ref.values[b] / (src.values[b] + kCorrectionEps);
  for (size_t f = 0; f < s.frames; ++f)
    for (size_t b = 0; b < s.bins; ++b) s.at(f, b) *= factor[b];
  AudioClip out = WithSamples(clip, Istft(s, kCorrectionFft, clip.samples.size()));
  out.device = std::string(kSyntheticDevice);
  return out;
}

RoomImpulseResponse SynthRir(double rt60, size_t length, int sample_rate, Rng &rng) {
  if (!(rt60 > 0.0)) throw ConfigError("synth_rir: rt60 must be > 0");
  if (length == 0) throw ConfigError("synth_rir: length must be >= 1");
  RoomImpulseResponse rir;
  rir.sample_rate = sample_rate;
  rir.taps.resize(length);
  rir.taps[0] = 1.0;
  // exp(-k n) reaches 1e-3 (-60 dB) at n = rt60 * fs.
  const double k = 3.0 * std::log(10.0) / (rt60 * sample_rate);
  for (size_t n = 1; n < length; ++n) rir.taps[n] = rng.Uniform(-1.0, 1.0) * std::exp(-k * n);
  double peak = PeakAbs(rir.taps);
  for (auto &v : rir.taps) v /= peak;
  return rir;
}

std::vector<double> Compress(const std::vector<double> &x, int sample_rate, const DrcPreset &preset) {
  constexpr double kDetectorMs = 20.0;
  const double a_det = std::exp(-1.0 / (kDetectorMs * 1e-3 * sample_rate));
  const double a_att = std::exp(-1.0 / (preset.attack_ms * 1e-3 * sample_rate));
  const double a_rel = std::exp(-1.0 / (preset.release_ms * 1e-3 * sample_rate));
  const double slope = 1.0 - 1.0 / preset.ratio;
  std::vector<double> y(x.size());
  double env = 0.0, gain_db = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    env = a_det * env + (1.0 - a_det) * x[i] * x[i];
    double level_db = 10.0 * std::log10(env + 1e-30);
    double target = level_db > preset.threshold_db ? -slope * (level_db - preset.threshold_db) : 0.0;
    // attack when the gain has to drop, release when it recovers
    double a = target < gain_db ? a_att : a_rel;
    gain_db = a * gain_db + (1.0 - a) * target;
    y[i] = gain_db == 0.0 ? x[i] : x[i] * std::pow(10.0, gain_db / 20.0);
  }
  return y;
}

AudioClip ReverbDrc(const AudioClip &clip, const RoomImpulseResponse &rir, const DrcPreset &preset) {
  ValidateClip(clip);
  if (rir.taps.empty()) throw ConfigError("reverb_drc: empty impulse response");
  if (rir.sample_rate != clip.sample_rate)
    throw ShapeError("reverb_drc: impulse response rate differs from the clip rate");
  std::vector<double> wet = FftConvolve(clip.samples, rir.taps, clip.samples.size());
  std::vector<double> y = Compress(wet, clip.sample_rate, preset);
  RescalePeak(y, PeakAbs(clip.samples));
  AudioClip out = WithSamples(clip, std::move(y));
  out.device = std::string(kSyntheticDevice);
  return out;
}

std::vector<double> ResampleToLength(const std::vector<double> &x, size_t out_len) {
  if (out_len == x.size()) return x;
  std::vector<double> y(out_len, 0.0);
  if (x.empty() || out_len == 0) return y;
  const double step = static_cast<double>(x.size()) / static_cast<double>(out_len);
  const double fc = std::min(1.0, 1.0 / step);  // cutoff relative to input Nyquist
  const double half = SincTable::kZeros / fc;   // kernel half-width in input samples
  const SincTable &sinc = Sinc();
  const long n_in = static_cast<long>(x.size());
  for (size_t n = 0; n < out_len; ++n) {
    double p = n * step;
    long lo = static_cast<long>(std::ceil(p - half));
    long hi = static_cast<long>(std::floor(p + half));
    double acc = 0.0;
    for (long k = std::max(lo, 0L); k <= std::min(hi, n_in - 1); ++k)
      acc += x[k] * sinc((p - k) * fc);
    y[n] = fc * acc;
  }
  return y;
}

std::vector<double> TimeStretch(const std::vector<double> &x, double factor) {
  if (!(factor > 0.0)) throw ConfigError("time_stretch: factor must be > 0");
  constexpr size_t kFft = 2048, kHop = 512;
  const size_t out_len = static_cast<size_t>(std::llround(x.size() * factor));
  ComplexSpectrogram in = StftComplex(x, kFft, kFft, kHop);
  const double rate = 1.0 / factor;

  ComplexSpectrogram out;
  out.bins = in.bins;
  out.fft_size = kFft;
  out.hop = kHop;
  std::vector<double> advance(in.bins);
  for (size_t b = 0; b < in.bins; ++b) advance[b] = 2.0 * std::numbers::pi * kHop * b / kFft;
  std::vector<double> phase(in.bins);
  for (size_t b = 0; b < in.bins; ++b) phase[b] = std::arg(in.at(0, b));

  auto column = [&](size_t f, size_t b) -> std::complex<double> {
    return f < in.frames ? in.at(f, b) : std::complex<double>(0.0, 0.0);
  };
  for (size_t t = 0;; ++t) {
    double step = t * rate;
    if (step >= static_cast<double>(in.frames)) break;
    size_t f = static_cast<size_t>(step);
    double alpha = step - f;
    out.frames++;
    out.values.resize(out.frames * out.bins);
    for (size_t b = 0; b < in.bins; ++b) {
      std::complex<double> c0 = column(f, b), c1 = column(f + 1, b);
      double mag = (1.0 - alpha) * std::abs(c0) + alpha * std::abs(c1);
      out.at(out.frames - 1, b) = std::polar(mag, phase[b]);
      double dphase = std::arg(c1) - std::arg(c0) - advance[b];
      dphase -= 2.0 * std::numbers::pi * std::round(dphase / (2.0 * std::numbers::pi));
      phase[b] += advance[b] + dphase;
    }
  }
  return Istft(out, kFft, out_len);
}

AudioClip PitchShift(const AudioClip &clip, double semitones) {
  ValidateClip(clip);
  if (std::abs(semitones) > 12.0) throw ConfigError("pitch_shift: |semitones| must be <= 12");
  const double factor = std::pow(2.0, semitones / 12.0);
  std::vector<double> stretched = TimeStretch(clip.samples, factor);
  return WithSamples(clip, ResampleToLength(stretched, clip.samples.size()));
}

AudioClip SpeedChange(const AudioClip &clip, double rate) {
  ValidateClip(clip);
  if (!(rate > 0.0)) throw ConfigError("speed_change: rate must be > 0");
  const size_t n = clip.samples.size();
  size_t m = std::max<size_t>(1, static_cast<size_t>(std::llround(n / rate)));
  std::vector<double> y = ResampleToLength(clip.samples, m);
  y.resize(n, 0.0);
  return WithSamples(clip, std::move(y));
}

AudioClip AddNoise(const AudioClip &clip, double sigma, Rng &rng) {
  if (sigma < 0.0) throw ConfigError("add_noise: sigma must be >= 0");
  AudioClip out = clip;
  if (sigma == 0.0) return out;
  for (auto &v : out.samples) v += sigma * rng.Normal();
  return out;
}

AudioClip MixSameClass(const AudioClip &a, const AudioClip &b) {
  if (!a.scene || !b.scene || *a.scene != *b.scene)
    throw Error("mix_same_class: scenes differ ('" + a.scene.value_or("?") + "' vs '" +
                b.scene.value_or("?") + "')");
  if (a.samples.size() != b.samples.size() || a.sample_rate != b.sample_rate)
    throw ShapeError("mix_same_class: clips must share length and sample rate");
  std::vector<double> y(a.samples.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = 0.5 * (a.samples[i] + b.samples[i]);
  RescalePeak(y, std::max(PeakAbs(a.samples), PeakAbs(b.samples)));
  AudioClip out = WithSamples(a, std::move(y));
  out.device = std::string(kSyntheticDevice);
  return out;
}

std::string AugmentedPath(const std::string &path, Strategy s, uint64_t seed) {
  return path + ".aug-" + std::string(StrategyName(s)) + "-" + std::to_string(seed) + ".wav";
}

DatasetManifest GenerateExtraData(const DatasetManifest &manifest, const std::string &corpus_dir,
                                  const std::vector<Strategy> &enabled, const AugmentConfig &cfg,
                                  size_t workers) {
  cfg.Validate();
  namespace fs = std::filesystem;
  std::vector<Strategy> wave;
  for (Strategy s : enabled)
    if (GeneratesExtraData(s)) wave.push_back(s);

  std::vector<const ManifestEntry *> originals, sources;
  for (const auto &e : manifest.entries) {
    if (e.split != Split::kTrain || !e.source_transform.empty()) continue;
    originals.push_back(&e);
    if (e.device == cfg.source_device) sources.push_back(&e);
  }
  DatasetManifest out;
  if (wave.empty() || sources.empty()) return out;

  auto load = [&](const ManifestEntry &e) {
    AudioClip c = ReadWav((fs::path(corpus_dir) / e.path).string());
    c.scene = e.scene;
    c.device = e.device;
    return c;
  };

  std::optional<std::pair<ReferenceSpectrum, ReferenceSpectrum>> spectra;
  if (std::find(wave.begin(), wave.end(), Strategy::kSpectrumCorrection) != wave.end())
    spectra = BuildReferenceSpectrum(manifest, corpus_dir, cfg.source_device);

  std::map<std::string, std::vector<const ManifestEntry *>> by_scene;
  for (const auto *e : originals) by_scene[e->scene].push_back(e);

  out.entries.resize(sources.size() * wave.size());
  ParallelFor(out.entries.size(), workers, [&](size_t job) {
    const size_t clip_index = job / wave.size();
    const Strategy s = wave[job % wave.size()];
    const ManifestEntry &src = *sources[clip_index];
    Rng rng(DeriveSeed({cfg.seed, static_cast<uint64_t>(s), clip_index}));
    AudioClip clip = load(src);
    AudioClip result;
    switch (s) {
      case Strategy::kSpectrumCorrection:
        result = SpectrumCorrection(clip, spectra->first, spectra->second);
        break;
      case Strategy::kReverbDrc: {
        double rt60 = rng.Uniform(cfg.rt60_range.first, cfg.rt60_range.second);
        size_t len = static_cast<size_t>(std::ceil(rt60 * clip.sample_rate));
        RoomImpulseResponse rir = SynthRir(rt60, len, clip.sample_rate, rng);
        const DrcPreset &preset = cfg.drc_presets[rng.Index(cfg.drc_presets.size())];
        result = ReverbDrc(clip, rir, preset);
        break;
      }
      case Strategy::kPitchShift:
        result = PitchShift(clip, rng.Uniform(cfg.pitch_semitones_range.first,
                                              cfg.pitch_semitones_range.second));
        break;
      case Strategy::kSpeedChange:
        result = SpeedChange(clip, rng.Uniform(cfg.speed_range.first, cfg.speed_range.second));
        break;
      case Strategy::kRandomNoise:
        result = AddNoise(clip, rng.Uniform(cfg.noise_sigma_range.first, cfg.noise_sigma_range.second), rng);
        break;
      case Strategy::kMixAudio: {
        const auto &pool = by_scene[src.scene];
        const ManifestEntry *partner = pool[rng.Index(pool.size())];
        if (partner == &src && pool.size() > 1)
          partner = pool[(std::find(pool.begin(), pool.end(), &src) - pool.begin() + 1) % pool.size()];
        AudioClip other = load(*partner);
        if (other.samples.size() != clip.samples.size()) other.samples.resize(clip.samples.size(), 0.0);
        result = MixSameClass(clip, other);
        break;
      }
      default:
        throw Error("not a waveform strategy");
    }
    const std::string rel = AugmentedPath(src.path, s, cfg.seed);
    WriteWav(result, (fs::path(corpus_dir) / rel).string());
    ManifestEntry &e = out.entries[job];
    e.path = rel;
    e.scene = src.scene;
    e.device = result.device.value_or(src.device);
    e.split = Split::kTrain;
    e.source_transform = std::string(StrategyName(s));
  });
  return out;
}

}  // namespace ascene
