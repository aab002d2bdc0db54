// features.cc

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

#include "ascene/features.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "ascene/fft.h"

namespace ascene {

namespace {

// numpy-style "reflect" (edge sample not repeated), folded repeatedly so that
// signals shorter than the pad still work.
double ReflectAt(const std::vector<double> &x, long i) {
  long n = static_cast<long>(x.size());
  if (n == 1) return x[0];
  long period = 2 * (n - 1);
  long m = i % period;
  if (m < 0) m += period;
  return m < n ? x[m] : x[period - m];
}

void PutU32(std::ofstream &out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char *>(b), 4);
}

uint32_t GetU32(const unsigned char *b) {
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

}  // namespace

std::vector<double> HannWindow(size_t n) {
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  return w;
}

ComplexSpectrogram StftComplex(const std::vector<double> &x, size_t fft_size, size_t window,
                               size_t hop) {
  if (x.empty()) throw ShapeError("stft: signal has no samples");
  if (hop == 0) throw ConfigError("stft: hop must be positive");
  if (window == 0 || window > fft_size) throw ConfigError("stft: window must be in [1, fft_size]");
  if (fft_size % 2 != 0) throw ConfigError("stft: fft_size must be even");

  const long pad = static_cast<long>(fft_size / 2);
  const size_t frames = 1 + x.size() / hop;
  const size_t offset = (fft_size - window) / 2;
  std::vector<double> win = HannWindow(window);

  ComplexSpectrogram out;
  out.frames = frames;
  out.bins = fft_size / 2 + 1;
  out.fft_size = fft_size;
  out.hop = hop;
  out.values.resize(frames * out.bins);

  RealFft fft(fft_size);
  std::vector<double> frame(fft_size);
  for (size_t f = 0; f < frames; ++f) {
    std::fill(frame.begin(), frame.end(), 0.0);
    long start = static_cast<long>(f * hop) - pad;
    for (size_t i = 0; i < window; ++i) {
      long idx = start + static_cast<long>(offset + i);
      double v = (idx >= 0 && idx < static_cast<long>(x.size())) ? x[idx] : ReflectAt(x, idx);
      frame[offset + i] = v * win[i];
    }
    fft.Forward(frame, std::span(out.values.data() + f * out.bins, out.bins));
  }
  return out;
}

Spectrogram Stft(const AudioClip &clip, size_t fft_size, size_t window, size_t hop) {
  if (clip.samples.empty()) throw ShapeError("stft: clip has no samples");
  ComplexSpectrogram c = StftComplex(clip.samples, fft_size, window, hop);
  Spectrogram s;
  s.hop = hop;
  s.fft_size = fft_size;
  s.magnitudes = Matrix(c.frames, c.bins);
  for (size_t i = 0; i < c.values.size(); ++i) s.magnitudes.values[i] = std::abs(c.values[i]);
  return s;
}

std::vector<double> Istft(const ComplexSpectrogram &spec, size_t window, size_t length) {
  const size_t n = spec.fft_size;
  const size_t offset = (n - window) / 2;
  std::vector<double> win = HannWindow(window);
  size_t total = n + spec.hop * (spec.frames > 0 ? spec.frames - 1 : 0);
  std::vector<double> acc(total, 0.0), wsum(total, 0.0), frame(n);
  RealFft fft(n);
  for (size_t f = 0; f < spec.frames; ++f) {
    fft.Inverse(std::span(spec.values.data() + f * spec.bins, spec.bins), frame);
    size_t start = f * spec.hop;
    for (size_t i = 0; i < window; ++i) {
      double w = win[i];
      acc[start + offset + i] += frame[offset + i] / static_cast<double>(n) * w;
      wsum[start + offset + i] += w * w;
    }
  }
  std::vector<double> y(length, 0.0);
  const size_t pad = n / 2;
  for (size_t i = 0; i < length; ++i) {
    size_t j = i + pad;
    if (j >= total) break;
    y[i] = wsum[j] > 1e-10 ? acc[j] / wsum[j] : 0.0;
  }
  return y;
}

namespace {
constexpr double kMelFsp = 200.0 / 3.0;
constexpr double kMinLogHz = 1000.0;
constexpr double kMinLogMel = kMinLogHz / kMelFsp;
const double kLogStep = std::log(6.4) / 27.0;
}  // namespace

double HzToMel(double hz) {
  if (hz < kMinLogHz) return hz / kMelFsp;
  return kMinLogMel + std::log(hz / kMinLogHz) / kLogStep;
}

double MelToHz(double mel) {
  if (mel < kMinLogMel) return mel * kMelFsp;
  return kMinLogHz * std::exp(kLogStep * (mel - kMinLogMel));
}

MelFilterbank MakeMelFilterbank(size_t n_mels, size_t fft_size, int sample_rate) {
  if (n_mels == 0) throw ConfigError("mel filterbank needs at least one filter");
  if (fft_size == 0 || fft_size % 2 != 0) throw ConfigError("mel filterbank: fft_size must be even");
  if (sample_rate <= 0) throw ConfigError("mel filterbank: sample rate must be positive");
  const size_t bins = fft_size / 2 + 1;
  const double fmax = sample_rate / 2.0;
  const double mel_lo = HzToMel(0.0), mel_hi = HzToMel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (size_t i = 0; i < edges.size(); ++i)
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (n_mels + 1));

  MelFilterbank fb;
  fb.weights = Matrix(n_mels, bins);
  fb.center_hz.resize(n_mels);
  for (size_t m = 0; m < n_mels; ++m) {
    double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double norm = 2.0 / (hi - lo);
    bool any = false;
    for (size_t k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / fft_size;
      double rise = (f - lo) / (mid - lo);
      double fall = (hi - f) / (hi - mid);
      double w = std::max(0.0, std::min(rise, fall)) * norm;
      fb.weights(m, k) = w;
      any = any || w > 0.0;
    }
    if (!any)
      throw ConfigError("mel filter " + std::to_string(m) + " is empty: " +
                        std::to_string(n_mels) + " mels is too many for fft size " +
                        std::to_string(fft_size));
    fb.center_hz[m] = mid;
  }
  return fb;
}

Matrix LogMel(const Spectrogram &spec, const MelFilterbank &fb) {
  if (spec.bins() != fb.bins())
    throw ShapeError("log_mel: spectrogram has " + std::to_string(spec.bins()) +
                     " bins, filterbank expects " + std::to_string(fb.bins()));
  const size_t frames = spec.frames(), bins = spec.bins(), mels = fb.n_mels();
  std::vector<size_t> first(mels, 0), last(mels, 0);
  for (size_t m = 0; m < mels; ++m) {
    size_t k0 = 0;
    while (k0 < bins && fb.weights(m, k0) == 0.0) ++k0;
    size_t k1 = bins;
    while (k1 > k0 && fb.weights(m, k1 - 1) == 0.0) --k1;
    first[m] = k0;
    last[m] = k1;
  }
  Matrix out(frames, mels);
  std::vector<double> power(bins);
  for (size_t t = 0; t < frames; ++t) {
    for (size_t k = 0; k < bins; ++k) {
      double a = spec.magnitudes(t, k);
      power[k] = a * a;
    }
    for (size_t m = 0; m < mels; ++m) {
      double acc = 0.0;
      for (size_t k = first[m]; k < last[m]; ++k) acc += fb.weights(m, k) * power[k];
      out(t, m) = std::log10(std::max(acc, kLogFloor));
    }
  }
  return out;
}

Matrix Delta(const Matrix &x, int order) {
  if (order != 1 && order != 2) throw ConfigError("delta order must be 1 or 2");
  if (x.rows < 5) throw ShapeError("delta needs at least 5 frames, got " + std::to_string(x.rows));
  Matrix d(x.rows - 4, x.cols);
  for (size_t t = 2; t + 2 < x.rows; ++t)
    for (size_t c = 0; c < x.cols; ++c)
      d(t - 2, c) = (x(t + 1, c) - x(t - 1, c)) / 10.0 + (x(t + 2, c) - x(t - 2, c)) / 5.0;
  return order == 1 ? d : Delta(d, 1);
}

FeatureTensor MinMaxScale(const FeatureTensor &tensor) {
  FeatureTensor out = tensor;
  const size_t points = tensor.time * tensor.mel;
  for (size_t c = 0; c < tensor.channels; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (size_t i = 0; i < points; ++i) {
      double v = tensor.values[i * tensor.channels + c];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    double range = hi - lo;
    for (size_t i = 0; i < points; ++i) {
      double &v = out.values[i * tensor.channels + c];
      v = range > 0.0 ? (v - lo) / range : 0.0;
    }
  }
  return out;
}

size_t FeatureFrames(size_t samples, const FeatureConfig &cfg) {
  size_t frames = 1 + samples / cfg.hop;
  return frames > 8 ? frames - 8 : 0;
}

double FrameCenterSeconds(size_t frame, const FeatureConfig &cfg) {
  return static_cast<double>((frame + 4) * cfg.hop) / cfg.sample_rate;
}

FeatureExtractor::FeatureExtractor(FeatureConfig cfg)
    : cfg_(cfg), fb_(MakeMelFilterbank(cfg.n_mels, cfg.fft_size, cfg.sample_rate)) {}

Matrix FeatureExtractor::StaticLogMel(const AudioClip &clip) const {
  if (clip.sample_rate != cfg_.sample_rate)
    throw ShapeError("feature extraction expects " + std::to_string(cfg_.sample_rate) +
                     " Hz audio, got " + std::to_string(clip.sample_rate));
  return LogMel(Stft(clip, cfg_.fft_size, cfg_.window, cfg_.hop), fb_);
}

FeatureTensor FeatureExtractor::Extract(const AudioClip &clip) const {
  ValidateClip(clip);
  if (FeatureFrames(clip.samples.size(), cfg_) < 1)
    throw ShapeError("clip of " + std::to_string(clip.samples.size()) +
                     " samples is too short for delta-delta features");
  Matrix stat = StaticLogMel(clip);
  Matrix d1 = Delta(stat, 1);
  Matrix d2 = Delta(d1, 1);
  const size_t time = d2.rows, mel = stat.cols;
  FeatureTensor t(time, mel, 3);
  for (size_t i = 0; i < time; ++i) {
    for (size_t m = 0; m < mel; ++m) {
      t.at(i, m, 0) = stat(i + 4, m);
      t.at(i, m, 1) = d1(i + 2, m);
      t.at(i, m, 2) = d2(i, m);
    }
  }
  return MinMaxScale(t);
}

FeatureTensor ExtractFeatures(const AudioClip &clip) {
  static const FeatureExtractor extractor;
  return extractor.Extract(clip);
}

void WriteFeatureFile(const FeatureTensor &tensor, const std::string &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write feature file " + path);
  PutU32(out, static_cast<uint32_t>(tensor.time));
  PutU32(out, static_cast<uint32_t>(tensor.mel));
  PutU32(out, static_cast<uint32_t>(tensor.channels));
  for (double v : tensor.values) {
    float f = static_cast<float>(v);
    uint32_t u;
    std::memcpy(&u, &f, 4);
    PutU32(out, u);
  }
  if (!out) throw Error("write failed for " + path);
}

FeatureTensor ReadFeatureFile(const std::string &path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError(path);
  std::ifstream in(path, std::ios::binary);
  unsigned char head[12];
  if (!in.read(reinterpret_cast<char *>(head), 12)) throw Error("truncated feature file " + path);
  FeatureTensor t(GetU32(head), GetU32(head + 4), GetU32(head + 8));
  std::vector<unsigned char> body(t.values.size() * 4);
  if (!in.read(reinterpret_cast<char *>(body.data()), static_cast<std::streamsize>(body.size())))
    throw Error("truncated feature file " + path);
  for (size_t i = 0; i < t.values.size(); ++i) {
    uint32_t u = GetU32(body.data() + 4 * i);
    float f;
    std::memcpy(&f, &u, 4);
    t.values[i] = f;
  }
  return t;
}

}  // namespace ascene
