// ascene/features.h

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

#ifndef ASCENE_FEATURES_H_
#define ASCENE_FEATURES_H_

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "ascene/audio_io.h"

namespace ascene {

/// Row-major rows x cols matrix of doubles. For feature work rows = frames.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double &operator()(size_t r, size_t c) { return values[r * cols + c]; }
  double operator()(size_t r, size_t c) const { return values[r * cols + c]; }
};

/// frames x bins magnitudes, bins = fft_size / 2 + 1.
struct Spectrogram {
  Matrix magnitudes;
  size_t hop = 0;
  size_t fft_size = 0;

  size_t frames() const { return magnitudes.rows; }
  size_t bins() const { return magnitudes.cols; }
};

struct ComplexSpectrogram {
  size_t frames = 0;
  size_t bins = 0;
  size_t fft_size = 0;
  size_t hop = 0;
  std::vector<std::complex<double>> values;  // frames x bins

  std::complex<double> &at(size_t f, size_t b) { return values[f * bins + b]; }
  const std::complex<double> &at(size_t f, size_t b) const { return values[f * bins + b]; }
};

/// Periodic Hann window of length n.
std::vector<double> HannWindow(size_t n);

/// Centered STFT: the signal is reflect-padded by fft_size/2 on both sides and
/// framed every `hop` samples, giving 1 + floor(len / hop) frames. A Hann
/// window of length `window` is centered inside each fft_size frame.
ComplexSpectrogram StftComplex(const std::vector<double> &x, size_t fft_size,
                               size_t window, size_t hop);

Spectrogram Stft(const AudioClip &clip, size_t fft_size, size_t window, size_t hop);

/// Weighted overlap-add inverse of StftComplex (same window), normalized by
/// the summed squared window, trimmed to `length` samples.
std::vector<double> Istft(const ComplexSpectrogram &spec, size_t window, size_t length);

/// Slaney-style mel scale: linear below 1 kHz, logarithmic above.
double HzToMel(double hz);
double MelToHz(double mel);

struct MelFilterbank {
  Matrix weights;  // n_mels x bins
  std::vector<double> center_hz;

  size_t n_mels() const { return weights.rows; }
  size_t bins() const { return weights.cols; }
};

/// Area-normalized triangular filters between 0 Hz and sample_rate / 2.
/// Throws ConfigError if any filter has no positive weight.
MelFilterbank MakeMelFilterbank(size_t n_mels, size_t fft_size, int sample_rate);

/// log10(max(fb * |X|^2, 1e-10)), frames x mels.
Matrix LogMel(const Spectrogram &spec, const MelFilterbank &fb);

inline constexpr double kLogFloor = 1e-10;

/// 5-point regression delta over valid frames only (output has 4 fewer
/// frames). order 2 applies the delta twice.
Matrix Delta(const Matrix &x, int order);

/// time x mel x channel, row-major.
struct FeatureTensor {
  size_t time = 0;
  size_t mel = 0;
  size_t channels = 0;
  std::vector<double> values;

  FeatureTensor() = default;
  FeatureTensor(size_t t, size_t m, size_t c, double fill = 0.0)
      : time(t), mel(m), channels(c), values(t * m * c, fill) {}
  double &at(size_t t, size_t m, size_t c) { return values[(t * mel + m) * channels + c]; }
  double at(size_t t, size_t m, size_t c) const { return values[(t * mel + m) * channels + c]; }
  bool SameShape(const FeatureTensor &o) const {
    return time == o.time && mel == o.mel && channels == o.channels;
  }
};

/// Per-channel (x - min) / (max - min); a constant channel becomes all zeros.
FeatureTensor MinMaxScale(const FeatureTensor &tensor);

struct FeatureConfig {
  int sample_rate = 44100;
  size_t fft_size = 2048;
  size_t window = 2048;
  size_t hop = 1024;
  size_t n_mels = 128;
};

/// Frame count of the 3-channel tensor for a clip of `samples` samples.
size_t FeatureFrames(size_t samples, const FeatureConfig &cfg = {});

/// Time in seconds at the center of tensor frame `frame`.
double FrameCenterSeconds(size_t frame, const FeatureConfig &cfg = {});

/// Static, delta and delta-delta log-mels aligned on the delta-delta frames,
/// then min-max scaled. The filterbank is built once per instance.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig cfg = {});

  const FeatureConfig &config() const { return cfg_; }
  const MelFilterbank &filterbank() const { return fb_; }

  /// Unscaled static log-mel matrix (frames x mels).
  Matrix StaticLogMel(const AudioClip &clip) const;
  FeatureTensor Extract(const AudioClip &clip) const;

 private:
  FeatureConfig cfg_;
  MelFilterbank fb_;
};

/// Convenience wrapper around a process-wide default FeatureExtractor.
FeatureTensor ExtractFeatures(const AudioClip &clip);

/// Little-endian: three uint32 (time, mel, channels) then float32 values.
void WriteFeatureFile(const FeatureTensor &tensor, const std::string &path);
FeatureTensor ReadFeatureFile(const std::string &path);

}  // namespace ascene

#endif  // ASCENE_FEATURES_H_
