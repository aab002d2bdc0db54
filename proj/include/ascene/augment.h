// ascene/augment.h

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

#ifndef ASCENE_AUGMENT_H_
#define ASCENE_AUGMENT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ascene/audio_io.h"
#include "ascene/features.h"
#include "ascene/rng.h"

namespace ascene {

/// The nine strategies. The first three work on feature tensors inside the
/// training loop; the other six synthesize extra waveforms.
enum class Strategy {
  kMixup,
  kRandomCrop,
  kSpecAugment,
  kSpectrumCorrection,
  kReverbDrc,
  kPitchShift,
  kSpeedChange,
  kRandomNoise,
  kMixAudio,
};

inline constexpr Strategy kAllStrategies[] = {
    Strategy::kMixup,       Strategy::kRandomCrop,  Strategy::kSpecAugment,
    Strategy::kSpectrumCorrection, Strategy::kReverbDrc, Strategy::kPitchShift,
    Strategy::kSpeedChange, Strategy::kRandomNoise, Strategy::kMixAudio};

std::string_view StrategyName(Strategy s);
std::optional<Strategy> ParseStrategy(std::string_view name);
bool GeneratesExtraData(Strategy s);

struct DrcPreset {
  double threshold_db;
  double ratio;
  double attack_ms;
  double release_ms;
};

struct AugmentConfig {
  double mixup_alpha = 0.4;
  size_t crop_frames = 400;
  double specaug_fraction = 0.10;
  std::pair<double, double> pitch_semitones_range{-2.0, 2.0};
  std::pair<double, double> speed_range{0.9, 1.1};
  std::pair<double, double> noise_sigma_range{0.002, 0.02};
  std::vector<DrcPreset> drc_presets = {{-20.0, 4.0, 5.0, 50.0}, {-30.0, 8.0, 1.0, 100.0}};
  std::pair<double, double> rt60_range{0.2, 0.8};
  std::string source_device = "a";
  uint64_t seed = 0;

  /// time_frames = 0 skips the crop-length check.
  void Validate(size_t time_frames = 0) const;
};

// ---------------------------------------------------------------------------
// Feature-domain transforms.

struct LabeledTensor {
  FeatureTensor features;
  std::vector<double> label;
};

/// lambda ~ Beta(alpha, alpha) once per batch, partner order from a random
/// permutation.
std::vector<LabeledTensor> Mixup(const std::vector<LabeledTensor> &batch, double alpha, Rng &rng);

/// Mixup with a given lambda and partner permutation.
std::vector<LabeledTensor> MixupWith(const std::vector<LabeledTensor> &batch, double lambda,
                                     const std::vector<size_t> &partner);

FeatureTensor CropAt(const FeatureTensor &tensor, size_t offset, size_t frames);
FeatureTensor RandomCrop(const FeatureTensor &tensor, size_t crop_frames, Rng &rng);

struct SpecAugmentMask {
  size_t time_start = 0;
  size_t time_width = 0;
  size_t freq_start = 0;
  size_t freq_width = 0;
};

/// One time stripe of floor(fraction * time) frames and one frequency stripe
/// of floor(fraction * mel) bins, each at a uniform position.
SpecAugmentMask DrawSpecAugmentMask(size_t time, size_t mel, double fraction, Rng &rng);
void ApplySpecAugmentMask(FeatureTensor &tensor, const SpecAugmentMask &mask);
FeatureTensor SpecAugment(const FeatureTensor &tensor, double fraction, Rng &rng);

// ---------------------------------------------------------------------------
// Waveform-domain transforms. All keep the input length.

struct ReferenceSpectrum {
  std::vector<double> values;  // fft_size / 2 + 1 mean magnitudes
};

inline constexpr size_t kCorrectionFft = 2048;
inline constexpr size_t kCorrectionHop = 1024;

/// Mean over frames of the STFT magnitude.
std::vector<double> TimeAveragedSpectrum(const AudioClip &clip);

/// Returns (reference = mean over clips not from `source_device`,
///          source = mean over clips from `source_device`).
std::pair<ReferenceSpectrum, ReferenceSpectrum> BuildReferenceSpectrum(
    const std::vector<AudioClip> &clips, const std::string &source_device = "a");

/// Same, reading the training clips of a manifest from `corpus_dir`.
std::pair<ReferenceSpectrum, ReferenceSpectrum> BuildReferenceSpectrum(
    const DatasetManifest &manifest, const std::string &corpus_dir,
    const std::string &source_device = "a");

/// Scales every STFT bin by ref / (src + 1e-8), keeps phase, resynthesizes.
AudioClip SpectrumCorrection(const AudioClip &clip, const ReferenceSpectrum &ref,
                             const ReferenceSpectrum &src);

struct RoomImpulseResponse {
  std::vector<double> taps;
  int sample_rate = 44100;
};

/// Unit impulse followed by uniform white noise under an exponential envelope
/// reaching -60 dB at rt60.
RoomImpulseResponse SynthRir(double rt60, size_t length, int sample_rate, Rng &rng);

/// Feed-forward compressor: 20 ms mean-square level detector, hard-knee
/// static curve, gain in dB smoothed with one-pole attack/release filters.
/// No output normalization.
std::vector<double> Compress(const std::vector<double> &x, int sample_rate, const DrcPreset &preset);

/// Convolve with the RIR (truncated to the input length), compress, then
/// rescale to the input peak.
AudioClip ReverbDrc(const AudioClip &clip, const RoomImpulseResponse &rir, const DrcPreset &preset);

/// Band-limited (Kaiser-windowed sinc) resampling of x to exactly out_len
/// samples spanning the same duration.
std::vector<double> ResampleToLength(const std::vector<double> &x, size_t out_len);

/// Phase-vocoder time stretch: output length round(len * factor).
std::vector<double> TimeStretch(const std::vector<double> &x, double factor);

AudioClip PitchShift(const AudioClip &clip, double semitones);
AudioClip SpeedChange(const AudioClip &clip, double rate);
AudioClip AddNoise(const AudioClip &clip, double sigma, Rng &rng);
AudioClip MixSameClass(const AudioClip &a, const AudioClip &b);

// ---------------------------------------------------------------------------
// Extra-data generation over a corpus.

inline constexpr std::string_view kSyntheticDevice = "synthetic";

/// `<path>.aug-<name>-<seed>.wav`
std::string AugmentedPath(const std::string &path, Strategy s, uint64_t seed);

/// For every training clip from the source device and every enabled
/// waveform strategy, writes one new clip beside the original and returns
/// the provenance manifest (scene kept; split train; source_transform set).
DatasetManifest GenerateExtraData(const DatasetManifest &manifest, const std::string &corpus_dir,
                                  const std::vector<Strategy> &enabled, const AugmentConfig &cfg,
                                  size_t workers = 1);

}  // namespace ascene

#endif  // ASCENE_AUGMENT_H_
