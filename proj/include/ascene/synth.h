// ascene/synth.h

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

#ifndef ASCENE_SYNTH_H_
#define ASCENE_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ascene/audio_io.h"

namespace ascene {

/// A simulated recording device: broadband gain plus a spectral tilt in
/// dB per octave around 1 kHz.
struct DeviceProfile {
  std::string id;
  double gain_db = 0.0;
  double tilt_db_per_octave = 0.0;
};

struct SynthSpec {
  int clips_per_class = 5;
  double clip_seconds = 1.0;
  int sample_rate = 44100;
  std::vector<DeviceProfile> devices = {{"a", 0.0, 0.0}, {"b", -4.0, -1.5}};
  uint64_t seed = 7;
  /// Clips whose index is >= round(clips_per_class * (1 - test_fraction))
  /// go to the test split.
  double test_fraction = 0.2;

  void Validate() const;
};

/// Per-class recipe for the synthetic scenes: a band-limited noise floor and
/// a train of tonal events.
struct SceneSignature {
  double noise_lo_hz;
  double noise_hi_hz;
  double noise_rms;
  double tone_hz;
  int harmonics;
  double sweep_octaves_per_s;
  double am_hz;
  double event_seconds;
  double events_per_second;
  double event_peak;
};

const SceneSignature &SignatureFor(int scene_index);

/// The device-independent rendering of clip `clip_index` of class
/// `scene_index`; seeded from (spec.seed, scene_index, clip_index).
std::vector<double> RenderSceneSamples(const SynthSpec &spec, int scene_index, int clip_index);

/// Applies gain and tilt. The tilt is applied in the frequency domain.
std::vector<double> ApplyDevice(const std::vector<double> &x, int sample_rate,
                                const DeviceProfile &device);

/// Band-limited Gaussian noise with the requested RMS (before any device).
std::vector<double> BandNoise(size_t n, int sample_rate, double lo_hz, double hi_hz,
                              double rms, uint64_t seed);

AudioClip RenderClip(const SynthSpec &spec, int scene_index, int clip_index,
                     const DeviceProfile &device);

/// Writes <out_dir>/<scene>/<scene>-<clip>-<device>.wav for every class,
/// clip and device, and returns the manifest (paths relative to out_dir).
DatasetManifest SynthDataset(const SynthSpec &spec, const std::string &out_dir,
                             size_t workers = 1);

}  // namespace ascene

#endif  // ASCENE_SYNTH_H_
