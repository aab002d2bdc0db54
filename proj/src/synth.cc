// synth.cc

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

#include "ascene/synth.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "ascene/fft.h"
#include "ascene/parallel.h"
#include "ascene/rng.h"

namespace ascene {

namespace {

// noise lo/hi/rms, tone, harmonics, sweep, am, event length, rate, peak
const SceneSignature kSignatures[10] = {
    {100, 4000, 0.05, 250, 6, 0.0, 0.0, 0.60, 1.0, 0.25},     // airport
    {200, 6000, 0.04, 1200, 1, 0.0, 12.0, 0.30, 2.0, 0.25},   // shopping_mall
    {50, 2000, 0.06, 400, 3, 1.5, 0.0, 0.40, 1.5, 0.25},      // metro_station
    {300, 8000, 0.03, 2000, 1, 0.0, 4.0, 0.50, 1.0, 0.25},    // street_pedestrian
    {100, 10000, 0.03, 3000, 2, 0.0, 0.0, 0.08, 6.0, 0.25},   // public_square
    {30, 1500, 0.08, 150, 8, -0.5, 0.0, 0.70, 0.8, 0.25},     // street_traffic
    {80, 3000, 0.05, 700, 4, 0.0, 30.0, 0.50, 1.2, 0.25},     // tram
    {40, 1000, 0.07, 90, 10, 0.0, 0.0, 0.80, 1.0, 0.25},      // bus
    {60, 2500, 0.06, 900, 2, -2.0, 0.0, 0.30, 2.0, 0.25},     // metro
    {500, 12000, 0.02, 4000, 1, 3.0, 0.0, 0.12, 4.0, 0.25},   // park
};

void AddEvent(std::vector<double> &y, int sample_rate, const SceneSignature &sig, double f0,
              size_t onset, size_t length, double peak) {
  const double dt = 1.0 / sample_rate;
  double phase = 0.0;
  double harmonic_norm = 0.0;
  for (int h = 1; h <= sig.harmonics; ++h) harmonic_norm += 1.0 / h;
  for (size_t i = 0; i < length && onset + i < y.size(); ++i) {
    double t = i * dt;
    double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 0.5) / length);
    if (sig.am_hz > 0.0) env *= 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * sig.am_hz * t);
    double f = f0 * std::pow(2.0, sig.sweep_octaves_per_s * t);
    phase += 2.0 * std::numbers::pi * f * dt;
    double s = 0.0;
    for (int h = 1; h <= sig.harmonics; ++h) {
      if (f * h >= 0.45 * sample_rate) break;
      s += std::sin(h * phase) / h;
    }
    y[onset + i] += peak * env * s / harmonic_norm;
  }
}

}  // namespace

void SynthSpec::Validate() const {
  if (clips_per_class < 1) throw ConfigError("synth: clips_per_class must be >= 1");
  if (!(clip_seconds > 0.0)) throw ConfigError("synth: clip_seconds must be > 0");
  if (sample_rate <= 0) throw ConfigError("synth: sample_rate must be > 0");
  if (devices.empty()) throw ConfigError("synth: at least one device is required");
  for (const auto &d : devices)
    if (d.id.empty()) throw ConfigError("synth: device ids must be non-empty");
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw ConfigError("synth: test_fraction must be in [0, 1)");
}

const SceneSignature &SignatureFor(int scene_index) { return kSignatures[scene_index]; }

std::vector<double> BandNoise(size_t n, int sample_rate, double lo_hz, double hi_hz, double rms,
                              uint64_t seed) {
  Rng rng(seed);
  size_t m = NextPow2(std::max<size_t>(n, 2));
  std::vector<double> white(m);
  for (auto &v : white) v = rng.Normal();
  RealFft fft(m);
  std::vector<std::complex<double>> spec(fft.bins());
  fft.Forward(white, spec);
  const double bin_hz = static_cast<double>(sample_rate) / m;
  // Raised-cosine skirts a sixth of an octave wide on each edge.
  for (size_t k = 0; k < spec.size(); ++k) {
    double f = k * bin_hz;
    double g = 0.0;
    double lo0 = lo_hz * std::pow(2.0, -1.0 / 6), hi1 = hi_hz * std::pow(2.0, 1.0 / 6);
    if (f >= lo_hz && f <= hi_hz) {
      g = 1.0;
    } else if (f > lo0 && f < lo_hz) {
      g = 0.5 - 0.5 * std::cos(std::numbers::pi * (f - lo0) / (lo_hz - lo0));
    } else if (f > hi_hz && f < hi1) {
      g = 0.5 + 0.5 * std::cos(std::numbers::pi * (f - hi_hz) / (hi1 - hi_hz));
    }
    spec[k] *= g;
  }
  std::vector<double> y(m);
  fft.Inverse(spec, y);
  y.resize(n);
  double r = Rms(y);
  if (r > 0.0)
    for (auto &v : y) v *= rms / r;
  return y;
}

std::vector<double> RenderSceneSamples(const SynthSpec &spec, int scene_index, int clip_index) {
  const SceneSignature &sig = kSignatures[scene_index];
  const size_t n = static_cast<size_t>(std::llround(spec.clip_seconds * spec.sample_rate));
  Rng rng(DeriveSeed({spec.seed, static_cast<uint64_t>(scene_index),
                      static_cast<uint64_t>(clip_index)}));
  double level = rng.Uniform(0.8, 1.25);
  std::vector<double> y =
      BandNoise(n, spec.sample_rate, sig.noise_lo_hz, sig.noise_hi_hz, sig.noise_rms * level, rng());

  size_t event_len = std::min<size_t>(n, static_cast<size_t>(sig.event_seconds * spec.sample_rate));
  double expected = sig.events_per_second * spec.clip_seconds;
  int events = std::max(1, static_cast<int>(std::floor(expected + rng.Uniform())));
  for (int e = 0; e < events; ++e) {
    size_t onset = static_cast<size_t>(rng.Uniform() * static_cast<double>(n - event_len + 1));
    double f0 = sig.tone_hz * rng.Uniform(0.92, 1.08);
    double peak = sig.event_peak * rng.Uniform(0.7, 1.3);
    AddEvent(y, spec.sample_rate, sig, f0, onset, event_len, peak);
  }
  return y;
}

std::vector<double> ApplyDevice(const std::vector<double> &x, int sample_rate,
                                const DeviceProfile &device) {
  const double gain = std::pow(10.0, device.gain_db / 20.0);
  std::vector<double> y(x.size());
  if (device.tilt_db_per_octave == 0.0 || x.empty()) {
    for (size_t i = 0; i < x.size(); ++i) y[i] = gain * x[i];
    return y;
  }
  size_t m = NextPow2(2 * x.size());
  RealFft fft(m);
  std::vector<double> buf(m, 0.0);
  std::copy(x.begin(), x.end(), buf.begin());
  std::vector<std::complex<double>> spec(fft.bins());
  fft.Forward(buf, spec);
  const double bin_hz = static_cast<double>(sample_rate) / m;
  for (size_t k = 0; k < spec.size(); ++k) {
    double f = std::max(50.0, k * bin_hz);
    double db = device.tilt_db_per_octave * std::log2(f / 1000.0);
    spec[k] *= gain * std::pow(10.0, db / 20.0) / static_cast<double>(m);
  }
  fft.Inverse(spec, buf);
  std::copy(buf.begin(), buf.begin() + x.size(), y.begin());
  return y;
}

AudioClip RenderClip(const SynthSpec &spec, int scene_index, int clip_index,
                     const DeviceProfile &device) {
  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples = ApplyDevice(RenderSceneSamples(spec, scene_index, clip_index), spec.sample_rate,
                             device);
  clip.scene = std::string(kSceneLabels[scene_index]);
  clip.device = device.id;
  return clip;
}

DatasetManifest SynthDataset(const SynthSpec &spec, const std::string &out_dir, size_t workers) {
  spec.Validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create corpus directory " + out_dir + ": " + ec.message());

  const int train_clips = static_cast<int>(
      std::lround(spec.clips_per_class * (1.0 - spec.test_fraction)));
  const size_t n_classes = kSceneLabels.size();
  const size_t n_devices = spec.devices.size();
  DatasetManifest manifest;
  manifest.entries.resize(n_classes * spec.clips_per_class * n_devices);

  for (size_t c = 0; c < n_classes; ++c) {
    fs::create_directories(fs::path(out_dir) / std::string(kSceneLabels[c]), ec);
    if (ec) throw Error("cannot create corpus directory: " + ec.message());
  }

  ParallelFor(n_classes * spec.clips_per_class, workers, [&](size_t job) {
    int c = static_cast<int>(job / spec.clips_per_class);
    int k = static_cast<int>(job % spec.clips_per_class);
    std::vector<double> base = RenderSceneSamples(spec, c, k);
    for (size_t d = 0; d < n_devices; ++d) {
      const DeviceProfile &dev = spec.devices[d];
      AudioClip clip;
      clip.sample_rate = spec.sample_rate;
      clip.samples = ApplyDevice(base, spec.sample_rate, dev);
      char name[256];
      std::snprintf(name, sizeof(name), "%s/%s-%03d-%s.wav", std::string(kSceneLabels[c]).c_str(),
                    std::string(kSceneLabels[c]).c_str(), k, dev.id.c_str());
      WriteWav(clip, (fs::path(out_dir) / name).string());
      ManifestEntry &e = manifest.entries[(job * n_devices) + d];
      e.path = name;
      e.scene = std::string(kSceneLabels[c]);
      e.device = dev.id;
      e.split = k < train_clips ? Split::kTrain : Split::kTest;
    }
  });
  return manifest;
}

}  // namespace ascene
