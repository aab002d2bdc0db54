// ascene/audio_io.h

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

#ifndef ASCENE_AUDIO_IO_H_
#define ASCENE_AUDIO_IO_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ascene/error.h"

namespace ascene {

/// The ten fine scene labels, in canonical class-index order.
inline constexpr std::array<std::string_view, 10> kSceneLabels = {
    "airport",      "shopping_mall",  "metro_station", "street_pedestrian",
    "public_square", "street_traffic", "tram",          "bus",
    "metro",        "park"};

/// Returns the class index of `scene`, or -1 when it is not one of the ten.
int SceneIndex(std::string_view scene);

/// Mono audio with provenance. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 44100;
  std::optional<std::string> scene;
  std::optional<std::string> device;

  size_t size() const { return samples.size(); }
  double Seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Throws ShapeError unless the clip is non-empty, finite and has a positive
/// rate.
void ValidateClip(const AudioClip &clip);

double PeakAbs(const std::vector<double> &x);
double Rms(const std::vector<double> &x);

class WavError : public Error {
 public:
  enum class Kind { kMalformedHeader, kUnsupportedCodec, kEmptyData, kIo };
  WavError(Kind kind, const std::string &what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads PCM (8/16/24/32-bit integer) or IEEE float (32/64-bit) WAV.
/// Multichannel input is averaged to mono. Provenance fields are left empty.
AudioClip ReadWav(const std::string &path);

/// Writes 16-bit PCM; samples are clipped to [-1, 1] before quantization.
void WriteWav(const AudioClip &clip, const std::string &path);

/// Encodes the 16-bit PCM file image in memory (what WriteWav puts on disk).
std::vector<char> EncodeWav16(const AudioClip &clip);

enum class Split { kTrain, kTest };
std::string_view SplitName(Split s);

struct ManifestEntry {
  std::string path;
  std::string scene;
  std::string device;
  Split split = Split::kTrain;
  /// Empty for recorded clips; the augmentation name for generated ones.
  std::string source_transform;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  /// Entries with the given split, in file order.
  std::vector<ManifestEntry> Select(Split split) const;
  const ManifestEntry *Find(std::string_view path) const;
};

class ManifestError : public ConfigError {
 public:
  enum class Kind {
    kIo,
    kBadHeader,
    kMissingColumn,
    kUnknownScene,
    kDuplicatePath,
    kBadSplit,
    kEmptyDevice
  };
  ManifestError(Kind kind, const std::string &what)
      : ConfigError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Parses `path,scene,device,split[,source_transform]` CSV text.
DatasetManifest ParseManifest(std::string_view text);
DatasetManifest LoadManifest(const std::string &path);

/// The source_transform column is written only if some entry uses it.
std::string FormatManifest(const DatasetManifest &manifest);
void SaveManifest(const DatasetManifest &manifest, const std::string &path);

}  // namespace ascene

#endif  // ASCENE_AUDIO_IO_H_
