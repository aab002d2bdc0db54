// audio_io.cc

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

#include "ascene/audio_io.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace ascene {

namespace {

uint32_t ReadU32(const unsigned char *p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
         (uint32_t(p[3]) << 24);
}

uint16_t ReadU16(const unsigned char *p) {
  return uint16_t(p[0] | (p[1] << 8));
}

void PutU32(std::vector<char> &out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void PutU16(std::vector<char> &out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

double DecodeSample(const unsigned char *p, uint16_t format, uint16_t bits) {
  if (format == kFormatFloat) {
    if (bits == 32) {
      uint32_t u = ReadU32(p);
      float f;
      std::memcpy(&f, &u, sizeof(f));
      return f;
    }
    uint64_t u = uint64_t(ReadU32(p)) | (uint64_t(ReadU32(p + 4)) << 32);
    double d;
    std::memcpy(&d, &u, sizeof(d));
    return d;
  }
  switch (bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16:
      return static_cast<int16_t>(ReadU16(p)) / 32768.0;
    case 24: {
      int32_t v = int32_t(p[0]) | (int32_t(p[1]) << 8) | (int32_t(p[2]) << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    default:
      return static_cast<int32_t>(ReadU32(p)) / 2147483648.0;
  }
}

std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto &f : fields) {
    auto b = f.find_first_not_of(" \t");
    auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

}  // namespace

int SceneIndex(std::string_view scene) {
  for (size_t i = 0; i < kSceneLabels.size(); ++i)
    if (kSceneLabels[i] == scene) return static_cast<int>(i);
  return -1;
}

void ValidateClip(const AudioClip &clip) {
  if (clip.sample_rate <= 0) throw ShapeError("clip sample rate must be positive");
  if (clip.samples.empty()) throw ShapeError("clip has no samples");
  for (double s : clip.samples)
    if (!std::isfinite(s)) throw NumericalError("clip contains non-finite samples");
}

double PeakAbs(const std::vector<double> &x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

double Rms(const std::vector<double> &x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / x.size());
}

AudioClip ReadWav(const std::string &path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavError::Kind::kIo, "cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  auto malformed = [&](const std::string &why) {
    return WavError(WavError::Kind::kMalformedHeader, path + ": " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw malformed("not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const unsigned char *data = nullptr;
  size_t data_size = 0;
  bool have_data = false;

  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char *chunk = buf.data() + pos;
    uint32_t size = ReadU32(chunk + 4);
    size_t body = pos + 8;
    size_t avail = buf.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || avail < 16) throw malformed("truncated fmt chunk");
      format = ReadU16(chunk + 8);
      channels = ReadU16(chunk + 10);
      rate = ReadU32(chunk + 12);
      bits = ReadU16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40 || avail < 40) throw malformed("truncated extensible fmt chunk");
        format = ReadU16(chunk + 32);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      // Some writers leave the size at 0 or 0xFFFFFFFF when streaming.
      data_size = std::min<size_t>(size, avail);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw malformed("missing fmt chunk");
  if (!have_data) throw malformed("missing data chunk");
  if (channels == 0) throw malformed("zero channels");
  if (rate == 0) throw malformed("zero sample rate");

  bool supported =
      (format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32)) ||
      (format == kFormatFloat && (bits == 32 || bits == 64));
  if (!supported)
    throw WavError(WavError::Kind::kUnsupportedCodec,
                   path + ": unsupported codec (format " + std::to_string(format) +
                       ", " + std::to_string(bits) + " bits)");

  size_t bytes_per_sample = bits / 8;
  size_t frame_bytes = bytes_per_sample * channels;
  size_t frames = data_size / frame_bytes;
  if (frames == 0) throw WavError(WavError::Kind::kEmptyData, path + ": no audio frames");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (size_t c = 0; c < channels; ++c)
      acc += DecodeSample(data + f * frame_bytes + c * bytes_per_sample, format, bits);
    clip.samples[f] = acc / channels;
  }
  return clip;
}

std::vector<char> EncodeWav16(const AudioClip &clip) {
  if (clip.sample_rate <= 0) throw ShapeError("clip sample rate must be positive");
  for (double s : clip.samples)
    if (!std::isfinite(s)) throw NumericalError("cannot write non-finite samples");
  uint32_t data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
  std::vector<char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  PutU32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  PutU32(out, 16);
  PutU16(out, kFormatPcm);
  PutU16(out, 1);
  PutU32(out, static_cast<uint32_t>(clip.sample_rate));
  PutU32(out, static_cast<uint32_t>(clip.sample_rate) * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  PutU32(out, data_bytes);
  for (double s : clip.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    long q = std::lround(c * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    PutU16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  return out;
}

void WriteWav(const AudioClip &clip, const std::string &path) {
  std::vector<char> bytes = EncodeWav16(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WavError(WavError::Kind::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WavError(WavError::Kind::kIo, "write failed for " + path);
}

std::string_view SplitName(Split s) { return s == Split::kTrain ? "train" : "test"; }

std::vector<ManifestEntry> DatasetManifest::Select(Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto &e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

const ManifestEntry *DatasetManifest::Find(std::string_view path) const {
  for (const auto &e : entries)
    if (e.path == path) return &e;
  return nullptr;
}

DatasetManifest ParseManifest(std::string_view text) {
  using K = ManifestError::Kind;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t lineno = 0;
  bool have_header = false;
  bool with_transform = false;
  DatasetManifest manifest;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = SplitCsvLine(line);
    if (!have_header) {
      if (fields.size() < 4 || fields[0] != "path" || fields[1] != "scene" ||
          fields[2] != "device" || fields[3] != "split")
        throw ManifestError(K::kBadHeader,
                            "manifest header must be path,scene,device,split");
      with_transform = fields.size() >= 5 && fields[4] == "source_transform";
      have_header = true;
      continue;
    }
    size_t need = with_transform ? 5 : 4;
    if (fields.size() < 4 || (with_transform && fields.size() < need))
      throw ManifestError(K::kMissingColumn, "line " + std::to_string(lineno) +
                                                 ": expected " + std::to_string(need) +
                                                 " columns");
    ManifestEntry e;
    e.path = fields[0];
    e.scene = fields[1];
    e.device = fields[2];
    if (e.path.empty())
      throw ManifestError(K::kMissingColumn, "line " + std::to_string(lineno) + ": empty path");
    if (SceneIndex(e.scene) < 0)
      throw ManifestError(K::kUnknownScene, "line " + std::to_string(lineno) +
                                                ": unknown scene '" + e.scene + "'");
    if (e.device.empty())
      throw ManifestError(K::kEmptyDevice, "line " + std::to_string(lineno) + ": empty device");
    if (fields[3] == "train")
      e.split = Split::kTrain;
    else if (fields[3] == "test")
      e.split = Split::kTest;
    else
      throw ManifestError(K::kBadSplit, "line " + std::to_string(lineno) +
                                            ": split must be train or test");
    if (with_transform) e.source_transform = fields[4];
    if (!seen.insert(e.path).second)
      throw ManifestError(K::kDuplicatePath, "duplicate path '" + e.path + "'");
    manifest.entries.push_back(std::move(e));
  }
  if (!have_header) throw ManifestError(K::kBadHeader, "manifest is empty");
  return manifest;
}

DatasetManifest LoadManifest(const std::string &path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError(path);
  std::ifstream in(path);
  if (!in) throw ManifestError(ManifestError::Kind::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseManifest(ss.str());
}

std::string FormatManifest(const DatasetManifest &manifest) {
  bool with_transform = std::any_of(manifest.entries.begin(), manifest.entries.end(),
                                    [](const auto &e) { return !e.source_transform.empty(); });
  std::ostringstream out;
  out << "path,scene,device,split";
  if (with_transform) out << ",source_transform";
  out << '\n';
  for (const auto &e : manifest.entries) {
    out << e.path << ',' << e.scene << ',' << e.device << ',' << SplitName(e.split);
    if (with_transform) out << ',' << e.source_transform;
    out << '\n';
  }
  return out.str();
}

void SaveManifest(const DatasetManifest &manifest, const std::string &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ManifestError(ManifestError::Kind::kIo, "cannot write " + path);
  out << FormatManifest(manifest);
}

}  // namespace ascene
