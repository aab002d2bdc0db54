// tests/audio_io_test.cc

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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "ascene/audio_io.h"
#include "ascene/synth.h"
#include "test_util.h"

namespace ascene {
namespace {

using testing::TempDir;

// Minimal WAV writer for arbitrary formats, independent of EncodeWav16.
std::vector<unsigned char> MakeWav(uint16_t format, uint16_t channels, uint32_t rate,
                                   uint16_t bits, const std::vector<unsigned char> &data) {
  std::vector<unsigned char> b;
  auto u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
  };
  auto u16 = [&](uint16_t v) {
    b.push_back(v & 0xFF);
    b.push_back(v >> 8);
  };
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  u32(36 + static_cast<uint32_t>(data.size()));
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(channels * bits / 8);
  u16(bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  u32(static_cast<uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());
  return b;
}

TEST(ReadWav, SixteenBitScaling) {
  TempDir dir("wav");
  std::vector<unsigned char> data = {0x00, 0x40};  // 16384
  testing::WriteBytes(dir / "a.wav", MakeWav(1, 1, 44100, 16, data));
  AudioClip clip = ReadWav(dir / "a.wav");
  ASSERT_EQ(clip.samples.size(), 1u);
  EXPECT_EQ(clip.samples[0], 0.5);
  EXPECT_EQ(clip.sample_rate, 44100);
}

TEST(ReadWav, AllZeroSecond) {
  TempDir dir("wav");
  testing::WriteBytes(dir / "z.wav", MakeWav(1, 1, 44100, 16, std::vector<unsigned char>(88200, 0)));
  AudioClip clip = ReadWav(dir / "z.wav");
  ASSERT_EQ(clip.samples.size(), 44100u);
  for (double s : clip.samples) ASSERT_EQ(s, 0.0);
}

TEST(ReadWav, StereoIsAveraged) {
  TempDir dir("wav");
  std::vector<unsigned char> data;
  for (float f : {0.2f, 0.6f, 0.2f, 0.6f}) {
    unsigned char raw[4];
    std::memcpy(raw, &f, 4);
    data.insert(data.end(), raw, raw + 4);
  }
  testing::WriteBytes(dir / "s.wav", MakeWav(3, 2, 16000, 32, data));
  AudioClip clip = ReadWav(dir / "s.wav");
  ASSERT_EQ(clip.samples.size(), 2u);
  EXPECT_NEAR(clip.samples[0], 0.4, 1e-7);
  EXPECT_NEAR(clip.samples[1], 0.4, 1e-7);
}

TEST(ReadWav, EightAndTwentyFourBit) {
  TempDir dir("wav");
  testing::WriteBytes(dir / "8.wav", MakeWav(1, 1, 8000, 8, {192, 64}));
  AudioClip c8 = ReadWav(dir / "8.wav");
  EXPECT_DOUBLE_EQ(c8.samples[0], 0.5);
  EXPECT_DOUBLE_EQ(c8.samples[1], -0.5);
  testing::WriteBytes(dir / "24.wav", MakeWav(1, 1, 8000, 24, {0x00, 0x00, 0xC0}));
  EXPECT_DOUBLE_EQ(ReadWav(dir / "24.wav").samples[0], -0.5);
}

TEST(ReadWav, ErrorsAreDistinct) {
  TempDir dir("wav");
  testing::WriteBytes(dir / "bad.wav", {'R', 'I', 'F', 'X', 0, 0, 0, 0});
  testing::WriteBytes(dir / "alaw.wav", MakeWav(6, 1, 8000, 8, {1, 2}));
  testing::WriteBytes(dir / "empty.wav", MakeWav(1, 1, 8000, 16, {}));

  auto kind_of = [&](const std::string &name) {
    try {
      ReadWav(dir / name);
    } catch (const WavError &e) {
      return e.kind();
    }
    ADD_FAILURE() << name << " did not throw";
    return WavError::Kind::kIo;
  };
  EXPECT_EQ(kind_of("bad.wav"), WavError::Kind::kMalformedHeader);
  EXPECT_EQ(kind_of("alaw.wav"), WavError::Kind::kUnsupportedCodec);
  EXPECT_EQ(kind_of("empty.wav"), WavError::Kind::kEmptyData);
  EXPECT_THROW(ReadWav(dir / "nope.wav"), MissingArtifactError);
}

TEST(WriteWav, ZeroAndSaturation) {
  TempDir dir("wav");
  AudioClip clip;
  clip.samples = {0.0};
  WriteWav(clip, dir / "zero.wav");
  EXPECT_EQ(ReadWav(dir / "zero.wav").samples[0], 0.0);

  clip.samples = {2.0, -3.0};
  WriteWav(clip, dir / "sat.wav");
  AudioClip back = ReadWav(dir / "sat.wav");
  EXPECT_EQ(back.samples[0], 32767.0 / 32768.0);
  EXPECT_EQ(back.samples[1], -1.0);
}

TEST(WriteWav, RoundTripWithinOneStep) {
  TempDir dir("wav");
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    AudioClip clip;
    clip.samples = testing::RandomVector(1000, seed);
    if (seed == 1) clip.samples[0] = 1.0;
    WriteWav(clip, dir / "r.wav");
    AudioClip back = ReadWav(dir / "r.wav");
    ASSERT_EQ(back.samples.size(), clip.samples.size());
    for (size_t i = 0; i < clip.samples.size(); ++i)
      ASSERT_LE(std::abs(back.samples[i] - clip.samples[i]), 1.0 / 32768.0) << "seed " << seed;
  }
}

TEST(WriteWav, RejectsNonFinite) {
  TempDir dir("wav");
  AudioClip clip;
  clip.samples = {0.0, std::nan("")};
  EXPECT_THROW(WriteWav(clip, dir / "n.wav"), NumericalError);
}

TEST(Manifest, ParsesRow) {
  DatasetManifest m = ParseManifest("path,scene,device,split\na.wav,park,a,train\n");
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].path, "a.wav");
  EXPECT_EQ(m.entries[0].scene, "park");
  EXPECT_EQ(m.entries[0].device, "a");
  EXPECT_EQ(m.entries[0].split, Split::kTrain);
}

TEST(Manifest, UnknownSceneIsRejected) {
  try {
    ParseManifest("path,scene,device,split\na.wav,beach,a,train\n");
    FAIL();
  } catch (const ManifestError &e) {
    EXPECT_EQ(e.kind(), ManifestError::Kind::kUnknownScene);
  }
}

TEST(Manifest, DuplicatePathNamesThePath) {
  std::string text = "path,scene,device,split\n";
  for (int i = 0; i < 9; ++i) text += "clip" + std::to_string(i) + ".wav,bus,b,test\n";
  text += "clip4.wav,tram,a,train\n";
  try {
    ParseManifest(text);
    FAIL();
  } catch (const ManifestError &e) {
    EXPECT_EQ(e.kind(), ManifestError::Kind::kDuplicatePath);
    EXPECT_NE(std::string(e.what()).find("clip4.wav"), std::string::npos);
  }
}

TEST(Manifest, MissingColumnAndBadSplit) {
  try {
    ParseManifest("path,scene,device,split\na.wav,park,a\n");
    FAIL();
  } catch (const ManifestError &e) {
    EXPECT_EQ(e.kind(), ManifestError::Kind::kMissingColumn);
  }
  try {
    ParseManifest("path,scene,device,split\na.wav,park,a,dev\n");
    FAIL();
  } catch (const ManifestError &e) {
    EXPECT_EQ(e.kind(), ManifestError::Kind::kBadSplit);
  }
}

TEST(Manifest, FormatParseRoundTripWithTransform) {
  DatasetManifest m;
  m.entries.push_back({"x.wav", "metro", "a", Split::kTrain, ""});
  m.entries.push_back({"x.aug-pitch_shift-3.wav", "metro", "a", Split::kTrain, "pitch_shift"});
  DatasetManifest back = ParseManifest(FormatManifest(m));
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[1].source_transform, "pitch_shift");
  EXPECT_EQ(back.entries[0].source_transform, "");
}

TEST(Synth, DeterministicCorpus) {
  TempDir a("synth"), b("synth");
  SynthSpec spec;
  spec.clips_per_class = 1;
  spec.clip_seconds = 0.25;
  spec.seed = 7;
  DatasetManifest ma = SynthDataset(spec, a.path().string());
  DatasetManifest mb = SynthDataset(spec, b.path().string(), 3);
  EXPECT_EQ(FormatManifest(ma), FormatManifest(mb));
  for (const auto &e : ma.entries) EXPECT_EQ(testing::ReadBytes(a / e.path), testing::ReadBytes(b / e.path));
}

TEST(Synth, CountsEntries) {
  TempDir dir("synth");
  SynthSpec spec;
  spec.clips_per_class = 5;
  spec.clip_seconds = 0.05;
  DatasetManifest m = SynthDataset(spec, dir.path().string());
  EXPECT_EQ(m.entries.size(), 100u);
  size_t test = m.Select(Split::kTest).size();
  EXPECT_EQ(test, 20u);  // one clip in five, both devices, ten classes
}

TEST(Synth, DeviceGainScalesRms) {
  SynthSpec spec;
  spec.seed = 7;
  spec.clip_seconds = 1.0;
  DeviceProfile ref{"ref", 0.0, 0.0}, quiet{"quiet", -6.0, 0.0};
  for (int c = 0; c < 10; ++c) {
    double r = Rms(RenderClip(spec, c, 0, quiet).samples) / Rms(RenderClip(spec, c, 0, ref).samples);
    EXPECT_NEAR(r, 0.501, 0.005);
  }
}

TEST(Synth, TiltChangesSpectralBalance) {
  SynthSpec spec;
  DeviceProfile flat{"f", 0.0, 0.0}, dark{"d", 0.0, -3.0};
  auto x = RenderSceneSamples(spec, 9, 0);  // park: mostly high-frequency
  EXPECT_LT(Rms(ApplyDevice(x, spec.sample_rate, dark)), Rms(ApplyDevice(x, spec.sample_rate, flat)));
}

TEST(Synth, RejectsBadSpec) {
  SynthSpec spec;
  spec.clips_per_class = 0;
  EXPECT_THROW(spec.Validate(), ConfigError);
  spec.clips_per_class = 1;
  spec.clip_seconds = 0.0;
  EXPECT_THROW(spec.Validate(), ConfigError);
}

}  // namespace
}  // namespace ascene
