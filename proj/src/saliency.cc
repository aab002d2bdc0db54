// src/saliency.cc

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

#include "ascene/saliency.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ascene/error.h"

namespace ascene {

std::vector<double> WeightedMapSum(const Tensor &maps, const std::vector<double> &weights, double bias) {
  if (maps.rank() != 4 || maps.dim(1) != weights.size())
    throw ShapeError("class map: " + ShapeString(maps.shape) + " does not match " +
                     std::to_string(weights.size()) + " weights");
  const size_t plane = maps.dim(2) * maps.dim(3);
  std::vector<double> out(plane, bias);
  for (size_t k = 0; k < weights.size(); ++k) {
    const double w = weights[k];
    const double *a = maps.data() + k * plane;
    for (size_t i = 0; i < plane; ++i) out[i] += w * a[i];
  }
  return out;
}

std::vector<double> BilinearResize(const std::vector<double> &in, size_t rows, size_t cols, size_t out_rows,
                                   size_t out_cols) {
  if (in.size() != rows * cols || rows == 0 || cols == 0)
    throw ShapeError("bilinear resize: grid size mismatch");
  if (rows == out_rows && cols == out_cols) return in;
  auto source = [](size_t i, size_t n_in, size_t n_out, size_t *lo, size_t *hi, double *frac) {
    double x = (static_cast<double>(i) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(n_in - 1));
    *lo = static_cast<size_t>(std::floor(x));
    *hi = std::min(*lo + 1, n_in - 1);
    *frac = x - static_cast<double>(*lo);
  };
  std::vector<double> out(out_rows * out_cols);
  for (size_t r = 0; r < out_rows; ++r) {
    size_t r0, r1;
    double fr;
    source(r, rows, out_rows, &r0, &r1, &fr);
    for (size_t c = 0; c < out_cols; ++c) {
      size_t c0, c1;
      double fc;
      source(c, cols, out_cols, &c0, &c1, &fc);
      double top = (1 - fc) * in[r0 * cols + c0] + fc * in[r0 * cols + c1];
      double bot = (1 - fc) * in[r1 * cols + c0] + fc * in[r1 * cols + c1];
      out[r * out_cols + c] = (1 - fr) * top + fr * bot;
    }
  }
  return out;
}

CamMap ComputeCam(const TrainedModel &model, const FeatureTensor &features, size_t target,
                  const std::string &clip_id) {
  if (model.arch.family != Family::kResnet)
    throw ConfigError("CAM is only supported for the resnet family, not " +
                      std::string(FamilyName(model.arch.family)));
  const int head = ClassifierNode(model.model);
  if (head < 0) throw ConfigError("CAM needs a 1x1 conv head feeding global average pooling");
  if (target >= model.arch.n_classes)
    throw ConfigError("CAM target " + std::to_string(target) + " outside " +
                      std::to_string(model.arch.n_classes) + " classes");
  if (features.mel != model.arch.mel_bins || features.channels != model.arch.channels)
    throw ShapeError("CAM: features do not match the model's mel bins or channels");

  // Same weights, input span widened to the clip.
  ArchitectureConfig arch = model.arch;
  arch.time_frames = features.time;
  Model full = BuildModel(arch);
  std::vector<Tensor *> dst = full.State();
  std::vector<const Tensor *> src = model.model.State();
  if (dst.size() != src.size()) throw Error("CAM: model state layout mismatch");
  for (size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->shape != src[i]->shape) throw Error("CAM: model state shape mismatch");
    dst[i]->values = src[i]->values;
  }

  std::vector<const FeatureTensor *> one = {&features};
  std::vector<Tensor> acts = full.InferAll(ToBatch(one));
  const int maps_node = full.inputs(head)[0];
  const Tensor &maps = acts[maps_node];
  const auto *conv = static_cast<const Conv2d *>(full.layer(head));
  const Tensor &w = conv->weight().value;
  const size_t k = maps.dim(1);
  std::vector<double> weights(w.data() + target * k, w.data() + (target + 1) * k);

  CamMap cam;
  cam.clip_id = clip_id;
  cam.target = target;
  cam.raw_time = maps.dim(2);
  cam.raw_freq = maps.dim(3);
  cam.raw = WeightedMapSum(maps, weights, conv->bias().value[target]);
  cam.time = features.time;
  cam.freq = features.mel;
  cam.values = BilinearResize(cam.raw, cam.raw_time, cam.raw_freq, cam.time, cam.freq);
  cam.logit = acts[full.logits_node()][target];
  return cam;
}

std::vector<double> TimeMarginal(const CamMap &cam) {
  std::vector<double> out(cam.time, 0.0);
  for (size_t t = 0; t < cam.time; ++t) {
    for (size_t f = 0; f < cam.freq; ++f) out[t] += cam.at(t, f);
    out[t] /= static_cast<double>(cam.freq);
  }
  return out;
}

std::array<uint8_t, 3> CamColor(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto g = static_cast<uint8_t>(std::lround(128.0 * (1.0 - v)));
  return {static_cast<uint8_t>(std::lround(128.0 + 127.0 * v)), g, g};
}

namespace {

void CheckFinite(const CamMap &cam) {
  if (cam.values.size() != cam.time * cam.freq || cam.values.empty())
    throw ShapeError("CAM: values do not match its shape");
  for (double v : cam.values)
    if (!std::isfinite(v)) throw NumericalError("CAM: non-finite value");
}

std::ofstream OpenOut(const std::filesystem::path &path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void WriteCamImage(const CamMap &cam, const std::filesystem::path &path) {
  CheckFinite(cam);
  auto [lo, hi] = std::minmax_element(cam.values.begin(), cam.values.end());
  const double range = *hi - *lo;
  std::ofstream out = OpenOut(path, std::ios::binary);
  out << "P6\n" << cam.time << " " << cam.freq << "\n255\n";
  std::vector<uint8_t> row(cam.time * 3);
  for (size_t r = 0; r < cam.freq; ++r) {
    const size_t f = cam.freq - 1 - r;
    for (size_t t = 0; t < cam.time; ++t) {
      double v = range > 0.0 ? (cam.at(t, f) - *lo) / range : 0.0;
      auto c = CamColor(v);
      std::copy(c.begin(), c.end(), row.begin() + 3 * t);
    }
    out.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error("failed writing " + path.string());
}

void WriteCamText(const CamMap &cam, const std::filesystem::path &path) {
  CheckFinite(cam);
  std::ofstream out = OpenOut(path, std::ios::out);
  char buf[40];
  for (size_t t = 0; t < cam.time; ++t) {
    for (size_t f = 0; f < cam.freq; ++f) {
      std::snprintf(buf, sizeof(buf), "%.17g", cam.at(t, f));
      out << (f ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw Error("failed writing " + path.string());
}

CamMap ReadCamText(const std::filesystem::path &path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError(path.string());
  std::ifstream in(path);
  CamMap cam;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      char *end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0')
        throw ConfigError("CAM text: bad number '" + cell + "' on frame " + std::to_string(cam.time));
      cam.values.push_back(v);
      ++n;
    }
    if (cam.time == 0) cam.freq = n;
    if (n != cam.freq) throw ConfigError("CAM text: ragged frame " + std::to_string(cam.time));
    ++cam.time;
  }
  if (cam.time == 0) throw ConfigError("CAM text: empty file " + path.string());
  return cam;
}

void ExportHeatmap(const CamMap &cam, const std::filesystem::path &stem) {
  std::filesystem::path base = stem;
  WriteCamImage(cam, base.string() + ".ppm");
  WriteCamText(cam, base.string() + ".csv");
}

}  // namespace ascene
