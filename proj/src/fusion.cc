// src/fusion.cc

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

#include "ascene/fusion.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ascene/error.h"
#include "ascene/keyvalue.h"

namespace ascene {

namespace {

std::string Trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> SplitOn(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t p = s.find(sep, start);
    out.push_back(Trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) return out;
    start = p + 1;
  }
}

size_t IndexOf(const std::vector<std::string> &v, std::string_view x) {
  auto it = std::find(v.begin(), v.end(), x);
  return it == v.end() ? v.size() : static_cast<size_t>(it - v.begin());
}

std::string ReadText(const std::filesystem::path &path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError(path.string());
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string Pct(double acc) {
  if (std::isnan(acc)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * acc);
  return buf;
}

std::string Full(double v) { return FormatDouble(v); }

std::string Probability(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- hierarchy

ClassHierarchy ClassHierarchy::Default() {
  ClassHierarchy h;
  h.coarse = {"indoor", "outdoor", "transportation"};
  const std::map<std::string, size_t> parent = {
      {"airport", 0},         {"shopping_mall", 0}, {"metro_station", 0}, {"park", 1},
      {"public_square", 1},   {"street_pedestrian", 1}, {"street_traffic", 1},
      {"bus", 2},             {"tram", 2},          {"metro", 2}};
  for (std::string_view label : kSceneLabels) {
    h.fine.emplace_back(label);
    h.parent.push_back(parent.at(std::string(label)));
  }
  return h;
}

ClassHierarchy ClassHierarchy::Parse(std::string_view text) {
  ClassHierarchy h;
  size_t line_no = 0;
  for (const std::string &raw : SplitOn(text, '\n')) {
    ++line_no;
    std::string line = Trim(raw);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("hierarchy line " + std::to_string(line_no) + ": expected fine=coarse");
    std::string fine = Trim(std::string_view(line).substr(0, eq));
    std::string coarse = Trim(std::string_view(line).substr(eq + 1));
    if (fine.empty() || coarse.empty())
      throw ConfigError("hierarchy line " + std::to_string(line_no) + ": empty label");
    if (IndexOf(h.fine, fine) != h.fine.size())
      throw ConfigError("hierarchy: fine class '" + fine + "' listed twice");
    size_t c = IndexOf(h.coarse, coarse);
    if (c == h.coarse.size()) h.coarse.push_back(coarse);
    h.fine.push_back(fine);
    h.parent.push_back(c);
  }
  h.Validate();
  return h;
}

ClassHierarchy ClassHierarchy::Load(const std::filesystem::path &path) { return Parse(ReadText(path)); }

std::string ClassHierarchy::Format() const {
  std::string out;
  for (size_t i = 0; i < fine.size(); ++i) out += fine[i] + "=" + coarse[parent[i]] + "\n";
  return out;
}

void ClassHierarchy::Validate() const {
  if (fine.empty() || coarse.empty()) throw ConfigError("hierarchy: empty class list");
  if (parent.size() != fine.size()) throw ConfigError("hierarchy: parent map is not total");
  std::vector<size_t> children(coarse.size(), 0);
  for (size_t p : parent) {
    if (p >= coarse.size()) throw ConfigError("hierarchy: parent index out of range");
    ++children[p];
  }
  for (size_t c = 0; c < coarse.size(); ++c)
    if (children[c] == 0) throw ConfigError("hierarchy: coarse class '" + coarse[c] + "' has no children");
  if (std::set<std::string>(fine.begin(), fine.end()).size() != fine.size())
    throw ConfigError("hierarchy: duplicate fine class");
  size_t t = IndexOf(coarse, "transportation");
  if (t != coarse.size()) {
    std::set<std::string> kids;
    for (size_t i = 0; i < fine.size(); ++i)
      if (parent[i] == t) kids.insert(fine[i]);
    if (kids != std::set<std::string>{"bus", "tram", "metro"})
      throw ConfigError("hierarchy: transportation must have exactly bus, tram and metro");
  }
  if (std::set<std::string>(coarse.begin(), coarse.end()).size() != coarse.size())
    throw ConfigError("hierarchy: duplicate coarse class");
}

size_t ClassHierarchy::FineIndex(std::string_view label) const {
  size_t i = IndexOf(fine, label);
  if (i == fine.size()) throw ConfigError("hierarchy: unknown fine class '" + std::string(label) + "'");
  return i;
}

size_t ClassHierarchy::CoarseIndex(std::string_view label) const {
  size_t i = IndexOf(coarse, label);
  if (i == coarse.size()) throw ConfigError("hierarchy: unknown coarse class '" + std::string(label) + "'");
  return i;
}

const std::string &ClassHierarchy::Parent(std::string_view fine_label) const {
  return coarse[parent[FineIndex(fine_label)]];
}

DatasetManifest CoarseLabels(const DatasetManifest &manifest, const ClassHierarchy &h) {
  DatasetManifest out = manifest;
  for (auto &e : out.entries) e.scene = h.Parent(e.scene);
  return out;
}

// ---------------------------------------------------------------- score tables

void ScoreTable::Validate() const {
  if (labels.empty()) throw ConfigError("score table: no labels");
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size())
    throw ConfigError("score table: duplicate label");
  if (rows.size() != clip_ids.size()) throw ConfigError("score table: row count differs from clip count");
  if (std::set<std::string>(clip_ids.begin(), clip_ids.end()).size() != clip_ids.size())
    throw ConfigError("score table: duplicate clip id");
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != labels.size())
      throw ConfigError("score table: row for '" + clip_ids[i] + "' has the wrong width");
    double s = 0.0;
    for (double v : rows[i]) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError("score table: invalid probability for '" + clip_ids[i] + "'");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-6)
      throw ConfigError("score table: row for '" + clip_ids[i] + "' sums to " + Full(s));
  }
}

std::string ScoreTable::ToCsv() const {
  Validate();
  std::string out = "clip_id";
  for (const auto &l : labels) out += "," + l;
  out += "\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    if (clip_ids[i].find_first_of(",\n") != std::string::npos)
      throw ConfigError("score table: clip id '" + clip_ids[i] + "' contains a separator");
    out += clip_ids[i];
    for (double v : rows[i]) out += "," + Probability(v);
    out += "\n";
  }
  return out;
}

ScoreTable ScoreTable::FromCsv(std::string_view text) {
  ScoreTable t;
  std::vector<std::string> lines = SplitOn(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ConfigError("score file: empty");
  std::vector<std::string> header = SplitOn(lines[0], ',');
  if (header.size() < 2 || header[0] != "clip_id") throw ConfigError("score file: bad header");
  t.labels.assign(header.begin() + 1, header.end());
  for (size_t n = 1; n < lines.size(); ++n) {
    std::vector<std::string> cells = SplitOn(lines[n], ',');
    if (cells.size() != header.size())
      throw ConfigError("score file line " + std::to_string(n + 1) + ": expected " +
                        std::to_string(header.size()) + " fields");
    std::vector<double> row;
    for (size_t k = 1; k < cells.size(); ++k) {
      char *end = nullptr;
      double v = std::strtod(cells[k].c_str(), &end);
      if (cells[k].empty() || *end != '\0')
        throw ConfigError("score file line " + std::to_string(n + 1) + ": bad number '" + cells[k] + "'");
      row.push_back(v);
    }
    t.clip_ids.push_back(cells[0]);
    t.rows.push_back(std::move(row));
  }
  t.Validate();
  return t;
}

void ScoreTable::Save(const std::filesystem::path &path) const { WriteText(path, ToCsv()); }

ScoreTable ScoreTable::Load(const std::filesystem::path &path) { return FromCsv(ReadText(path)); }

size_t ArgmaxIndex(const std::vector<double> &row) {
  size_t best = 0;
  for (size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

std::vector<std::string> ScoreTable::Argmax() const {
  std::vector<std::string> out;
  for (const auto &r : rows) out.push_back(labels[ArgmaxIndex(r)]);
  return out;
}

ScoreTable Ensemble(const std::vector<ScoreTable> &tables, const std::optional<std::vector<double>> &weights) {
  if (tables.empty()) throw ConfigError("ensemble: no tables");
  std::vector<double> w = weights ? *weights : std::vector<double>(tables.size(), 1.0);
  if (w.size() != tables.size()) throw ConfigError("ensemble: one weight per table required");
  for (double x : w)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("ensemble: weights must be finite and >= 0");
  for (const auto &t : tables) {
    t.Validate();
    if (t.labels != tables[0].labels) throw ConfigError("ensemble: class lists differ");
    if (t.clip_ids != tables[0].clip_ids) throw ConfigError("ensemble: clip ids differ");
  }
  ScoreTable out = tables[0];
  // Running weighted mean: copies of one table reproduce it exactly.
  double total = w[0];
  for (size_t i = 1; i < tables.size(); ++i) {
    total += w[i];
    if (total <= 0.0) continue;
    double f = w[i] / total;
    for (size_t r = 0; r < out.rows.size(); ++r)
      for (size_t k = 0; k < out.labels.size(); ++k)
        out.rows[r][k] += f * (tables[i].rows[r][k] - out.rows[r][k]);
  }
  if (total <= 0.0) throw ConfigError("ensemble: weights sum to zero");
  return out;
}

// ---------------------------------------------------------------- fusion

size_t FuseRow(const std::vector<double> &coarse, const std::vector<double> &fine,
               const std::vector<size_t> &parent) {
  size_t best = 0;
  double best_score = -1.0;
  for (size_t q = 0; q < fine.size(); ++q) {
    double s = coarse[parent[q]] * fine[q];
    if (s > best_score) {
      best_score = s;
      best = q;
    }
  }
  return best;
}

FusionResult FuseTwoStage(const ScoreTable &coarse, const ScoreTable &fine, const ClassHierarchy &h) {
  h.Validate();
  coarse.Validate();
  fine.Validate();
  // parent[q]: column of the coarse table holding fine class q's parent.
  std::vector<size_t> parent;
  for (const auto &label : fine.labels) {
    const std::string &p = h.Parent(label);
    size_t c = IndexOf(coarse.labels, p);
    if (c == coarse.labels.size()) throw ConfigError("fuse: coarse table lacks class '" + p + "'");
    parent.push_back(c);
  }
  if (coarse.clip_ids.size() != fine.clip_ids.size())
    throw ConfigError("fuse: tables cover different clips");
  std::unordered_map<std::string, size_t> coarse_row;
  for (size_t i = 0; i < coarse.clip_ids.size(); ++i) coarse_row[coarse.clip_ids[i]] = i;

  FusionResult r;
  r.fused.labels = fine.labels;
  r.fused.clip_ids = fine.clip_ids;
  for (size_t i = 0; i < fine.rows.size(); ++i) {
    auto it = coarse_row.find(fine.clip_ids[i]);
    if (it == coarse_row.end()) throw ConfigError("fuse: clip '" + fine.clip_ids[i] + "' missing from coarse table");
    const auto &c = coarse.rows[it->second];
    const auto &f = fine.rows[i];
    r.predictions.push_back(fine.labels[FuseRow(c, f, parent)]);
    std::vector<double> prod(f.size());
    double s = 0.0;
    for (size_t q = 0; q < f.size(); ++q) s += (prod[q] = c[parent[q]] * f[q]);
    if (s > 0.0) {
      for (double &v : prod) v /= s;
    } else {
      prod = f;  // no joint support anywhere: report the fine row
    }
    r.fused.rows.push_back(std::move(prod));
  }
  return r;
}

// ---------------------------------------------------------------- device report

std::vector<DeviceGroup> DefaultDeviceGroups() {
  return {{"A", {"a"}}, {"B&C", {"b", "c"}}, {"s1-s3", {"s1", "s2", "s3"}}, {"s4-s6", {"s4", "s5", "s6"}}};
}

std::vector<DeviceGroup> ParseDeviceGroups(std::string_view spec) {
  std::vector<DeviceGroup> groups;
  for (const std::string &item : SplitOn(spec, ';')) {
    if (item.empty()) continue;
    size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("device groups: expected name=dev,dev in '" + item + "'");
    DeviceGroup g{Trim(std::string_view(item).substr(0, eq)), {}};
    for (const std::string &d : SplitOn(std::string_view(item).substr(eq + 1), ','))
      if (!d.empty()) g.devices.push_back(d);
    if (g.devices.empty()) throw ConfigError("device groups: group '" + g.name + "' has no devices");
    groups.push_back(std::move(g));
  }
  if (groups.empty()) throw ConfigError("device groups: empty specification");
  return groups;
}

DeviceGroupReport DeviceReport(const std::map<std::string, std::string> &predictions,
                               const DatasetManifest &manifest, const std::vector<DeviceGroup> &groups,
                               const std::vector<std::string> &labels) {
  DeviceGroupReport rep;
  if (labels.empty()) {
    for (std::string_view l : kSceneLabels) rep.labels.emplace_back(l);
  } else {
    rep.labels = labels;
  }
  const size_t k = rep.labels.size();
  rep.confusion.assign(k, std::vector<size_t>(k, 0));
  std::unordered_map<std::string, const ManifestEntry *> by_path;
  for (const auto &e : manifest.entries) by_path[e.path] = &e;

  std::map<std::string, size_t> device_correct;
  for (const auto &[clip, predicted] : predictions) {
    auto it = by_path.find(clip);
    if (it == by_path.end()) throw ConfigError("device report: clip '" + clip + "' is not in the manifest");
    const ManifestEntry &e = *it->second;
    size_t t = IndexOf(rep.labels, e.scene), p = IndexOf(rep.labels, predicted);
    if (t == k) throw ConfigError("device report: true label '" + e.scene + "' not in the label list");
    if (p == k) throw ConfigError("device report: predicted label '" + predicted + "' not in the label list");
    ++rep.confusion[t][p];
    ++rep.device_clips[e.device];
    ++rep.total;
    if (t == p) {
      ++device_correct[e.device];
      ++rep.correct;
    }
  }
  if (rep.total == 0) throw ConfigError("device report: no predictions");
  double sum = 0.0;
  for (const auto &[dev, n] : rep.device_clips) {
    double acc = static_cast<double>(device_correct[dev]) / static_cast<double>(n);
    rep.device_accuracy[dev] = acc;
    sum += acc;
  }
  rep.overall = sum / static_cast<double>(rep.device_clips.size());
  for (const auto &g : groups) {
    size_t n = 0, c = 0;
    for (const auto &d : g.devices) {
      auto it = rep.device_clips.find(d);
      if (it == rep.device_clips.end()) continue;
      n += it->second;
      c += device_correct[d];
    }
    rep.group_names.push_back(g.name);
    rep.group_clips.push_back(n);
    rep.group_accuracy.push_back(n ? static_cast<double>(c) / static_cast<double>(n) : std::nan(""));
  }
  return rep;
}

std::string DeviceGroupReport::ToText(std::string_view system_name) const {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-24s", "System");
  os << buf;
  for (const auto &g : group_names) {
    std::snprintf(buf, sizeof(buf), " %8s", g.c_str());
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), " %8s\n", "Avg.");
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-24s", std::string(system_name).c_str());
  os << buf;
  for (double a : group_accuracy) {
    std::snprintf(buf, sizeof(buf), " %8s", Pct(a).c_str());
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), " %8s\n", Pct(overall).c_str());
  os << buf << "\n";

  os << "confusion (rows = true, columns = predicted; order: ";
  for (size_t i = 0; i < labels.size(); ++i) os << (i ? "," : "") << labels[i];
  os << ")\n";
  for (size_t i = 0; i < labels.size(); ++i) {
    for (size_t j = 0; j < labels.size(); ++j) os << (j ? " " : "") << confusion[i][j];
    os << "\n";
  }
  os << "\n[metrics]\n";
  os << "system=" << system_name << "\n";
  os << "overall=" << Full(overall) << "\n";
  os << "correct=" << correct << "\n";
  os << "total=" << total << "\n";
  for (size_t i = 0; i < group_names.size(); ++i) {
    os << "group." << group_names[i] << ".accuracy=" << (std::isnan(group_accuracy[i]) ? "nan" : Full(group_accuracy[i])) << "\n";
    os << "group." << group_names[i] << ".clips=" << group_clips[i] << "\n";
  }
  for (const auto &[dev, acc] : device_accuracy) {
    os << "device." << dev << ".accuracy=" << Full(acc) << "\n";
    os << "device." << dev << ".clips=" << device_clips.at(dev) << "\n";
  }
  return os.str();
}

double MacroAverage(const std::vector<double> &group_accuracy, const std::vector<size_t> &multiplicity) {
  if (group_accuracy.size() != multiplicity.size() || group_accuracy.empty())
    throw ConfigError("macro average: one multiplicity per group required");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < group_accuracy.size(); ++i) {
    num += static_cast<double>(multiplicity[i]) * group_accuracy[i];
    den += static_cast<double>(multiplicity[i]);
  }
  if (den <= 0.0) throw ConfigError("macro average: zero total multiplicity");
  return num / den;
}

}  // namespace ascene
