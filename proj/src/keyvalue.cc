// src/keyvalue.cc

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

#include "ascene/keyvalue.h"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ascene/error.h"

namespace ascene {

namespace {

std::string Trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

KeyValues KeyValues::Parse(std::string_view text) {
  KeyValues kv;
  std::string section;
  size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = Trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    std::string key = Trim(std::string_view(t).substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    kv.map_[key] = Trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::Load(const std::filesystem::path &path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError(path.string());
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

std::string KeyValues::Format() const {
  std::string out;
  for (const auto &[k, v] : map_) out += k + "=" + v + "\n";
  return out;
}

void KeyValues::Save(const std::filesystem::path &path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << Format();
}

void KeyValues::Assign(std::string_view assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  map_[Trim(assignment.substr(0, eq))] = Trim(assignment.substr(eq + 1));
}

void KeyValues::Merge(const KeyValues &other) {
  for (const auto &[k, v] : other.map_) map_[k] = v;
}

const std::string &KeyValues::Get(const std::string &key) const {
  auto it = map_.find(key);
  if (it == map_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::string KeyValues::Get(const std::string &key, const std::string &fallback) const {
  auto it = map_.find(key);
  return it == map_.end() ? fallback : it->second;
}

double KeyValues::GetDouble(const std::string &key) const {
  const std::string &s = Get(key);
  char *end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw ConfigError("config key " + key + ": '" + s + "' is not a number");
  return v;
}

double KeyValues::GetDouble(const std::string &key, double fallback) const {
  return Has(key) ? GetDouble(key) : fallback;
}

int64_t KeyValues::GetInt(const std::string &key) const {
  const std::string &s = Get(key);
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("config key " + key + ": '" + s + "' is not an integer");
  return v;
}

int64_t KeyValues::GetInt(const std::string &key, int64_t fallback) const {
  return Has(key) ? GetInt(key) : fallback;
}

bool KeyValues::GetBool(const std::string &key, bool fallback) const {
  if (!Has(key)) return fallback;
  const std::string &s = Get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config key " + key + ": '" + s + "' is not a boolean");
}

std::vector<std::string> KeyValues::GetList(const std::string &key) const {
  std::vector<std::string> out;
  std::string s = Get(key);
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    std::string item = Trim(std::string_view(s).substr(start, comma - start));
    if (!item.empty()) out.push_back(item);
    start = comma + 1;
  }
  return out;
}

KeyValues KeyValues::Section(const std::string &prefix) const {
  KeyValues kv;
  std::string p = prefix + ".";
  for (const auto &[k, v] : map_)
    if (k.compare(0, p.size(), p) == 0) kv.map_[k.substr(p.size())] = v;
  return kv;
}

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexHash(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string FormatDouble(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace ascene
