// include/ascene/keyvalue.h

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

#ifndef ASCENE_KEYVALUE_H_
#define ASCENE_KEYVALUE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ascene {

/// Ordered key=value store. Text form: one `key=value` per line, `#`
/// comments, and optional `[section]` headers that prefix following keys
/// with `section.`.
class KeyValues {
 public:
  static KeyValues Parse(std::string_view text);
  static KeyValues Load(const std::filesystem::path &path);

  /// Sorted `key=value` lines.
  std::string Format() const;
  void Save(const std::filesystem::path &path) const;

  bool Has(const std::string &key) const { return map_.count(key) != 0; }
  void Set(const std::string &key, std::string value) { map_[key] = std::move(value); }
  /// Applies `key=value`; throws ConfigError on a malformed assignment.
  void Assign(std::string_view assignment);
  void Merge(const KeyValues &other);

  const std::string &Get(const std::string &key) const;
  std::string Get(const std::string &key, const std::string &fallback) const;
  double GetDouble(const std::string &key) const;
  double GetDouble(const std::string &key, double fallback) const;
  int64_t GetInt(const std::string &key) const;
  int64_t GetInt(const std::string &key, int64_t fallback) const;
  bool GetBool(const std::string &key, bool fallback) const;
  /// Comma-separated list; empty value gives an empty list.
  std::vector<std::string> GetList(const std::string &key) const;

  /// Keys starting with `prefix.`, with the prefix removed.
  KeyValues Section(const std::string &prefix) const;
  const std::map<std::string, std::string> &entries() const { return map_; }

 private:
  std::map<std::string, std::string> map_;
};

/// FNV-1a 64-bit hash.
uint64_t Fnv1a64(std::string_view bytes);
std::string HexHash(uint64_t h);

std::string FormatDouble(double v);

}  // namespace ascene

#endif  // ASCENE_KEYVALUE_H_
