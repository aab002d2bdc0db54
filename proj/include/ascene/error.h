// ascene/error.h

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

#ifndef ASCENE_ERROR_H_
#define ASCENE_ERROR_H_

#include <stdexcept>
#include <string>

namespace ascene {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user configuration: unknown key, malformed value, inconsistent sizes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An upstream file a command depends on does not exist.
class MissingArtifactError : public Error {
 public:
  explicit MissingArtifactError(const std::string &path)
      : Error("missing artifact: " + path), path_(path) {}
  const std::string &path() const { return path_; }

 private:
  std::string path_;
};

/// Non-finite loss, gradient, or activation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Tensor or matrix dimensions that do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace ascene

#endif  // ASCENE_ERROR_H_
