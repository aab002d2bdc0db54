// src/tensor.cc

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

#include "ascene/tensor.h"

#include <cmath>
#include <functional>
#include <numeric>

#include "ascene/error.h"

namespace ascene {

size_t NumElements(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1}, std::multiplies<size_t>());
}

std::string ShapeString(const Shape &shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

bool Tensor::AllFinite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor SliceBatch(const Tensor &x, size_t begin, size_t count) {
  if (x.rank() == 0 || begin + count > x.dim(0))
    throw ShapeError("slice_batch: rows out of range for " + ShapeString(x.shape));
  Shape s = x.shape;
  s[0] = count;
  Tensor out(s);
  size_t stride = x.dim(0) ? x.size() / x.dim(0) : 0;
  std::copy(x.values.begin() + begin * stride, x.values.begin() + (begin + count) * stride,
            out.values.begin());
  return out;
}

}  // namespace ascene
