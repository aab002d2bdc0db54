// include/ascene/tensor.h

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

#ifndef ASCENE_TENSOR_H_
#define ASCENE_TENSOR_H_

#include <cstddef>
#include <new>
#include <string>
#include <vector>

namespace ascene {

/// 64-byte aligned storage: vectorized reductions then see the same
/// alignment on every run, so results are bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U> &) {}
  T *allocate(size_t n) { return static_cast<T *>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T *p, size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U> &) const { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;
using Shape = std::vector<size_t>;

size_t NumElements(const Shape &shape);
std::string ShapeString(const Shape &shape);

/// Dense row-major tensor of doubles. Image batches are NCHW, with H the
/// time axis and W the frequency axis.
struct Tensor {
  Shape shape;
  Buffer values;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), values(NumElements(shape), fill) {}

  size_t size() const { return values.size(); }
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const { return shape.at(i); }
  double *data() { return values.data(); }
  const double *data() const { return values.data(); }
  double &operator[](size_t i) { return values[i]; }
  double operator[](size_t i) const { return values[i]; }

  bool AllFinite() const;
  /// Per-sample shape (everything after the batch axis).
  Shape SampleShape() const { return Shape(shape.begin() + (shape.empty() ? 0 : 1), shape.end()); }
};

/// Batch of `samples` taken from rows [begin, begin + count) of x.
Tensor SliceBatch(const Tensor &x, size_t begin, size_t count);

}  // namespace ascene

#endif  // ASCENE_TENSOR_H_
