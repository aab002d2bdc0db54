// ascene/fft.h

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

#ifndef ASCENE_FFT_H_
#define ASCENE_FFT_H_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ascene {

/// Real-input FFT of a fixed size, backed by FFTW. Plans are shared per size;
/// each instance owns its own scratch buffers, so separate instances may be
/// used from separate threads.
class RealFft {
 public:
  explicit RealFft(size_t n);
  ~RealFft();
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;

  size_t size() const { return n_; }
  size_t bins() const { return n_ / 2 + 1; }

  /// out must hold bins() values.
  void Forward(std::span<const double> in, std::span<std::complex<double>> out);
  /// Unnormalized inverse: Inverse(Forward(x)) == n * x.
  void Inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  size_t n_;
  double *real_ = nullptr;
  void *complex_ = nullptr;
  void *forward_plan_ = nullptr;
  void *inverse_plan_ = nullptr;
};

/// Linear convolution of x and h, truncated to the first `length` samples.
std::vector<double> FftConvolve(std::span<const double> x, std::span<const double> h,
                                size_t length);

/// Smallest power of two >= n.
size_t NextPow2(size_t n);

}  // namespace ascene

#endif  // ASCENE_FFT_H_
