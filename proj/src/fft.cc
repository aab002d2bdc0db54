// fft.cc

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

#include "ascene/fft.h"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <utility>

namespace ascene {

namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface
// is. Plans live for the process lifetime.
std::mutex &PlannerMutex() {
  static std::mutex m;
  return m;
}

std::pair<fftw_plan, fftw_plan> PlansFor(size_t n) {
  static std::map<size_t, std::pair<fftw_plan, fftw_plan>> cache;
  std::lock_guard<std::mutex> lock(PlannerMutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double *r = fftw_alloc_real(n);
  fftw_complex *c = fftw_alloc_complex(n / 2 + 1);
  int ni = static_cast<int>(n);
  fftw_plan f = fftw_plan_dft_r2c_1d(ni, r, c, FFTW_ESTIMATE);
  fftw_plan b = fftw_plan_dft_c2r_1d(ni, c, r, FFTW_ESTIMATE);
  fftw_free(r);
  fftw_free(c);
  cache.emplace(n, std::make_pair(f, b));
  return {f, b};
}

}  // namespace

RealFft::RealFft(size_t n) : n_(n) {
  auto plans = PlansFor(n);
  forward_plan_ = plans.first;
  inverse_plan_ = plans.second;
  real_ = fftw_alloc_real(n);
  complex_ = fftw_alloc_complex(n / 2 + 1);
}

RealFft::~RealFft() {
  fftw_free(real_);
  fftw_free(complex_);
}

void RealFft::Forward(std::span<const double> in, std::span<std::complex<double>> out) {
  std::copy(in.begin(), in.begin() + n_, real_);
  auto *c = static_cast<fftw_complex *>(complex_);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), real_, c);
  for (size_t k = 0; k < bins(); ++k) out[k] = {c[k][0], c[k][1]};
}

void RealFft::Inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  auto *c = static_cast<fftw_complex *>(complex_);
  for (size_t k = 0; k < bins(); ++k) {
    c[k][0] = in[k].real();
    c[k][1] = in[k].imag();
  }
  // c2r destroys its input; the copy above keeps the caller's data intact.
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), c, real_);
  std::copy(real_, real_ + n_, out.begin());
}

size_t NextPow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> FftConvolve(std::span<const double> x, std::span<const double> h,
                                size_t length) {
  std::vector<double> y(length, 0.0);
  if (x.empty() || h.empty() || length == 0) return y;
  // Only the first `length` outputs are needed, so x can be cut there.
  size_t xlen = std::min(x.size(), length);
  size_t n = NextPow2(std::max<size_t>(xlen + h.size() - 1, 2));
  RealFft fft(n);
  std::vector<double> a(n, 0.0), b(n, 0.0), out(n);
  std::copy(x.begin(), x.begin() + xlen, a.begin());
  std::copy(h.begin(), h.end(), b.begin());
  std::vector<std::complex<double>> fa(fft.bins()), fb(fft.bins());
  fft.Forward(a, fa);
  fft.Forward(b, fb);
  for (size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.Inverse(fa, out);
  size_t keep = std::min(length, xlen + h.size() - 1);
  for (size_t i = 0; i < keep; ++i) y[i] = out[i] / static_cast<double>(n);
  return y;
}

}  // namespace ascene
