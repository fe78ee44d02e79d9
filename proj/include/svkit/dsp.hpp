// Copyright (c) 2026 The svkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <complex>
#include <vector>

#include "svkit/common.hpp"

namespace svkit {

inline bool is_power_of_two(size_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline size_t next_power_of_two(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place iterative radix-2 FFT. Size must be a power of two.
/// With inverse=true computes the unscaled inverse; divide by n yourself.
inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
  const size_t n = a.size();
  require(is_power_of_two(n), "fft: size must be a power of two");
  // bit reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

/// Hann window, symmetric form 0.5 - 0.5*cos(2*pi*n/(N-1)).
inline std::vector<double> hann_window(size_t n) {
  std::vector<double> w(n, 1.0);
  if (n > 1) {
    for (size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  }
  return w;
}

/// One-sided power spectrum of a real frame zero-padded to nfft (pow2).
/// Returns nfft/2 + 1 values |X_k|^2.
inline std::vector<double> power_spectrum(const std::vector<double>& frame,
                                          size_t nfft) {
  require(is_power_of_two(nfft), "power_spectrum: nfft must be a power of two");
  require(frame.size() <= nfft, "power_spectrum: frame longer than nfft");
  std::vector<std::complex<double>> x(nfft, {0.0, 0.0});
  for (size_t i = 0; i < frame.size(); ++i) x[i] = frame[i];
  fft(x);
  std::vector<double> p(nfft / 2 + 1);
  for (size_t k = 0; k <= nfft / 2; ++k) p[k] = std::norm(x[k]);
  return p;
}

/// Full linear convolution, direct form. Output length n + m - 1.
inline std::vector<double> convolve_full(const std::vector<double>& x,
                                         const std::vector<double>& h) {
  require(!x.empty() && !h.empty(), "convolve_full: empty input");
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    double xi = x[i];
    if (xi == 0.0) continue;
    for (size_t j = 0; j < h.size(); ++j) y[i + j] += xi * h[j];
  }
  return y;
}

/// Weighted overlap-add STFT filter: applies `edit` to the complex spectrum
/// of every frame and resynthesizes. Same Hann window on analysis and
/// synthesis with window-square normalization, which reconstructs exactly
/// when `edit` is the identity. Output length equals input length.
template <typename EditFn>
std::vector<double> stft_filter(const std::vector<double>& x, size_t win,
                                size_t hop, EditFn&& edit) {
  require(is_power_of_two(win), "stft_filter: window must be a power of two");
  require(hop > 0 && hop <= win, "stft_filter: invalid hop");
  const size_t n = x.size();
  // Pad one full window on each side so every input sample gets complete
  // window coverage, then round up so frames tile the padded signal.
  size_t padded = n + 2 * win;
  if ((padded - win) % hop != 0) padded += hop - (padded - win) % hop;
  std::vector<double> xp(padded, 0.0);
  for (size_t i = 0; i < n; ++i) xp[win + i] = x[i];

  const std::vector<double> w = hann_window(win);
  std::vector<double> acc(padded, 0.0), den(padded, 0.0);
  std::vector<std::complex<double>> spec(win);
  for (size_t t = 0; t + win <= padded; t += hop) {
    for (size_t i = 0; i < win; ++i) spec[i] = xp[t + i] * w[i];
    fft(spec);
    edit(spec);
    fft(spec, /*inverse=*/true);
    for (size_t i = 0; i < win; ++i) {
      double yi = spec[i].real() / static_cast<double>(win);
      acc[t + i] += w[i] * yi;
      den[t + i] += w[i] * w[i];
    }
  }
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i] = den[win + i] > 0.0 ? acc[win + i] / den[win + i] : 0.0;
  }
  return out;
}

}  // namespace svkit
