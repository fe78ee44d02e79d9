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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>
#include <vector>

#include "support/oracles.hpp"
#include "svkit/common.hpp"
#include "svkit/dsp.hpp"

TEST_CASE("fft matches the naive dft on random input") {
  svkit::Rng rng(31);
  for (size_t n : {2, 8, 64, 256}) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    std::vector<std::complex<double>> fx(x.begin(), x.end());
    svkit::fft(fx);
    std::vector<std::complex<double>> ref = oracle::dft(x);
    for (size_t k = 0; k < n; ++k) {
      REQUIRE(std::abs(fx[k] - ref[k]) < 1e-9 * static_cast<double>(n));
    }
  }
}

TEST_CASE("inverse fft recovers the signal after scaling") {
  svkit::Rng rng(32);
  const size_t n = 128;
  std::vector<std::complex<double>> x(n);
  for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  std::vector<std::complex<double>> y = x;
  svkit::fft(y);
  svkit::fft(y, /*inverse=*/true);
  for (size_t i = 0; i < n; ++i) {
    REQUIRE(std::abs(y[i] / static_cast<double>(n) - x[i]) < 1e-12);
  }
}

TEST_CASE("fft rejects non-power-of-two sizes") {
  std::vector<std::complex<double>> x(12, {1.0, 0.0});
  REQUIRE_THROWS_AS(svkit::fft(x), svkit::Error);
}

TEST_CASE("power spectrum of a pure bin-aligned tone is a single spike") {
  const size_t n = 64;
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = std::cos(2.0 * svkit::kPi * 4.0 * static_cast<double>(i) /
                    static_cast<double>(n));
  }
  std::vector<double> p = svkit::power_spectrum(x, n);
  REQUIRE(p.size() == n / 2 + 1);
  // |X_4| = n/2 for a unit cosine at bin 4
  REQUIRE(p[4] == Catch::Approx(std::pow(n / 2.0, 2.0)).margin(1e-6));
  for (size_t k = 0; k < p.size(); ++k) {
    if (k != 4) REQUIRE(p[k] < 1e-12);
  }
}

TEST_CASE("hann window is symmetric with endpoints at zero") {
  std::vector<double> w = svkit::hann_window(400);
  REQUIRE(w.size() == 400);
  REQUIRE(w.front() == 0.0);
  REQUIRE(w.back() == Catch::Approx(0.0).margin(1e-12));
  for (size_t i = 0; i < w.size(); ++i) {
    REQUIRE(w[i] == Catch::Approx(w[w.size() - 1 - i]).margin(1e-12));
  }
  // midpoint of an odd window is exactly 1
  std::vector<double> w5 = svkit::hann_window(5);
  REQUIRE(w5[2] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("convolve_full matches the direct definition") {
  svkit::Rng rng(33);
  std::vector<double> x(37), h(9);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  for (double& v : h) v = rng.uniform(-1.0, 1.0);
  std::vector<double> got = svkit::convolve_full(x, h);
  std::vector<double> want = oracle::convolve(x, h);
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    REQUIRE(got[i] == Catch::Approx(want[i]).margin(1e-12));
  }
}

TEST_CASE("stft filter with identity edit reconstructs the signal") {
  svkit::Rng rng(34);
  for (size_t n : {100, 511, 512, 513, 2048}) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    std::vector<double> y = svkit::stft_filter(
        x, 512, 128, [](std::vector<std::complex<double>>&) {});
    REQUIRE(y.size() == n);
    for (size_t i = 0; i < n; ++i) {
      REQUIRE(std::abs(y[i] - x[i]) < 1e-10);
    }
  }
}

TEST_CASE("stft filter zeroing a band removes that tone") {
  const int sr = 16000;
  const size_t n = sr;  // 1 s
  std::vector<double> x(n);
  // 1 kHz + 3 kHz mixture
  for (size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / sr;
    x[i] = std::sin(2.0 * svkit::kPi * 1000.0 * t) +
           std::sin(2.0 * svkit::kPi * 3000.0 * t);
  }
  const size_t win = 512;
  std::vector<double> y = svkit::stft_filter(
      x, win, win / 4, [&](std::vector<std::complex<double>>& spec) {
        // zero 2.5..3.5 kHz including conjugate bins
        for (size_t k = 0; k <= win / 2; ++k) {
          double f = static_cast<double>(k) * sr / static_cast<double>(win);
          if (f >= 2500.0 && f <= 3500.0) {
            spec[k] = 0.0;
            if (k > 0 && k < win / 2) spec[win - k] = 0.0;
          }
        }
      });
  double e1_in = oracle::tone_energy(x, 1000.0, sr);
  double e3_in = oracle::tone_energy(x, 3000.0, sr);
  double e1_out = oracle::tone_energy(y, 1000.0, sr);
  double e3_out = oracle::tone_energy(y, 3000.0, sr);
  REQUIRE(e1_out > 0.99 * e1_in);   // survivor intact
  REQUIRE(e3_out < 1e-4 * e3_in);   // masked tone gone
}
