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

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "svkit/dsp.hpp"
#include "svkit/wav.hpp"

namespace svkit {

/// Online raw-audio augmentation policy. Each type is applied independently
/// with its own probability; parameter ranges are sampled uniformly.
struct AugmentPolicy {
  double p_noise = 0.25;
  double p_rir = 0.25;
  double p_freq_mask = 0.25;
  double p_time_mask = 0.25;
  double p_clip = 0.25;
  std::array<double, 2> snr_range_db = {0.0, 20.0};
  std::array<double, 2> freq_mask_width_hz = {50.0, 800.0};
  std::array<double, 2> time_mask_frac = {0.0, 0.1};
  std::array<double, 2> clip_lower_pct = {0.0, 40.0};
  std::array<double, 2> clip_upper_pct = {60.0, 100.0};
  size_t stft_win = 512;
  std::vector<Waveform> noise_pool;
  std::vector<Waveform> rir_pool;

  void validate() const {
    for (double p : {p_noise, p_rir, p_freq_mask, p_time_mask, p_clip})
      require(p >= 0.0 && p <= 1.0, "augment policy: probability outside [0,1]");
    require(snr_range_db[0] <= snr_range_db[1],
            "augment policy: snr range inverted");
    require(freq_mask_width_hz[0] >= 0 &&
                freq_mask_width_hz[0] <= freq_mask_width_hz[1],
            "augment policy: freq mask width range invalid");
    require(time_mask_frac[0] >= 0 && time_mask_frac[0] <= time_mask_frac[1] &&
                time_mask_frac[1] <= 1.0,
            "augment policy: time mask fraction range invalid");
    require(clip_lower_pct[0] >= 0 && clip_lower_pct[1] < clip_upper_pct[0] &&
                clip_upper_pct[1] <= 100.0,
            "augment policy: clip percentile ranges invalid");
    require(p_noise == 0.0 || !noise_pool.empty(),
            "augment policy: noise enabled but noise pool empty");
    require(p_rir == 0.0 || !rir_pool.empty(),
            "augment policy: rir enabled but rir pool empty");
  }
};

inline double mean_power(const std::vector<double>& s) {
  double p = 0.0;
  for (double v : s) p += v * v;
  return s.empty() ? 0.0 : p / static_cast<double>(s.size());
}

/// Adds `noise` (looped or cropped to length) scaled so the speech-to-noise
/// power ratio equals snr_db; the sum is clamped to [-1, 1].
inline Waveform mix_noise_at_snr(const Waveform& w, const Waveform& noise,
                                 double snr_db) {
  require(noise.sample_rate == w.sample_rate,
          "mix_noise_at_snr: sample rate mismatch");
  require(!noise.samples.empty(), "mix_noise_at_snr: empty noise");
  const double p_sig = mean_power(w.samples);
  require(p_sig > 0.0, "mix_noise_at_snr: zero-power signal");

  std::vector<double> n(w.samples.size());
  for (size_t i = 0; i < n.size(); ++i)
    n[i] = noise.samples[i % noise.samples.size()];
  const double p_noise = mean_power(n);
  require(p_noise > 0.0, "mix_noise_at_snr: zero-power noise");

  const double gain = std::sqrt(p_sig / (p_noise * std::pow(10.0, snr_db / 10.0)));
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  for (size_t i = 0; i < n.size(); ++i)
    out.samples[i] = std::clamp(w.samples[i] + gain * n[i], -1.0, 1.0);
  return out;
}

/// Convolves with a room impulse response, truncates to the input length and
/// rescales so the peak matches the input's peak.
inline Waveform convolve_rir(const Waveform& w, const Waveform& rir) {
  require(rir.sample_rate == w.sample_rate,
          "convolve_rir: sample rate mismatch");
  require(!rir.samples.empty(), "convolve_rir: empty rir");
  require(!w.samples.empty(), "convolve_rir: empty waveform");
  std::vector<double> y = convolve_full(w.samples, rir.samples);
  y.resize(w.samples.size());
  double peak_in = 0.0, peak_out = 0.0;
  for (double v : w.samples) peak_in = std::max(peak_in, std::abs(v));
  for (double v : y) peak_out = std::max(peak_out, std::abs(v));
  require(peak_out > 0.0, "convolve_rir: convolution produced silence");
  const double scale = peak_in / peak_out;
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(y.size());
  for (size_t i = 0; i < y.size(); ++i) out.samples[i] = y[i] * scale;
  return out;
}

/// Zeroes STFT bins inside [center - width/2, center + width/2] in every
/// frame and resynthesizes by weighted overlap-add. Width 0 degenerates to a
/// perfect-reconstruction roundtrip.
inline Waveform freq_mask(const Waveform& w, double center_hz, double width_hz,
                          size_t stft_win = 512) {
  require(width_hz >= 0, "freq_mask: negative width");
  const double nyquist = w.sample_rate / 2.0;
  require(center_hz - width_hz / 2.0 > 0 && center_hz + width_hz / 2.0 < nyquist,
          "freq_mask: band outside (0, Nyquist)");
  const double f_lo = center_hz - width_hz / 2.0;
  const double f_hi = center_hz + width_hz / 2.0;
  const double bin_hz = static_cast<double>(w.sample_rate) /
                        static_cast<double>(stft_win);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = stft_filter(
      w.samples, stft_win, stft_win / 4,
      [&](std::vector<std::complex<double>>& spec) {
        for (size_t k = 1; k < stft_win / 2; ++k) {
          double f = static_cast<double>(k) * bin_hz;
          if (f >= f_lo && f <= f_hi) {
            spec[k] = 0.0;
            spec[stft_win - k] = 0.0;
          }
        }
      });
  return out;
}

/// Zeroes the samples in [start, start + span) seconds.
inline Waveform time_mask(const Waveform& w, double start_sec,
                          double span_sec) {
  require(start_sec >= 0 && span_sec >= 0, "time_mask: negative span");
  require(start_sec + span_sec <= w.duration() + 1e-12,
          "time_mask: span outside waveform");
  size_t lo = static_cast<size_t>(std::lrint(start_sec * w.sample_rate));
  size_t hi = static_cast<size_t>(
      std::lrint((start_sec + span_sec) * w.sample_rate));
  hi = std::min(hi, w.samples.size());
  Waveform out = w;
  for (size_t i = lo; i < hi; ++i) out.samples[i] = 0.0;
  return out;
}

/// Linear-interpolation percentile of a sample set (numpy convention).
inline double percentile(std::vector<double> v, double pct) {
  require(!v.empty(), "percentile: empty input");
  require(pct >= 0.0 && pct <= 100.0, "percentile: out of range");
  std::sort(v.begin(), v.end());
  double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

/// Clamps amplitudes to the [lower_pct, upper_pct] percentiles of the input
/// distribution, then rescales back to the original peak. All-zero input is
/// returned unchanged.
inline Waveform clip_distort(const Waveform& w, double lower_pct,
                             double upper_pct) {
  require(lower_pct >= 0 && lower_pct < upper_pct && upper_pct <= 100.0,
          "clip_distort: invalid percentile bounds");
  double peak_in = 0.0;
  for (double v : w.samples) peak_in = std::max(peak_in, std::abs(v));
  if (peak_in == 0.0) return w;

  const double lo = percentile(w.samples, lower_pct);
  const double hi = percentile(w.samples, upper_pct);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  double peak_clipped = 0.0;
  for (size_t i = 0; i < w.samples.size(); ++i) {
    out.samples[i] = std::clamp(w.samples[i], lo, hi);
    peak_clipped = std::max(peak_clipped, std::abs(out.samples[i]));
  }
  if (peak_clipped > 0.0) {
    const double scale = peak_in / peak_clipped;
    for (double& v : out.samples) v *= scale;
  }
  return out;
}

/// One applied augmentation and the parameters it was drawn with.
struct AppliedAugment {
  std::string type;
  size_t pool_index = 0;       // noise / rir
  double snr_db = 0.0;         // noise
  double center_hz = 0.0;      // freq mask
  double width_hz = 0.0;       // freq mask
  double start_sec = 0.0;      // time mask
  double span_sec = 0.0;       // time mask
  double lower_pct = 0.0;      // clip
  double upper_pct = 100.0;    // clip
};

using AugmentRecord = std::vector<AppliedAugment>;

/// Draws one independent Bernoulli per augmentation type and applies the
/// selected ones in the fixed order noise -> rir -> freq mask -> time mask ->
/// clip. Pure function of (waveform, policy, seed).
inline Waveform apply_policy(const Waveform& w, const AugmentPolicy& policy,
                             uint64_t seed, AugmentRecord* record = nullptr) {
  policy.validate();
  Rng rng(derive_seed(seed, "augment.policy"));
  // All Bernoulli draws happen up front so the parameter stream for each
  // applied type does not depend on which other types fired.
  const bool do_noise = rng.bernoulli(policy.p_noise);
  const bool do_rir = rng.bernoulli(policy.p_rir);
  const bool do_fmask = rng.bernoulli(policy.p_freq_mask);
  const bool do_tmask = rng.bernoulli(policy.p_time_mask);
  const bool do_clip = rng.bernoulli(policy.p_clip);

  Waveform out = w;
  if (record) record->clear();

  if (do_noise) {
    AppliedAugment a;
    a.type = "noise";
    a.pool_index = rng.uniform_int(policy.noise_pool.size());
    a.snr_db = rng.uniform(policy.snr_range_db[0], policy.snr_range_db[1]);
    out = mix_noise_at_snr(out, policy.noise_pool[a.pool_index], a.snr_db);
    if (record) record->push_back(a);
  }
  if (do_rir) {
    AppliedAugment a;
    a.type = "rir";
    a.pool_index = rng.uniform_int(policy.rir_pool.size());
    out = convolve_rir(out, policy.rir_pool[a.pool_index]);
    if (record) record->push_back(a);
  }
  if (do_fmask) {
    AppliedAugment a;
    a.type = "freq_mask";
    const double nyquist = w.sample_rate / 2.0;
    double max_width = std::min(policy.freq_mask_width_hz[1], nyquist - 2.0);
    double min_width = std::min(policy.freq_mask_width_hz[0], max_width);
    a.width_hz = rng.uniform(min_width, max_width);
    a.center_hz = rng.uniform(a.width_hz / 2.0 + 1.0,
                              nyquist - a.width_hz / 2.0 - 1.0);
    out = freq_mask(out, a.center_hz, a.width_hz, policy.stft_win);
    if (record) record->push_back(a);
  }
  if (do_tmask) {
    AppliedAugment a;
    a.type = "time_mask";
    double frac = rng.uniform(policy.time_mask_frac[0], policy.time_mask_frac[1]);
    a.span_sec = frac * w.duration();
    a.start_sec = rng.uniform(0.0, w.duration() - a.span_sec);
    out = time_mask(out, a.start_sec, a.span_sec);
    if (record) record->push_back(a);
  }
  if (do_clip) {
    AppliedAugment a;
    a.type = "clip";
    a.lower_pct = rng.uniform(policy.clip_lower_pct[0], policy.clip_lower_pct[1]);
    a.upper_pct = rng.uniform(policy.clip_upper_pct[0], policy.clip_upper_pct[1]);
    out = clip_distort(out, a.lower_pct, a.upper_pct);
    if (record) record->push_back(a);
  }
  return out;
}

/// Seeded white-noise pool entry for tests and synthetic setups.
inline Waveform make_white_noise(int sample_rate, double duration_sec,
                                 uint64_t seed, double amplitude = 0.3) {
  Rng rng(derive_seed(seed, "augment.white_noise"));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(static_cast<size_t>(duration_sec * sample_rate));
  for (double& s : w.samples)
    s = std::clamp(amplitude * rng.normal(), -1.0, 1.0);
  return w;
}

/// Synthetic room impulse response: exponentially decaying white noise with
/// a unit direct path, parameterized by the T60 reverberation time.
inline Waveform make_synthetic_rir(int sample_rate, double t60_sec,
                                   uint64_t seed) {
  require(t60_sec > 0, "make_synthetic_rir: t60 must be positive");
  Rng rng(derive_seed(seed, "augment.rir"));
  Waveform rir;
  rir.sample_rate = sample_rate;
  size_t n = static_cast<size_t>(t60_sec * sample_rate);
  rir.samples.resize(std::max<size_t>(n, 1));
  const double decay = std::log(1000.0) / (t60_sec * sample_rate);
  rir.samples[0] = 1.0;
  for (size_t i = 1; i < rir.samples.size(); ++i)
    rir.samples[i] =
        0.3 * rng.normal() * std::exp(-decay * static_cast<double>(i));
  return rir;
}

}  // namespace svkit
