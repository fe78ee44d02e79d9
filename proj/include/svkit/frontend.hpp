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

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "svkit/dsp.hpp"
#include "svkit/wav.hpp"

namespace svkit {

enum class FeatureKind { kMfb, kEncoderLatent, kHiddenState };

inline std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::kMfb: return "mfb";
    case FeatureKind::kEncoderLatent: return "encoder-latent";
    case FeatureKind::kHiddenState: return "hidden-state";
  }
  return "unknown";
}

/// Time-major frame matrix: row t is the feature vector of frame t.
struct FeatureSequence {
  Eigen::MatrixXd frames;     // T x F
  double frame_shift = 0.01;  // seconds
  double frame_length = 0.025;
  FeatureKind kind = FeatureKind::kMfb;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

struct MfbConfig {
  int n_mels = 64;
  double frame_length = 0.025;  // seconds
  double frame_shift = 0.010;   // seconds
  double f_min = 20.0;          // Hz
  double f_max = 3700.0;        // Hz
  double log_floor = 1e-10;
};

/// Per-frame speech/non-speech flags aligned with a FeatureSequence.
using VadMask = std::vector<bool>;

inline double hz_to_mel(double f) {
  return 2595.0 * std::log10(1.0 + f / 700.0);
}

inline double mel_to_hz(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

/// Center frequencies (Hz) of the triangular mel filters.
inline std::vector<double> mel_center_frequencies(const MfbConfig& cfg) {
  std::vector<double> centers(static_cast<size_t>(cfg.n_mels));
  double mlo = hz_to_mel(cfg.f_min), mhi = hz_to_mel(cfg.f_max);
  for (int m = 0; m < cfg.n_mels; ++m) {
    centers[static_cast<size_t>(m)] =
        mel_to_hz(mlo + (mhi - mlo) * (m + 1) / (cfg.n_mels + 1));
  }
  return centers;
}

namespace fbdetail {

/// Triangular filter matrix, n_mels x (nfft/2 + 1), HTK mel scale.
inline Eigen::MatrixXd mel_filterbank(const MfbConfig& cfg, int sample_rate,
                                      size_t nfft) {
  const int nbins = static_cast<int>(nfft / 2) + 1;
  double mlo = hz_to_mel(cfg.f_min), mhi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(static_cast<size_t>(cfg.n_mels) + 2);
  for (int m = 0; m < cfg.n_mels + 2; ++m)
    edges[static_cast<size_t>(m)] =
        mel_to_hz(mlo + (mhi - mlo) * m / (cfg.n_mels + 1));
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, nbins);
  for (int k = 0; k < nbins; ++k) {
    double f = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double lo = edges[static_cast<size_t>(m)];
      double c = edges[static_cast<size_t>(m) + 1];
      double hi = edges[static_cast<size_t>(m) + 2];
      if (f > lo && f < c) {
        fb(m, k) = (f - lo) / (c - lo);
      } else if (f >= c && f < hi) {
        fb(m, k) = (hi - f) / (hi - c);
      }
    }
  }
  return fb;
}

}  // namespace fbdetail

/// Log mel-filterbank features: Hann window, no pre-emphasis, FFT size the
/// next power of two above the window, natural log with an additive floor.
/// An empty or too-short waveform yields zero frames.
inline FeatureSequence compute_mfb(const Waveform& w, const MfbConfig& cfg) {
  require(cfg.n_mels >= 1, "compute_mfb: n_mels must be >= 1");
  require(w.sample_rate > 0, "compute_mfb: invalid sample rate");
  require(cfg.f_min >= 0 && cfg.f_min < cfg.f_max,
          "compute_mfb: need 0 <= f_min < f_max");
  require(cfg.f_max <= w.sample_rate / 2.0,
          "compute_mfb: f_max exceeds Nyquist");
  require(cfg.log_floor > 0, "compute_mfb: log_floor must be positive");

  const size_t win = static_cast<size_t>(
      std::lrint(cfg.frame_length * w.sample_rate));
  const size_t hop = static_cast<size_t>(
      std::lrint(cfg.frame_shift * w.sample_rate));
  require(win > 0 && hop > 0, "compute_mfb: frame geometry too small");

  FeatureSequence out;
  out.frame_shift = cfg.frame_shift;
  out.frame_length = cfg.frame_length;
  out.kind = FeatureKind::kMfb;

  const size_t n = w.samples.size();
  const Eigen::Index t_count =
      n >= win ? static_cast<Eigen::Index>((n - win) / hop) + 1 : 0;
  out.frames.resize(t_count, cfg.n_mels);
  if (t_count == 0) return out;

  const size_t nfft = next_power_of_two(win);
  const Eigen::MatrixXd fb = fbdetail::mel_filterbank(cfg, w.sample_rate, nfft);
  const std::vector<double> window = hann_window(win);

  std::vector<double> frame(win);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    const size_t off = static_cast<size_t>(t) * hop;
    for (size_t i = 0; i < win; ++i)
      frame[i] = w.samples[off + i] * window[i];
    std::vector<double> p = power_spectrum(frame, nfft);
    Eigen::Map<const Eigen::VectorXd> pv(p.data(),
                                         static_cast<Eigen::Index>(p.size()));
    Eigen::VectorXd mel = fb * pv;
    for (int m = 0; m < cfg.n_mels; ++m)
      out.frames(t, m) = std::log(mel(m) + cfg.log_floor);
  }
  return out;
}

/// Subtracts the mean over a centered sliding window (truncated at the
/// edges). Sequences no longer than the window get global mean subtraction.
inline FeatureSequence sliding_mean_normalize(const FeatureSequence& f,
                                              double window_sec = 3.0) {
  require(window_sec > 0, "sliding_mean_normalize: window must be positive");
  FeatureSequence out = f;
  const Eigen::Index t_count = f.num_frames();
  if (t_count == 0) return out;

  if (static_cast<double>(t_count) * f.frame_shift <= window_sec) {
    out.frames.rowwise() -= f.frames.colwise().mean();
    return out;
  }
  const Eigen::Index wf = static_cast<Eigen::Index>(
      std::lrint(window_sec / f.frame_shift));
  const Eigen::Index half_lo = (wf - 1) / 2, half_hi = wf / 2;
  for (Eigen::Index t = 0; t < t_count; ++t) {
    Eigen::Index lo = std::max<Eigen::Index>(0, t - half_lo);
    Eigen::Index hi = std::min(t_count - 1, t + half_hi);
    out.frames.row(t) =
        f.frames.row(t) -
        f.frames.middleRows(lo, hi - lo + 1).colwise().mean();
  }
  return out;
}

/// Per-frame log energy: log-sum-exp over mel bins of an un-normalized MFB
/// frame, i.e. the log of the summed mel power plus floors.
inline Eigen::VectorXd frame_log_energies(const FeatureSequence& f) {
  Eigen::VectorXd e(f.num_frames());
  for (Eigen::Index t = 0; t < f.num_frames(); ++t) {
    double m = f.frames.row(t).maxCoeff();
    double s = (f.frames.row(t).array() - m).exp().sum();
    e(t) = m + std::log(s);
  }
  return e;
}

/// Energy VAD over un-normalized MFB frames: a frame is speech iff its log
/// energy exceeds both (max log energy - offset_db) and the numerical
/// silence floor. Frames of an all-silent utterance are never speech.
inline VadMask energy_vad(const FeatureSequence& f, double offset_db,
                          double log_floor = 1e-10) {
  require(f.num_frames() > 0, "energy_vad: empty feature sequence");
  require(offset_db > 0, "energy_vad: offset must be positive");
  Eigen::VectorXd e = frame_log_energies(f);
  const double offset_nats = offset_db * std::log(10.0) / 10.0;
  const double silence_floor =
      std::log(static_cast<double>(f.dim()) * log_floor);
  const double thr = std::max(e.maxCoeff() - offset_nats, silence_floor);
  VadMask mask(static_cast<size_t>(f.num_frames()));
  for (Eigen::Index t = 0; t < f.num_frames(); ++t)
    mask[static_cast<size_t>(t)] = e(t) > thr;
  return mask;
}

/// Keeps only samples covered by speech frames (frame t claims
/// [t*hop, t*hop+win)) and concatenates them. Returns the input unchanged
/// when it is too short for a single frame.
inline Waveform vad_filter_samples(const Waveform& w, const MfbConfig& cfg,
                                   double offset_db) {
  FeatureSequence f = compute_mfb(w, cfg);
  if (f.num_frames() == 0) return w;
  VadMask mask = energy_vad(f, offset_db, cfg.log_floor);
  const size_t win =
      static_cast<size_t>(std::lrint(cfg.frame_length * w.sample_rate));
  const size_t hop =
      static_cast<size_t>(std::lrint(cfg.frame_shift * w.sample_rate));
  std::vector<char> keep(w.samples.size(), 0);
  for (size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    size_t lo = t * hop;
    size_t hi = std::min(lo + win, w.samples.size());
    for (size_t i = lo; i < hi; ++i) keep[i] = 1;
  }
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.reserve(w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i)
    if (keep[i]) out.samples.push_back(w.samples[i]);
  return out;
}

}  // namespace svkit
