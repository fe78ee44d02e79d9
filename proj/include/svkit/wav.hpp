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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "svkit/common.hpp"

namespace svkit {

/// Raw mono audio. Samples live in [-1, 1] after decode.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

struct ChunkSpec {
  double min_dur;  // seconds
  double max_dur;  // seconds
};

namespace wavdetail {

inline uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

inline void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& s, uint32_t v) {
  put_u16(s, static_cast<uint16_t>(v & 0xffff));
  put_u16(s, static_cast<uint16_t>(v >> 16));
}

}  // namespace wavdetail

/// Decodes a RIFF/WAVE file. Accepts mono PCM 16-bit or IEEE float-32 only;
/// 16-bit sample v maps to v/32768, float samples are clamped to [-1, 1].
inline Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "read_wav: cannot open file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  require(buf.size() >= 12, "read_wav: truncated container: " + path);
  require(std::memcmp(buf.data(), "RIFF", 4) == 0 &&
              std::memcmp(buf.data() + 8, "WAVE", 4) == 0,
          "read_wav: not a RIFF/WAVE file: " + path);

  using wavdetail::read_u16;
  using wavdetail::read_u32;

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  size_t data_off = 0, data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* hdr = buf.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_len > buf.size())
      throw Error("read_wav: truncated chunk in: " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      require(chunk_len >= 16, "read_wav: malformed fmt chunk: " + path);
      format = read_u16(buf.data() + body);
      channels = read_u16(buf.data() + body + 2);
      sample_rate = read_u32(buf.data() + body + 4);
      bits = read_u16(buf.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  require(have_fmt, "read_wav: missing fmt chunk: " + path);
  require(data_off != 0 || data_len != 0,
          "read_wav: missing data chunk: " + path);
  if (channels != 1)
    throw Error("read_wav: unsupported channel count " +
                std::to_string(channels) + " in: " + path);
  require(sample_rate > 0, "read_wav: invalid sample rate in: " + path);

  Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  const unsigned char* d = buf.data() + data_off;
  if (format == 1 && bits == 16) {
    size_t n = data_len / 2;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t v = static_cast<int16_t>(read_u16(d + 2 * i));
      w.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    size_t n = data_len / 4;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      uint32_t u = read_u32(d + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      require(std::isfinite(f), "read_wav: non-finite sample in: " + path);
      w.samples[i] = std::clamp(static_cast<double>(f), -1.0, 1.0);
    }
  } else {
    throw Error("read_wav: unsupported encoding (format " +
                std::to_string(format) + ", " + std::to_string(bits) +
                " bits) in: " + path);
  }
  return w;
}

/// Writes 16-bit PCM. Roundtrip through read_wav reproduces samples within
/// one quantization step (1/32768).
inline void write_wav(const Waveform& w, const std::string& path) {
  require(w.sample_rate > 0, "write_wav: invalid sample rate");
  std::string out;
  using wavdetail::put_u16;
  using wavdetail::put_u32;
  uint32_t data_len = static_cast<uint32_t>(w.samples.size() * 2);
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(w.sample_rate));
  put_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);  // byte rate
  put_u16(out, 2);                                         // block align
  put_u16(out, 16);                                        // bits
  out.append("data");
  put_u32(out, data_len);
  for (double s : w.samples) {
    double q = std::lrint(s * 32768.0);
    q = std::clamp(q, -32768.0, 32767.0);
    put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "write_wav: cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  require(f.good(), "write_wav: write failed: " + path);
}

/// Crops a random contiguous chunk with duration uniform in
/// [min_dur, min(max_dur, duration)] and start uniform over valid offsets.
inline Waveform random_chunk(const Waveform& w, const ChunkSpec& spec,
                             Rng& rng) {
  require(spec.min_dur > 0 && spec.min_dur <= spec.max_dur,
          "random_chunk: invalid chunk spec");
  require(w.sample_rate > 0, "random_chunk: invalid sample rate");
  int64_t n = static_cast<int64_t>(w.samples.size());
  int64_t min_n =
      static_cast<int64_t>(std::ceil(spec.min_dur * w.sample_rate));
  int64_t max_n = std::min(
      n, static_cast<int64_t>(std::floor(spec.max_dur * w.sample_rate)));
  if (n < min_n || min_n > max_n)
    throw Error("random_chunk: waveform shorter than minimum chunk (" +
                std::to_string(w.duration()) + " s < " +
                std::to_string(spec.min_dur) + " s)");
  int64_t len = min_n + static_cast<int64_t>(rng.uniform_int(
                            static_cast<uint64_t>(max_n - min_n + 1)));
  int64_t start = static_cast<int64_t>(
      rng.uniform_int(static_cast<uint64_t>(n - len + 1)));
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + start, w.samples.begin() + start + len);
  return out;
}

}  // namespace svkit
