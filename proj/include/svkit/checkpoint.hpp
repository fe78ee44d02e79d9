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
//
// "SVCK" checkpoint container: magic, u32 version, config JSON block, named
// float32 tensors, CRC32 trailer over everything before it. Matrices are
// stored column-major. All integers little-endian.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "svkit/common.hpp"
#include "svkit/tensor.hpp"

namespace svkit {

namespace ckdetail {

inline void put_u16(std::string& b, uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& b, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(b, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  std::string what;

  Reader(const std::string& b, std::string context)
      : buf(b), what(std::move(context)) {}

  void need(size_t n) const {
    require(pos + n <= buf.size(), what + ": truncated file");
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint8_t>(buf[pos]) |
                 (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

inline uint32_t crc_of(const std::string& b, size_t len) {
  return static_cast<uint32_t>(
      ::crc32(0ul, reinterpret_cast<const Bytef*>(b.data()),
              static_cast<uInt>(len)));
}

inline std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), std::string(what) + ": cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return buf;
}

inline void write_file(const std::string& path, const std::string& buf,
                       const char* what) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), std::string(what) + ": cannot open " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), std::string(what) + ": write failed for " + path);
}

}  // namespace ckdetail

constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  struct Entry {
    std::string name;
    int rank = 0;            // 1 or 2
    Eigen::MatrixXd mat;     // rank 2
    Eigen::VectorXd vec;     // rank 1
  };
  std::string config_json;
  std::vector<Entry> tensors;
};

inline void write_checkpoint(const std::string& path,
                             const std::string& config_json,
                             const std::vector<TensorRef>& refs) {
  using namespace ckdetail;
  std::string b;
  b.append("SVCK");
  put_u32(b, kCheckpointVersion);
  put_u64(b, config_json.size());
  b.append(config_json);
  put_u32(b, static_cast<uint32_t>(refs.size()));
  for (const TensorRef& r : refs) {
    require(!r.name.empty() && r.name.size() <= 0xffff,
            "write_checkpoint: bad tensor name length for '" + r.name + "'");
    put_u16(b, static_cast<uint16_t>(r.name.size()));
    b.append(r.name);
    if (r.mat) {
      put_u32(b, 2);
      put_u64(b, static_cast<uint64_t>(r.mat->rows()));
      put_u64(b, static_cast<uint64_t>(r.mat->cols()));
      const double* data = r.mat->data();  // column-major
      for (Eigen::Index i = 0; i < r.mat->size(); ++i) {
        require(std::isfinite(data[i]),
                "write_checkpoint: non-finite value in " + r.name);
        put_f32(b, static_cast<float>(data[i]));
      }
    } else {
      put_u32(b, 1);
      put_u64(b, static_cast<uint64_t>(r.vec->size()));
      for (Eigen::Index i = 0; i < r.vec->size(); ++i) {
        require(std::isfinite((*r.vec)(i)),
                "write_checkpoint: non-finite value in " + r.name);
        put_f32(b, static_cast<float>((*r.vec)(i)));
      }
    }
  }
  put_u32(b, crc_of(b, b.size()));
  write_file(path, b, "write_checkpoint");
}

inline Checkpoint read_checkpoint(const std::string& path) {
  using namespace ckdetail;
  const std::string buf = read_file(path, "read_checkpoint");
  require(buf.size() >= 4 + 4 + 8 + 4 + 4, "read_checkpoint: truncated file");
  const uint32_t want_crc = crc_of(buf, buf.size() - 4);
  Reader tail(buf, "read_checkpoint");
  tail.pos = buf.size() - 4;
  require(tail.u32() == want_crc,
          "read_checkpoint: checksum mismatch in " + path);

  Reader r(buf, "read_checkpoint");
  require(r.bytes(4) == "SVCK", "read_checkpoint: bad magic in " + path);
  const uint32_t version = r.u32();
  require(version == kCheckpointVersion,
          "read_checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  const uint64_t config_len = r.u64();
  require(config_len <= buf.size(), "read_checkpoint: bad config length");
  ck.config_json = r.bytes(config_len);

  const uint32_t count = r.u32();
  for (uint32_t t = 0; t < count; ++t) {
    Checkpoint::Entry e;
    const uint16_t name_len = r.u16();
    require(name_len > 0, "read_checkpoint: empty tensor name");
    e.name = r.bytes(name_len);
    e.rank = static_cast<int>(r.u32());
    require(e.rank == 1 || e.rank == 2,
            "read_checkpoint: bad rank for " + e.name);
    if (e.rank == 2) {
      const uint64_t rows = r.u64(), cols = r.u64();
      require(rows > 0 && cols > 0 && rows * cols <= (buf.size() / 4) + 1,
              "read_checkpoint: bad dims for " + e.name);
      e.mat.resize(static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
      double* data = e.mat.data();
      for (uint64_t i = 0; i < rows * cols; ++i)
        data[i] = static_cast<double>(r.f32());
    } else {
      const uint64_t n = r.u64();
      require(n > 0 && n <= (buf.size() / 4) + 1,
              "read_checkpoint: bad dims for " + e.name);
      e.vec.resize(static_cast<Eigen::Index>(n));
      for (uint64_t i = 0; i < n; ++i)
        e.vec(static_cast<Eigen::Index>(i)) = static_cast<double>(r.f32());
    }
    for (const Checkpoint::Entry& prev : ck.tensors)
      require(prev.name != e.name,
              "read_checkpoint: duplicate tensor " + e.name);
    ck.tensors.push_back(std::move(e));
  }
  require(r.pos == buf.size() - 4,
          "read_checkpoint: trailing bytes in " + path);
  for (const Checkpoint::Entry& e : ck.tensors) {
    const bool ok = e.rank == 2 ? e.mat.allFinite() : e.vec.allFinite();
    require(ok, "read_checkpoint: non-finite value in " + e.name);
  }
  return ck;
}

/// Copies checkpoint tensors into the referenced weights by name. Every ref
/// must be present with matching shape; extra checkpoint tensors are errors.
inline void apply_checkpoint(const Checkpoint& ck,
                             const std::vector<TensorRef>& refs) {
  require(ck.tensors.size() == refs.size(),
          "apply_checkpoint: tensor count mismatch (file has " +
              std::to_string(ck.tensors.size()) + ", model wants " +
              std::to_string(refs.size()) + ")");
  for (const TensorRef& ref : refs) {
    const Checkpoint::Entry* found = nullptr;
    for (const Checkpoint::Entry& e : ck.tensors) {
      if (e.name == ref.name) {
        found = &e;
        break;
      }
    }
    require(found != nullptr, "apply_checkpoint: missing tensor " + ref.name);
    if (ref.mat) {
      require(found->rank == 2 && found->mat.rows() == ref.mat->rows() &&
                  found->mat.cols() == ref.mat->cols(),
              "apply_checkpoint: shape mismatch for " + ref.name);
      *ref.mat = found->mat;
    } else {
      require(found->rank == 1 && found->vec.size() == ref.vec->size(),
              "apply_checkpoint: shape mismatch for " + ref.name);
      *ref.vec = found->vec;
    }
  }
}

}  // namespace svkit
