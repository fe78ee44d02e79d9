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
// "SVEB" embedding archive: magic, u32 version, u32 dim, u64 count, then per
// record a u16 id byte length, the UTF-8 id, and dim float32 little-endian
// values. Version 2 inserts a u16-length feature_kind string after count and
// is used for per-frame feature dumps (record ids "<utt>#<frame>").

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "svkit/checkpoint.hpp"
#include "svkit/common.hpp"
#include "svkit/frontend.hpp"
#include "svkit/head.hpp"

namespace svkit {

namespace archdetail {

inline void check_record(const SpeakerEmbedding& e, Eigen::Index dim) {
  require(!e.utt.empty() && e.utt.size() <= 0xffff,
          "embedding archive: bad id length for '" + e.utt + "'");
  require(e.vector.size() == dim,
          "embedding archive: dim mismatch for " + e.utt);
  require(e.vector.allFinite(),
          "embedding archive: non-finite values for " + e.utt);
}

inline std::string serialize(const std::vector<SpeakerEmbedding>& records,
                             uint32_t version,
                             const std::string& feature_kind) {
  using namespace ckdetail;
  require(!records.empty(), "embedding archive: no records");
  const Eigen::Index dim = records.front().vector.size();
  require(dim > 0, "embedding archive: zero-dim vectors");
  std::string b;
  b.append("SVEB");
  put_u32(b, version);
  put_u32(b, static_cast<uint32_t>(dim));
  put_u64(b, records.size());
  if (version == 2) {
    require(feature_kind.size() <= 0xffff,
            "embedding archive: feature kind too long");
    put_u16(b, static_cast<uint16_t>(feature_kind.size()));
    b.append(feature_kind);
  }
  for (const SpeakerEmbedding& e : records) {
    check_record(e, dim);
    put_u16(b, static_cast<uint16_t>(e.utt.size()));
    b.append(e.utt);
    for (Eigen::Index i = 0; i < dim; ++i)
      put_f32(b, static_cast<float>(e.vector(i)));
  }
  return b;
}

struct Parsed {
  uint32_t version = 0;
  std::string feature_kind;
  std::vector<SpeakerEmbedding> records;
};

inline Parsed parse(const std::string& path) {
  using namespace ckdetail;
  const std::string buf = read_file(path, "read embedding archive");
  Reader r(buf, "embedding archive " + path);
  require(buf.size() >= 4 + 4 + 4 + 8, "embedding archive: truncated file " + path);
  require(r.bytes(4) == "SVEB", "embedding archive: bad magic in " + path);
  Parsed out;
  out.version = r.u32();
  require(out.version == 1 || out.version == 2,
          "embedding archive: unsupported version " +
              std::to_string(out.version) + " in " + path);
  const uint32_t dim = r.u32();
  const uint64_t count = r.u64();
  require(dim > 0, "embedding archive: zero dim in " + path);
  require(count > 0, "embedding archive: empty archive " + path);
  if (out.version == 2) out.feature_kind = r.bytes(r.u16());
  out.records.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    SpeakerEmbedding e;
    const uint16_t id_len = r.u16();
    require(id_len > 0, "embedding archive: empty id in " + path);
    e.utt = r.bytes(id_len);
    e.vector.resize(dim);
    for (uint32_t d = 0; d < dim; ++d)
      e.vector(d) = static_cast<double>(r.f32());
    require(e.vector.allFinite(),
            "embedding archive: non-finite values for " + e.utt);
    out.records.push_back(std::move(e));
  }
  require(r.pos == buf.size(),
          "embedding archive: trailing bytes in " + path);
  return out;
}

}  // namespace archdetail

inline void write_embeddings(const std::vector<SpeakerEmbedding>& records,
                             const std::string& path) {
  ckdetail::write_file(path, archdetail::serialize(records, 1, ""),
                       "write_embeddings");
}

inline std::vector<SpeakerEmbedding> read_embeddings(const std::string& path) {
  archdetail::Parsed p = archdetail::parse(path);
  require(p.version == 1, "read_embeddings: " + path +
                              " is a feature dump (version 2), not an "
                              "embedding archive");
  return std::move(p.records);
}

struct FeatureDump {
  std::string feature_kind;
  std::vector<SpeakerEmbedding> frames;  // ids "<utt>#<frame>"
};

inline void write_feature_dump(
    const std::vector<std::pair<std::string, FeatureSequence>>& items,
    const std::string& path) {
  require(!items.empty(), "write_feature_dump: no items");
  const std::string kind = to_string(items.front().second.kind);
  std::vector<SpeakerEmbedding> frames;
  for (const auto& [utt, seq] : items) {
    require(to_string(seq.kind) == kind,
            "write_feature_dump: mixed feature kinds");
    require(seq.num_frames() > 0, "write_feature_dump: no frames for " + utt);
    for (Eigen::Index t = 0; t < seq.num_frames(); ++t) {
      SpeakerEmbedding e;
      e.utt = utt + "#" + std::to_string(t);
      e.vector = seq.frames.row(t).transpose();
      frames.push_back(std::move(e));
    }
  }
  ckdetail::write_file(path, archdetail::serialize(frames, 2, kind),
                       "write_feature_dump");
}

inline FeatureDump read_feature_dump(const std::string& path) {
  archdetail::Parsed p = archdetail::parse(path);
  require(p.version == 2, "read_feature_dump: " + path +
                              " is an embedding archive (version 1), not a "
                              "feature dump");
  FeatureDump d;
  d.feature_kind = std::move(p.feature_kind);
  d.frames = std::move(p.records);
  return d;
}

}  // namespace svkit
