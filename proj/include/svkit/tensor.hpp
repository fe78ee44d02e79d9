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

#include "svkit/common.hpp"

namespace svkit {

/// Named view onto one model tensor. Model types expose their parameters as
/// a flat list of these so initialization, serialization and the optimizer
/// can iterate without knowing the model structure.
struct TensorRef {
  std::string name;
  Eigen::MatrixXd* mat = nullptr;
  Eigen::VectorXd* vec = nullptr;
};

inline TensorRef make_ref(std::string name, Eigen::MatrixXd& m) {
  TensorRef r;
  r.name = std::move(name);
  r.mat = &m;
  return r;
}

inline TensorRef make_ref(std::string name, Eigen::VectorXd& v) {
  TensorRef r;
  r.name = std::move(name);
  r.vec = &v;
  return r;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Shared initialization rule: matrices get normal entries scaled by
/// 1/sqrt(fan_in) where fan_in is the column count (every matrix here maps
/// an input of `cols` features to `rows` outputs); layer-norm gains start at
/// one, every other vector (biases) at zero. Each tensor draws from its own
/// seed stream keyed by name, so the result does not depend on visit order.
inline void init_tensors(const std::vector<TensorRef>& refs, uint64_t seed) {
  for (const TensorRef& r : refs) {
    if (r.mat) {
      require(r.mat->cols() > 0 && r.mat->rows() > 0,
              "init_tensors: empty matrix " + r.name);
      Rng rng(derive_seed(seed, r.name));
      const double scale =
          1.0 / std::sqrt(static_cast<double>(r.mat->cols()));
      for (Eigen::Index i = 0; i < r.mat->rows(); ++i)
        for (Eigen::Index j = 0; j < r.mat->cols(); ++j)
          (*r.mat)(i, j) = scale * rng.normal();
    } else {
      require(r.vec != nullptr, "init_tensors: null ref " + r.name);
      if (ends_with(r.name, ".gain"))
        r.vec->setOnes();
      else
        r.vec->setZero();
    }
  }
}

/// Total scalar parameter count over a ref list.
inline uint64_t parameter_count(const std::vector<TensorRef>& refs) {
  uint64_t n = 0;
  for (const TensorRef& r : refs)
    n += static_cast<uint64_t>(r.mat ? r.mat->size() : r.vec->size());
  return n;
}

}  // namespace svkit
