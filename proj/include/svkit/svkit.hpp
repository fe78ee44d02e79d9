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

#include "svkit/archive.hpp"
#include "svkit/augment.hpp"
#include "svkit/checkpoint.hpp"
#include "svkit/common.hpp"
#include "svkit/config.hpp"
#include "svkit/dsp.hpp"
#include "svkit/encoder.hpp"
#include "svkit/frontend.hpp"
#include "svkit/head.hpp"
#include "svkit/metrics.hpp"
#include "svkit/pipeline.hpp"
#include "svkit/scoring.hpp"
#include "svkit/tensor.hpp"
#include "svkit/trainer.hpp"
#include "svkit/wav.hpp"
