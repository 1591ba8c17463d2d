// Copyright 2025 The actrt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ACTRT_TENSOR_IO_HPP_
#define ACTRT_TENSOR_IO_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "actrt/common.hpp"
#include "actrt/head.hpp"

namespace actrt {

// Tensor files hold a little-endian u64 manifest length, a JSON manifest,
// then a raw blob of little-endian f32 values. Manifest offsets are byte
// offsets into the blob. Weights files carry the head dimensions in the
// manifest; replay files carry per-step hidden states named "h_act/<step>".

struct TensorInfo {
  std::string name;
  std::vector<int64_t> shape;
  uint64_t offset = 0;  // bytes into the blob
  std::string dtype = "f32";

  int64_t elem_count() const;
};

struct TensorFileSummary {
  std::string meta_json;  // manifest without the tensor table
  std::vector<TensorInfo> tensors;
  uint64_t blob_bytes = 0;
};

// Parses and validates the manifest and blob framing of any tensor file.
TensorFileSummary inspect_tensor_file(const std::string& path);

void save_head_params(const std::string& path, const HeadParamsF& params);
HeadParamsF load_head_params(const std::string& path);

// Captured backbone outputs for offline replay: one tokens x H matrix of
// action-token hidden states per prediction step.
struct ReplayFile {
  int hidden_width = 0;
  std::vector<std::pair<int64_t, Mat<float>>> steps;  // ordered by step

  void save(const std::string& path) const;
  static ReplayFile load(const std::string& path);
};

}  // namespace actrt

#endif  // ACTRT_TENSOR_IO_HPP_
