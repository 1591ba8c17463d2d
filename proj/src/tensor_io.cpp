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

#include "actrt/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace actrt {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts unsupported");

namespace {

using nlohmann::json;

struct RawFile {
  json manifest;
  std::vector<float> blob;
};

int64_t shape_elems(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw IoError("tensor shape entries must be positive");
    n *= d;
  }
  return n;
}

void write_raw(const std::string& path, const json& manifest,
               const std::vector<float>& blob) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  const std::string text = manifest.dump();
  const uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path);
}

RawFile read_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw IoError("truncated header: " + path);
  if (len == 0 || len > (1ull << 30)) throw IoError("implausible manifest size: " + path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated manifest: " + path);
  RawFile raw;
  try {
    raw.manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad manifest json: ") + e.what());
  }
  std::vector<char> bytes(std::istreambuf_iterator<char>(in), {});
  if (bytes.size() % sizeof(float) != 0) {
    throw IoError("blob size is not a multiple of 4 bytes: " + path);
  }
  raw.blob.resize(bytes.size() / sizeof(float));
  std::memcpy(raw.blob.data(), bytes.data(), bytes.size());
  return raw;
}

std::vector<TensorInfo> parse_tensor_table(const json& manifest, uint64_t blob_bytes) {
  std::vector<TensorInfo> out;
  try {
    for (const auto& t : manifest.at("tensors")) {
      TensorInfo info;
      info.name = t.at("name").get<std::string>();
      info.shape = t.at("shape").get<std::vector<int64_t>>();
      info.offset = t.at("offset").get<uint64_t>();
      info.dtype = t.at("dtype").get<std::string>();
      if (info.dtype != "f32") throw IoError("unsupported dtype: " + info.dtype);
      const uint64_t end =
          info.offset + static_cast<uint64_t>(shape_elems(info.shape)) * sizeof(float);
      if (info.offset % sizeof(float) != 0 || end > blob_bytes) {
        throw IoError("tensor " + info.name + " falls outside the blob");
      }
      out.push_back(std::move(info));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("bad tensor table: ") + e.what());
  }
  return out;
}

std::span<const float> tensor_data(const RawFile& raw, const TensorInfo& info) {
  return {raw.blob.data() + info.offset / sizeof(float),
          static_cast<size_t>(info.elem_count())};
}

const TensorInfo& find_tensor(const std::vector<TensorInfo>& table,
                              const std::string& name) {
  const auto it = std::find_if(table.begin(), table.end(),
                               [&](const TensorInfo& t) { return t.name == name; });
  if (it == table.end()) throw IoError("missing tensor: " + name);
  return *it;
}

}  // namespace

int64_t TensorInfo::elem_count() const { return shape_elems(shape); }

TensorFileSummary inspect_tensor_file(const std::string& path) {
  const RawFile raw = read_raw(path);
  TensorFileSummary summary;
  summary.blob_bytes = raw.blob.size() * sizeof(float);
  summary.tensors = parse_tensor_table(raw.manifest, summary.blob_bytes);
  json meta = raw.manifest;
  meta.erase("tensors");
  summary.meta_json = meta.dump();
  return summary;
}

void save_head_params(const std::string& path, const HeadParamsF& params) {
  params.validate();
  json manifest;
  manifest["H"] = params.hidden_width;
  manifest["N"] = params.chunk_size;
  manifest["A"] = params.action_dim;
  manifest["eps"] = static_cast<double>(params.eps);
  manifest["output_activation"] = to_string(params.output_activation);
  json table = json::array();
  std::vector<float> blob;
  auto add = [&](const std::string& name, std::vector<int64_t> shape,
                 const std::vector<float>& values) {
    json t;
    t["name"] = name;
    t["shape"] = shape;
    t["offset"] = blob.size() * sizeof(float);
    t["dtype"] = "f32";
    table.push_back(t);
    blob.insert(blob.end(), values.begin(), values.end());
  };
  for (int s = 0; s < HeadParamsF::kStages; ++s) {
    const std::string idx = std::to_string(s + 1);
    add("W" + idx, {params.hidden_width, params.out_width(s)}, params.weight[s]);
    add("b" + idx, {params.out_width(s)}, params.bias[s]);
    add("gamma" + idx, {params.hidden_width}, params.gamma[s]);
    add("beta" + idx, {params.hidden_width}, params.beta[s]);
  }
  manifest["tensors"] = table;
  write_raw(path, manifest, blob);
}

HeadParamsF load_head_params(const std::string& path) {
  const RawFile raw = read_raw(path);
  HeadParamsF p;
  try {
    p.hidden_width = raw.manifest.at("H").get<int>();
    p.chunk_size = raw.manifest.at("N").get<int>();
    p.action_dim = raw.manifest.at("A").get<int>();
    p.eps = static_cast<float>(raw.manifest.at("eps").get<double>());
    p.output_activation =
        output_activation_from_string(raw.manifest.at("output_activation").get<std::string>());
  } catch (const json::exception& e) {
    throw IoError(std::string("bad weights manifest: ") + e.what());
  }
  const auto table = parse_tensor_table(raw.manifest, raw.blob.size() * sizeof(float));
  auto read_tensor = [&](const std::string& name, size_t expect) {
    const TensorInfo& info = find_tensor(table, name);
    const auto data = tensor_data(raw, info);
    if (data.size() != expect) {
      throw IoError("tensor " + name + " has unexpected size");
    }
    return std::vector<float>(data.begin(), data.end());
  };
  for (int s = 0; s < HeadParamsF::kStages; ++s) {
    const std::string idx = std::to_string(s + 1);
    const size_t h = static_cast<size_t>(p.hidden_width);
    const size_t out = static_cast<size_t>(p.out_width(s));
    p.weight[s] = read_tensor("W" + idx, h * out);
    p.bias[s] = read_tensor("b" + idx, out);
    p.gamma[s] = read_tensor("gamma" + idx, h);
    p.beta[s] = read_tensor("beta" + idx, h);
  }
  p.validate();
  return p;
}

void ReplayFile::save(const std::string& path) const {
  json manifest;
  manifest["H"] = hidden_width;
  json table = json::array();
  std::vector<float> blob;
  for (const auto& [step, mat] : steps) {
    if (mat.cols != hidden_width) {
      throw ShapeMismatch("replay step width differs from manifest H");
    }
    json t;
    t["name"] = "h_act/" + std::to_string(step);
    t["shape"] = std::vector<int64_t>{mat.rows, mat.cols};
    t["offset"] = blob.size() * sizeof(float);
    t["dtype"] = "f32";
    table.push_back(t);
    blob.insert(blob.end(), mat.data.begin(), mat.data.end());
  }
  manifest["tensors"] = table;
  write_raw(path, manifest, blob);
}

ReplayFile ReplayFile::load(const std::string& path) {
  const RawFile raw = read_raw(path);
  ReplayFile replay;
  try {
    replay.hidden_width = raw.manifest.at("H").get<int>();
  } catch (const json::exception& e) {
    throw IoError(std::string("bad replay manifest: ") + e.what());
  }
  if (replay.hidden_width <= 0) throw IoError("replay manifest H must be positive");
  const auto table = parse_tensor_table(raw.manifest, raw.blob.size() * sizeof(float));
  for (const auto& info : table) {
    constexpr std::string_view prefix = "h_act/";
    if (info.name.rfind(prefix, 0) != 0) continue;
    int64_t step = 0;
    try {
      step = std::stoll(info.name.substr(prefix.size()));
    } catch (const std::exception&) {
      throw IoError("bad replay tensor name: " + info.name);
    }
    if (info.shape.size() != 2 || info.shape[1] != replay.hidden_width) {
      throw IoError("replay tensor " + info.name + " must have shape [tokens, H]");
    }
    Mat<float> mat(static_cast<int>(info.shape[0]), static_cast<int>(info.shape[1]));
    const auto data = tensor_data(raw, info);
    std::copy(data.begin(), data.end(), mat.data.begin());
    replay.steps.emplace_back(step, std::move(mat));
  }
  if (replay.steps.empty()) throw IoError("replay file holds no h_act tensors");
  std::sort(replay.steps.begin(), replay.steps.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return replay;
}

}  // namespace actrt
