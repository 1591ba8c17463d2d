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

#include "actrt/action.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace actrt {

namespace {

constexpr double kZeroNormThreshold = 1e-12;
constexpr double kRangeSlack = 1e-9;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

double& Action::operator[](int i) {
  switch (i) {
    case 0: return dx;
    case 1: return dy;
    case 2: return dz;
    case 3: return dphi;
    case 4: return dtheta;
    case 5: return dpsi;
    case 6: return g;
    default: throw OutOfRange("action index out of range");
  }
}

double Action::operator[](int i) const {
  return const_cast<Action&>(*this)[i];
}

std::array<double, Action::kDims> Action::to_array() const {
  return {dx, dy, dz, dphi, dtheta, dpsi, g};
}

Action Action::from_array(const std::array<double, kDims>& v) {
  Action a;
  for (int i = 0; i < kDims; ++i) a[i] = v[i];
  return a;
}

Action Action::from_span(std::span<const double> v) {
  if (v.size() != kDims) {
    throw LengthMismatch("action vector must have exactly 7 entries");
  }
  Action a;
  for (int i = 0; i < kDims; ++i) a[i] = v[i];
  return a;
}

std::string to_string(NormRange r) {
  return r == NormRange::kUnit ? "unit" : "symmetric";
}

NormRange norm_range_from_string(const std::string& s) {
  if (s == "unit") return NormRange::kUnit;
  if (s == "symmetric") return NormRange::kSymmetric;
  throw InvalidInput("unknown normalization range: " + s);
}

void NormalizationStats::validate() const {
  for (int d = 0; d < Action::kContinuousDims; ++d) {
    if (!(q_low[d] < q_high[d])) {
      throw DegenerateDimension("stats dimension " + std::to_string(d) +
                                " has q_low >= q_high");
    }
  }
}

std::string NormalizationStats::to_json_string() const {
  nlohmann::json j;
  j["q_low"] = q_low;
  j["q_high"] = q_high;
  j["range"] = to_string(range);
  return j.dump();
}

NormalizationStats NormalizationStats::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad stats json: ") + e.what());
  }
  NormalizationStats s;
  try {
    auto lo = j.at("q_low").get<std::vector<double>>();
    auto hi = j.at("q_high").get<std::vector<double>>();
    if (lo.size() != Action::kContinuousDims || hi.size() != Action::kContinuousDims) {
      throw IoError("stats arrays must have 6 entries");
    }
    std::copy(lo.begin(), lo.end(), s.q_low.begin());
    std::copy(hi.begin(), hi.end(), s.q_high.begin());
    s.range = norm_range_from_string(j.at("range").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad stats json: ") + e.what());
  }
  s.validate();
  return s;
}

void NormalizationStats::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << to_json_string() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

NormalizationStats NormalizationStats::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

NormalizationStats compute_stats(const std::vector<Action>& dataset,
                                 NormRange range) {
  if (dataset.empty()) throw EmptyDataset("compute_stats on empty dataset");
  NormalizationStats s;
  s.range = range;
  std::vector<double> values(dataset.size());
  for (int d = 0; d < Action::kContinuousDims; ++d) {
    for (size_t i = 0; i < dataset.size(); ++i) values[i] = dataset[i][d];
    std::sort(values.begin(), values.end());
    s.q_low[d] = percentile_sorted(values, 1.0);
    s.q_high[d] = percentile_sorted(values, 99.0);
    if (!(s.q_low[d] < s.q_high[d])) {
      throw DegenerateDimension("dimension " + std::to_string(d) +
                                " has no spread between the 1st and 99th percentile");
    }
  }
  return s;
}

Action normalize_action(const Action& a, const NormalizationStats& s) {
  s.validate();
  Action out = a;
  for (int d = 0; d < Action::kContinuousDims; ++d) {
    const double t = clamp01((a[d] - s.q_low[d]) / (s.q_high[d] - s.q_low[d]));
    out[d] = s.range == NormRange::kUnit ? t : 2.0 * t - 1.0;
  }
  return out;
}

Action denormalize_action(const Action& a_norm, const NormalizationStats& s) {
  s.validate();
  const double lo = s.range == NormRange::kUnit ? 0.0 : -1.0;
  Action out = a_norm;
  for (int d = 0; d < Action::kContinuousDims; ++d) {
    double v = a_norm[d];
    if (v < lo - kRangeSlack || v > 1.0 + kRangeSlack) {
      throw OutOfRange("normalized dim " + std::to_string(d) + " = " +
                       std::to_string(v) + " outside [" + std::to_string(lo) + ", 1]");
    }
    v = std::clamp(v, lo, 1.0);
    const double t = s.range == NormRange::kUnit ? v : (v + 1.0) / 2.0;
    out[d] = s.q_low[d] + t * (s.q_high[d] - s.q_low[d]);
  }
  out.g = a_norm.g >= 0.5 ? 1.0 : 0.0;
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw LengthMismatch("cosine_similarity on vectors of different length");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  const bool u_zero = nu < kZeroNormThreshold;
  const bool v_zero = nv < kZeroNormThreshold;
  if (u_zero || v_zero) return (u_zero && v_zero) ? 1.0 : 0.0;
  return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

double cosine_similarity(const Action& u, const Action& v) {
  const auto au = u.to_array();
  const auto av = v.to_array();
  return cosine_similarity(std::span<const double>(au), std::span<const double>(av));
}

}  // namespace actrt
