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

#ifndef ACTRT_COMMON_HPP_
#define ACTRT_COMMON_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace actrt {

// Error hierarchy. Each contract violation named in a module interface has
// its own type so callers can test for the precise failure.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define ACTRT_DEFINE_ERROR(NAME)      \
  struct NAME : Error {               \
    using Error::Error;               \
  }

// action module
ACTRT_DEFINE_ERROR(EmptyDataset);
ACTRT_DEFINE_ERROR(DegenerateDimension);
ACTRT_DEFINE_ERROR(LengthMismatch);
ACTRT_DEFINE_ERROR(OutOfRange);
// head module
ACTRT_DEFINE_ERROR(InvalidDims);
ACTRT_DEFINE_ERROR(NonFiniteInput);
ACTRT_DEFINE_ERROR(ShapeMismatch);
ACTRT_DEFINE_ERROR(Diverged);
// policy module
ACTRT_DEFINE_ERROR(NoActToken);
// ensemble module
ACTRT_DEFINE_ERROR(NonMonotonicStep);
ACTRT_DEFINE_ERROR(MissingCurrent);
ACTRT_DEFINE_ERROR(EmptyCandidates);
// sim module
ACTRT_DEFINE_ERROR(EpisodeOver);
// bench module
ACTRT_DEFINE_ERROR(InvalidInput);
ACTRT_DEFINE_ERROR(MissingBaseline);
// file I/O
ACTRT_DEFINE_ERROR(IoError);

#undef ACTRT_DEFINE_ERROR

// Minimal row-major matrix used for hidden states and logits.
template <typename T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, T(0)) {}

  T* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const T* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  T& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  T at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives a substream seed from a root seed and a component tag. All
// randomness in the project flows from one root seed through these.
uint64_t derive_seed(uint64_t root, std::string_view tag);
uint64_t derive_seed(uint64_t root, uint64_t a, uint64_t b = 0, uint64_t c = 0);

// Deterministic scalar generators over mt19937_64. The standard
// distributions are implementation-defined, so the transforms live here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(gen_() % static_cast<uint64_t>(hi - lo + 1));
  }

  // standard normal via Box-Muller; the spare value is cached
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Linear-interpolation percentile of a sorted sample, p in [0, 100].
double percentile_sorted(std::span<const double> sorted, double p);

}  // namespace actrt

#endif  // ACTRT_COMMON_HPP_
