// Copyright 2026 The vidpriv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VIDPRIV_COMMON_HPP_
#define VIDPRIV_COMMON_HPP_

#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace vidpriv {

/// Invalid shapes, ranges or combinations passed to an operation.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed annotation or dataset files. Messages name the offending record.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration keys or values. Messages name the key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite losses or gradients during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint, table and trace I/O failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  return os.str();
}

}  // namespace detail

template <typename E = ArgumentError, typename... Args>
inline void require(bool cond, Args&&... msg) {
  if (!cond) throw E(detail::concat(std::forward<Args>(msg)...));
}

/// SplitMix64 finalizer; used to derive independent seeds from (seed, tag...) tuples.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed) { return mix64(seed); }

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Rest... rest) {
  return derive_seed(mix64(seed ^ mix64(tag)), static_cast<std::uint64_t>(rest)...);
}

/// Stream tags for derive_seed. Keeping them apart keeps the random streams
/// of different training phases independent of each other.
enum class Stream : std::uint64_t {
  kData = 1,
  kSplit,
  kAnonymizerInit,
  kTargetInit,
  kBudgetInit,
  kAttackerInit,
  kTargetBatches,
  kBudgetBatches,
  kAdversaryBatches,
  kAttackerBatches,
  kCrop,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream s) {
  return derive_seed(seed, static_cast<std::uint64_t>(s));
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream s, Rest... rest) {
  return derive_seed(seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(rest)...);
}

using Rng = std::mt19937_64;

/// Uniform integer in [0, n). Plain modulo on the raw engine output so the draw
/// sequence does not depend on the standard library's distribution code.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

/// Uniform real in [0, 1) built from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// FNV-1a over raw bytes. Used to fingerprint parameter sets.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001B3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

}  // namespace vidpriv

#endif  // VIDPRIV_COMMON_HPP_
