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

#ifndef VIDPRIV_TESTS_TEST_UTIL_HPP_
#define VIDPRIV_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <functional>
#include <vector>

#include "vidpriv/common.hpp"
#include "vidpriv/data.hpp"
#include "vidpriv/models.hpp"

namespace vidpriv::test {

inline ClipTensor random_clip(Rng& rng, int t, int w, int h, int c, double lo = 0.1, double hi = 0.9) {
  ClipTensor clip(t, w, h, c);
  for (auto& v : clip.values()) v = static_cast<float>(lo + (hi - lo) * uniform01(rng));
  return clip;
}

/// ||a - b|| / max(||a||, ||b||), or 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double den = std::sqrt(std::max(na, nb));
  return den == 0 ? 0 : std::sqrt(d) / den;
}

/// Loss value plus the activation pattern it was computed in.
struct Probe {
  double loss = 0;
  std::uint64_t pattern = 0;
};

/// Central differences of `eval` w.r.t. every entry of `values`. Entries whose
/// +/- step crosses a ReLU or clamp boundary are marked not kept: the loss has
/// a kink there and the difference quotient is not the derivative.
struct NumericGrad {
  std::vector<double> grad;
  std::vector<bool> kept;
  std::size_t num_kept() const { return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true)); }
};

template <typename S>
NumericGrad numeric_grad(std::span<S> values, double step, std::uint64_t base_pattern,
                         const std::function<Probe()>& eval) {
  NumericGrad out{std::vector<double>(values.size()), std::vector<bool>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const S orig = values[i];
    values[i] = orig + static_cast<S>(step);
    const Probe up = eval();
    values[i] = orig - static_cast<S>(step);
    const Probe down = eval();
    values[i] = orig;
    out.grad[i] = (up.loss - down.loss) / (2 * step);
    out.kept[i] = up.pattern == base_pattern && down.pattern == base_pattern;
  }
  return out;
}

/// relative_error restricted to the kept coordinates.
template <typename S>
double relative_error(std::span<const S> analytic, const NumericGrad& num) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    if (num.kept[i]) {
      a.push_back(static_cast<double>(analytic[i]));
      b.push_back(num.grad[i]);
    }
  return relative_error(a, b);
}

}  // namespace vidpriv::test

#endif  // VIDPRIV_TESTS_TEST_UTIL_HPP_
