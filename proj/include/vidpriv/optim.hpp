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

// First-order parameter updates.

#ifndef VIDPRIV_OPTIM_HPP_
#define VIDPRIV_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "vidpriv/common.hpp"
#include "vidpriv/models.hpp"

namespace vidpriv {

enum class UpdateRule { kAdam, kSgd };

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for one parameter set. Kept in double regardless of S.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::int64_t t = 0;

  void reset() {
    m.clear();
    v.clear();
    t = 0;
  }
};

namespace detail {

template <typename S>
void check_grads(const ParameterSet<S>& p, const Grads<S>& g) {
  require(g.size() == p.weights.size(), "gradient has ", g.size(), " tensors, parameters have ",
          p.weights.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    require(g[i].size() == p.weights[i].values.size(), "gradient shape mismatch for ", p.weights[i].name);
    for (S x : g[i])
      if (!std::isfinite(static_cast<double>(x)))
        throw NumericError("non-finite gradient in " + p.weights[i].name);
  }
}

}  // namespace detail

/// One Adam step; state is lazily sized on first use. Throws NumericError
/// before touching anything if a gradient is not finite.
template <typename S>
void adam_update(ParameterSet<S>& p, const Grads<S>& g, AdamState& st, double lr,
                 const AdamHyper& h = {}) {
  detail::check_grads(p, g);
  if (st.m.empty()) {
    for (const auto& t : p.weights) {
      st.m.emplace_back(t.values.size(), 0.0);
      st.v.emplace_back(t.values.size(), 0.0);
    }
  }
  require(st.m.size() == p.weights.size(), "optimizer state does not match parameters");
  ++st.t;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto& w = p.weights[i].values;
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = static_cast<double>(g[i][j]);
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * gj;
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * gj * gj;
      const double step = lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + h.eps);
      w[j] = static_cast<S>(static_cast<double>(w[j]) - step);
    }
  }
}

/// Plain gradient descent: w -= lr * g.
template <typename S>
void sgd_update(ParameterSet<S>& p, const Grads<S>& g, double lr) {
  detail::check_grads(p, g);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j)
      p.weights[i].values[j] =
          static_cast<S>(static_cast<double>(p.weights[i].values[j]) - lr * static_cast<double>(g[i][j]));
}

/// An update rule bound to its own state.
class Optimizer {
 public:
  explicit Optimizer(UpdateRule rule = UpdateRule::kAdam) : rule_(rule) {}

  template <typename S>
  void step(ParameterSet<S>& p, const Grads<S>& g, double lr) {
    if (rule_ == UpdateRule::kAdam)
      adam_update(p, g, state_, lr);
    else
      sgd_update(p, g, lr);
  }

  void reset() { state_.reset(); }
  UpdateRule rule() const { return rule_; }
  const AdamState& state() const { return state_; }

 private:
  UpdateRule rule_;
  AdamState state_;
};

}  // namespace vidpriv

#endif  // VIDPRIV_OPTIM_HPP_
