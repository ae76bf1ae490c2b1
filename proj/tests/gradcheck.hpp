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

// Finite-difference gradient checks shared by the unit tests and the
// acceptance runner.

#ifndef VIDPRIV_TESTS_GRADCHECK_HPP_
#define VIDPRIV_TESTS_GRADCHECK_HPP_

#include <string>
#include <vector>

#include "test_util.hpp"
#include "vidpriv/losses.hpp"
#include "vidpriv/models.hpp"

namespace vidpriv::test {

struct GradCase {
  ArchSpec arch;
  int n, t, side;
};

/// Loss used for the checks: a fixed random projection of the anonymizer output,
/// or cross-entropy plus entropy for classifiers (exercises both loss gradients).
template <typename S>
test::Probe role_loss(Network<S>& net, const ParameterSet<S>& p, const nn::Act<S>& x,
                      const std::vector<double>& proj, const std::vector<int>& labels, Grads<S>* g,
                      nn::Act<S>* dx) {
  if (p.arch.role == Role::kAnonymizer) {
    auto y = net.transform(p, x);
    double loss = 0;
    for (std::size_t i = 0; i < y.v.size(); ++i) loss += double(y.v[i]) * proj[i];
    if (g) {
      nn::Act<S> gy(y.shape);
      for (std::size_t i = 0; i < gy.v.size(); ++i) gy.v[i] = static_cast<S>(proj[i]);
      *dx = net.backward_transform(p, gy, *g, true);
    }
    return {loss, net.activation_pattern()};
  }
  auto l = net.logits(p, x);
  auto ce = cross_entropy(l, std::span<const int>(labels));
  auto h = prediction_entropy(l, OutputKind::kSoftmax);
  if (g) {
    nn::Matrix<S> gl = ce.grad + S(0.5) * h.grad;
    *dx = net.backward_logits(p, gl, *g, true);
  }
  return {ce.loss.value + 0.5 * h.loss.value, net.activation_pattern()};
}

struct GradCheck {
  double worst = 0;
  std::string where;
  std::size_t kept = 0, total = 0;
};

template <typename S>
GradCheck check_gradients(const GradCase& gc, std::uint64_t seed, double step, bool with_input) {
  Rng rng(seed);
  auto p = init_params<S>(gc.arch, seed);
  // Nonzero biases so every parameter tensor has a generic gradient.
  for (auto& t : p.weights)
    if (t.shape.size() == 1)
      for (auto& v : t.values) v = static_cast<S>(0.05 * (uniform01(rng) - 0.5));
  std::vector<ClipTensor> clips;
  for (int i = 0; i < gc.n; ++i) clips.push_back(test::random_clip(rng, gc.t, gc.side, gc.side, gc.arch.channels));
  auto x = clips_to_act<S>(clips);
  std::vector<double> proj(x.v.size());
  for (auto& v : proj) v = uniform01(rng) - 0.5;
  std::vector<int> labels;
  for (int i = 0; i < gc.n; ++i) labels.push_back(static_cast<int>(uniform_index(rng, gc.arch.num_outputs)));

  Network<S> net(gc.arch);
  Grads<S> g = zero_grads(p);
  nn::Act<S> dx;
  const auto base = role_loss(net, p, x, proj, labels, &g, &dx);
  std::function<test::Probe()> eval = [&] { return role_loss<S>(net, p, x, proj, labels, nullptr, nullptr); };

  GradCheck out;
  auto account = [&](std::span<const S> analytic, const test::NumericGrad& num, const std::string& name) {
    const double e = test::relative_error(analytic, num);
    if (e > out.worst) {
      out.worst = e;
      out.where = name;
    }
    out.kept += num.num_kept();
    out.total += num.kept.size();
  };
  for (std::size_t t = 0; t < p.weights.size(); ++t) {
    const auto num = test::numeric_grad(std::span<S>(p.weights[t].values), step, base.pattern, eval);
    account(std::span<const S>(g[t]), num, p.weights[t].name);
  }
  if (!with_input) return out;
  // Input gradient, which carries the budget/target signal back into f_A.
  const auto num = test::numeric_grad(std::span<S>(x.v), step, base.pattern, eval);
  account(std::span<const S>(dx.v), num, "input");
  return out;
}

inline std::vector<GradCase> grad_cases() {
  return {{default_anonymizer_arch(), 2, 2, 6},
          {default_target_arch(4), 2, 4, 6},
          {default_budget_arch(3), 2, 3, 6},
          {ArchSpec{Role::kBudget, 2, 0.5, 5, 3}, 2, 2, 6}};
}

}  // namespace vidpriv::test

#endif  // VIDPRIV_TESTS_GRADCHECK_HPP_
