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

#include <gtest/gtest.h>

#include <cmath>

#include "vidpriv/optim.hpp"

namespace vidpriv {
namespace {

ParameterSet<double> scalar_params(std::vector<double> v) {
  ParameterSet<double> p;
  p.weights.push_back({"w", {static_cast<int>(v.size())}, std::move(v)});
  return p;
}

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  auto p = scalar_params({0.5, -1.0});
  AdamState st;
  adam_update(p, Grads<double>{{1.0, -2.0}}, st, 0.1);
  const auto after_first = p.weights[0].values;
  const auto m1 = st.m[0], v1 = st.v[0];
  // A zero gradient still moves w through the first moment, so check a fresh state.
  auto q = scalar_params({0.5, -1.0});
  AdamState fresh;
  adam_update(q, Grads<double>{{0.0, 0.0}}, fresh, 0.1);
  EXPECT_EQ(q.weights[0].values, (std::vector<double>{0.5, -1.0}));
  EXPECT_EQ(fresh.t, 1);

  adam_update(p, Grads<double>{{0.0, 0.0}}, st, 0.1);
  for (int j = 0; j < 2; ++j) {
    EXPECT_DOUBLE_EQ(st.m[0][j], 0.9 * m1[j]);
    EXPECT_DOUBLE_EQ(st.v[0][j], 0.999 * v1[j]);
  }
  EXPECT_NE(p.weights[0].values, after_first);
}

// First step: m = (1-b1) g, v = (1-b2) g^2, bias corrections cancel, so the
// update is lr * g / (|g| + eps).
TEST(Adam, FirstStepClosedForm) {
  const std::vector<double> g = {3.0, -0.25, 1e-3, 0.0};
  auto p = scalar_params({1, 1, 1, 1});
  AdamState st;
  const double lr = 0.01;
  adam_update(p, Grads<double>{g}, st, lr);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double expect = 1.0 - lr * g[j] / (std::abs(g[j]) + 1e-8);
    EXPECT_NEAR(p.weights[0].values[j], expect, 1e-15);
    EXPECT_LE(std::abs(p.weights[0].values[j] - 1.0), lr * (1 + 1e-12));
  }
}

TEST(Adam, Deterministic) {
  auto run = [] {
    auto p = scalar_params({0.1, 0.2, 0.3});
    AdamState st;
    for (int k = 0; k < 50; ++k) {
      Grads<double> g{{std::sin(k * 1.0), std::cos(k * 0.5), 0.01 * k}};
      adam_update(p, g, st, 1e-2);
    }
    return p.weights[0].values;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, NonFiniteGradientThrowsBeforeChanging) {
  auto p = scalar_params({1.0, 2.0});
  AdamState st;
  EXPECT_THROW(adam_update(p, Grads<double>{{0.1, NAN}}, st, 0.1), NumericError);
  EXPECT_EQ(p.weights[0].values, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(st.t, 0);
  EXPECT_THROW(adam_update(p, Grads<double>{{INFINITY, 0.0}}, st, 0.1), NumericError);
}

TEST(Adam, ShapeMismatchThrows) {
  auto p = scalar_params({1.0, 2.0});
  AdamState st;
  EXPECT_THROW(adam_update(p, Grads<double>{{0.1}}, st, 0.1), ArgumentError);
}

TEST(Sgd, PlainStep) {
  auto p = scalar_params({0.0, 1.0});
  sgd_update(p, Grads<double>{{2.0, -1.0}}, 0.1);
  EXPECT_DOUBLE_EQ(p.weights[0].values[0], -0.2);
  EXPECT_DOUBLE_EQ(p.weights[0].values[1], 1.1);
}

TEST(Optimizer, ResetClearsMoments) {
  Optimizer o(UpdateRule::kAdam);
  auto p = scalar_params({0.0});
  o.step(p, Grads<double>{{1.0}}, 0.1);
  EXPECT_EQ(o.state().t, 1);
  o.reset();
  EXPECT_EQ(o.state().t, 0);
  EXPECT_TRUE(o.state().m.empty());
  // After a reset the next step is again a first step.
  auto q = scalar_params({0.0});
  o.step(q, Grads<double>{{5.0}}, 0.1);
  EXPECT_NEAR(q.weights[0].values[0], -0.1, 1e-9);
}

}  // namespace
}  // namespace vidpriv
