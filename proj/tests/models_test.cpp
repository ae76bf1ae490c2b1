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

#include "vidpriv/models.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gradcheck.hpp"
#include "test_util.hpp"
#include "vidpriv/losses.hpp"

namespace vidpriv {
namespace {

using test::numeric_grad;
using test::random_clip;
using test::relative_error;

TEST(InitParams, DeterministicPerSeed) {
  const auto arch = default_target_arch(4);
  EXPECT_EQ(init_params<float>(arch, 7), init_params<float>(arch, 7));
  const auto a = init_params<float>(arch, 0);
  const auto b = init_params<float>(arch, 1);
  double maxdiff = 0;
  for (std::size_t t = 0; t < a.weights.size(); ++t)
    for (std::size_t i = 0; i < a.weights[t].values.size(); ++i)
      maxdiff = std::max(maxdiff, double(std::abs(a.weights[t].values[i] - b.weights[t].values[i])));
  EXPECT_GT(maxdiff, 0.0);
}

TEST(InitParams, ConvVarianceMatchesFanIn) {
  // conv1 of the default budget net: 16 x 8 x 1 x 3 x 3, fan_in = 72.
  const auto arch = default_budget_arch(3);
  std::vector<double> draws;
  for (std::uint64_t seed = 0; draws.size() < 10000; ++seed) {
    const auto p = init_params<double>(arch, seed);
    const auto& w = p.weights[2];
    ASSERT_EQ(w.name, "conv1.w");
    draws.insert(draws.end(), w.values.begin(), w.values.end());
  }
  double mean = 0, var = 0;
  for (double d : draws) mean += d;
  mean /= draws.size();
  for (double d : draws) var += (d - mean) * (d - mean);
  var /= draws.size() - 1;
  const double expected = 2.0 / 72.0;
  EXPECT_NEAR(var, expected, 0.3 * expected);
  EXPECT_NEAR(mean, 0.0, 0.01);
}

TEST(InitParams, WeightsMatchArch) {
  for (const auto& arch : {default_anonymizer_arch(), default_target_arch(4), default_budget_arch(5)}) {
    const auto p = init_params<float>(arch, 3);
    EXPECT_NO_THROW(validate(p));
  }
  auto p = init_params<float>(default_budget_arch(3), 3);
  p.weights[0].values[0] = NAN;
  EXPECT_THROW(validate(p), ArgumentError);
}

TEST(Anonymize, PreservesShape) {
  Rng rng(1);
  const auto clip = random_clip(rng, 8, 32, 32, 3);
  const auto theta = init_params<float>(default_anonymizer_arch(), 0);
  const auto out = anonymize(theta, clip);
  EXPECT_TRUE(out.same_shape(clip));
  for (float v : out.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Anonymize, FrameLevelNoTemporalMixing) {
  Rng rng(2);
  auto a = random_clip(rng, 4, 12, 10, 3);
  auto b = random_clip(rng, 4, 12, 10, 3);
  // Frame 2 shared between the two clips.
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 12; ++x) b.at(2, x, y, c) = a.at(2, x, y, c);
  const auto theta = init_params<float>(default_anonymizer_arch(), 5);
  const auto oa = anonymize(theta, a), ob = anonymize(theta, b);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 12; ++x) EXPECT_EQ(oa.at(2, x, y, c), ob.at(2, x, y, c));
}

TEST(Anonymize, HandSetIdentity) {
  // hidden[c] = hidden[c+3] = relu(x_c); conv1 passes them through;
  // conv2 emits hidden[c] - hidden[c+3] = 0, so the output is clamp(x) = x.
  auto theta = init_params<float>(default_anonymizer_arch(), 0);
  for (auto& t : theta.weights) std::fill(t.values.begin(), t.values.end(), 0.0f);
  const int hidden = 8, center = 4;  // 3x3 kernel center tap
  auto w = [&](int layer, int out, int in, int fan) -> float& {
    return theta.weights[2 * layer].values[(out * fan + in) * 9 + center];
  };
  for (int c = 0; c < 3; ++c) {
    w(0, c, c, 3) = 1.0f;
    w(0, c + 3, c, 3) = 1.0f;
  }
  for (int h = 0; h < hidden; ++h) w(1, h, h, hidden) = 1.0f;
  for (int c = 0; c < 3; ++c) {
    w(2, c, c, hidden) = 1.0f;
    w(2, c, c + 3, hidden) = -1.0f;
  }
  Rng rng(3);
  const auto clip = random_clip(rng, 8, 16, 16, 3, 0.0, 1.0);
  const auto out = anonymize(theta, clip);
  double maxerr = 0;
  for (std::size_t i = 0; i < clip.size(); ++i)
    maxerr = std::max(maxerr, double(std::abs(out.values()[i] - clip.values()[i])));
  EXPECT_LE(maxerr, 1e-6);
}

TEST(Anonymize, RejectsChannelMismatch) {
  Rng rng(4);
  const auto gray = random_clip(rng, 2, 8, 8, 1);
  EXPECT_THROW(anonymize(init_params<float>(default_anonymizer_arch(3), 0), gray), ArgumentError);
}

TEST(PredictTarget, OutputLengthAndStaticClip) {
  const auto theta = init_params<float>(default_target_arch(4), 1);
  Rng rng(5);
  const auto frame = random_clip(rng, 1, 16, 16, 3);
  ClipTensor still(8, 16, 16, 3), still_permuted(8, 16, 16, 3);
  for (int f = 0; f < 8; ++f)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          still.at(f, x, y, c) = frame.at(0, x, y, c);
          still_permuted.at(7 - f, x, y, c) = frame.at(0, x, y, c);
        }
  const auto l = predict_target(theta, still);
  EXPECT_EQ(l.size(), 4u);
  EXPECT_EQ(l, predict_target(theta, still_permuted));
  for (float v : l) EXPECT_TRUE(std::isfinite(v));
}

TEST(PredictBudget, IdenticalFramesEqualSingleFrame) {
  const auto theta = init_params<double>(default_budget_arch(3), 2);
  Rng rng(6);
  const auto frame = random_clip(rng, 1, 16, 16, 3);
  ClipTensor clip(6, 16, 16, 3);
  for (int f = 0; f < 6; ++f)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) clip.at(f, x, y, c) = frame.at(0, x, y, c);
  const auto a = predict_budget(theta, clip), b = predict_budget(theta, frame);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(PredictBudget, AveragesLogitsBeforeSoftmax) {
  nn::Matrix<double> per_frame(2, 2);  // (outputs x frames)
  per_frame << 2, 0,
               0, 2;
  const auto clip = Network<double>::average_frames(per_frame, 1, 2);
  EXPECT_DOUBLE_EQ(clip(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(clip(0, 1), 1.0);

  // With frames (2,0) and (0,1) the two orders disagree; the logit average wins.
  nn::Matrix<double> asym(2, 2);
  asym << 2, 0,
          0, 1;
  const auto avg = Network<double>::average_frames(asym, 1, 2);
  const double p_logit_avg = 1.0 / (1.0 + std::exp(avg(0, 1) - avg(0, 0)));
  const double p_prob_avg = 0.5 * (1.0 / (1.0 + std::exp(-2.0)) + 1.0 / (1.0 + std::exp(1.0)));
  EXPECT_GT(std::abs(p_logit_avg - p_prob_avg), 1e-2);
  EXPECT_DOUBLE_EQ(avg(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(avg(0, 1), 0.5);
}

TEST(PredictBudget, InvariantToFrameOrder) {
  const auto theta = init_params<double>(default_budget_arch(3), 9);
  Rng rng(7);
  const auto clip = random_clip(rng, 5, 12, 12, 3);
  ClipTensor rev(5, 12, 12, 3);
  for (int f = 0; f < 5; ++f)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) rev.at(4 - f, x, y, c) = clip.at(f, x, y, c);
  const auto a = predict_budget(theta, clip), b = predict_budget(theta, rev);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(BudgetFamily, DistinctAndDisjoint) {
  const auto base = default_budget_arch(3);
  const auto four = budget_family(4, base, GridHalf::kTraining);
  ASSERT_EQ(four.size(), 4u);
  std::set<std::pair<int, double>> seen;
  for (const auto& a : four) seen.insert({a.depth, a.width_multiplier});
  EXPECT_EQ(seen.size(), 4u);
  EXPECT_EQ(budget_family(1, base, GridHalf::kEvaluation).size(), 1u);

  for (int nt = 1; nt <= 12; ++nt)
    for (int ne = 1; ne <= 12; ++ne) {
      const auto t = budget_family(nt, base, GridHalf::kTraining);
      const auto e = budget_family(ne, base, GridHalf::kEvaluation);
      for (const auto& x : t)
        for (const auto& y : e) EXPECT_FALSE(x == y);
    }
  EXPECT_THROW(budget_family(13, base, GridHalf::kTraining), ArgumentError);
  EXPECT_THROW(budget_family(0, base, GridHalf::kTraining), ArgumentError);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks.

using test::GradCase;
using test::check_gradients;
using test::grad_cases;

TEST(Gradients, FiniteDifferences64Bit) {
  for (const auto& gc : grad_cases())
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = check_gradients<double>(gc, seed, 1e-5, true);
      EXPECT_LE(r.worst, 1e-5) << role_name(gc.arch.role) << " seed " << seed << " at " << r.where;
      EXPECT_GE(r.kept, r.total * 95 / 100) << "too many coordinates straddle a kink";
    }
}

TEST(Gradients, FiniteDifferences32Bit) {
  for (const auto& gc : grad_cases())
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      // Input gradients are small after pooling; float round-off dominates their
      // difference quotients, so only weights are checked here.
      const auto r = check_gradients<float>(gc, seed, 1e-3, false);
      EXPECT_LE(r.worst, 1e-2) << role_name(gc.arch.role) << " seed " << seed << " at " << r.where;
      EXPECT_GE(r.kept, r.total * 80 / 100) << "too many coordinates straddle a kink";
    }
}

}  // namespace
}  // namespace vidpriv
