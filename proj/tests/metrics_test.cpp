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

#include <algorithm>
#include <cmath>
#include <random>

#include "vidpriv/metrics.hpp"

namespace vidpriv {
namespace {

TEST(Accuracy, Basics) {
  const std::vector<int> a = {0, 1, 2}, b = {0, 1, 2};
  EXPECT_DOUBLE_EQ(accuracy(a, b), 1.0);
  const std::vector<int> c = {0, 0}, d = {1, 1};
  EXPECT_DOUBLE_EQ(accuracy(c, d), 0.0);
  const std::vector<int> p = {1, 1, 1, 1, 1, 1, 1, 0, 0, 0}, t = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(accuracy(p, t), 0.7);
  const std::vector<int> e = {0};
  EXPECT_THROW(accuracy(c, e), ArgumentError);
}

TEST(ArgmaxRows, TiesGoLow) {
  nn::Matrix<double> m(2, 3);
  m << 1, 3, 3, 0, 0, 0;
  EXPECT_EQ(argmax_rows(m), (std::vector<int>{1, 0}));
}

// Independent AP: for every positive, count positives ranked at or above it
// (score strictly greater, or equal with lower index) by direct comparison.
double brute_ap(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  const std::size_t n = s.size();
  std::vector<std::pair<int, int>> at;  // (rank, positives at or above)
  for (std::size_t i = 0; i < n; ++i) {
    if (!y[i]) continue;
    int rank = 0, hits = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool above = s[j] > s[i] || (s[j] == s[i] && j <= i);
      if (above) {
        ++rank;
        hits += y[j];
      }
    }
    at.emplace_back(rank, hits);
  }
  // Summed in rank order so the result is comparable bit for bit.
  std::sort(at.begin(), at.end());
  double sum = 0;
  for (auto [rank, hits] : at) sum += static_cast<double>(hits) / rank;
  return sum / static_cast<double>(at.size());
}

TEST(Cmap, WorkedExample) {
  nn::Matrix<double> s(3, 1);
  s << 0.9, 0.8, 0.7;
  BinaryLabels y{3, 1, {1, 0, 1}};
  EXPECT_NEAR(cmap(s, y).value, (1.0 + 2.0 / 3.0) / 2.0, 1e-12);
}

TEST(Cmap, PerfectRankingIsOne) {
  nn::Matrix<double> s(4, 2);
  s << 0.9, 0.1, 0.8, 0.7, 0.2, 0.9, 0.1, 0.3;
  BinaryLabels y{4, 2, {1, 0, 1, 0, 0, 1, 0, 0}};
  EXPECT_DOUBLE_EQ(cmap(s, y).value, 1.0);
}

TEST(Cmap, MatchesBruteForceOn100Fixtures) {
  std::mt19937_64 rng(2024);
  for (int f = 0; f < 100; ++f) {
    const int n = 2 + static_cast<int>(rng() % 99);
    const int k = 1 + static_cast<int>(rng() % 6);
    nn::Matrix<double> s(n, k);
    BinaryLabels y{n, k, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * k)};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) {
        // Coarse scores force ties.
        s(i, j) = static_cast<double>(rng() % 7) / 7.0;
        y.bits[static_cast<std::size_t>(i) * k + j] = rng() % 3 == 0;
      }
    double expect = 0;
    int used = 0;
    std::vector<int> empty;
    for (int j = 0; j < k; ++j) {
      std::vector<double> col(n);
      std::vector<std::uint8_t> lab(n);
      bool any = false;
      for (int i = 0; i < n; ++i) {
        col[i] = s(i, j);
        lab[i] = y.at(i, j);
        any = any || lab[i];
      }
      if (!any) {
        empty.push_back(j);
        continue;
      }
      expect += brute_ap(col, lab);
      ++used;
    }
    if (used == 0) {
      EXPECT_THROW(cmap(s, y), ArgumentError);
      continue;
    }
    const auto r = cmap(s, y);
    EXPECT_EQ(r.value, expect / used) << "fixture " << f;
    EXPECT_EQ(r.excluded, empty);
  }
}

TEST(Cmap, EmptyColumnsExcludedAndReported) {
  nn::Matrix<double> s(2, 2);
  s << 0.5, 0.2, 0.1, 0.3;
  BinaryLabels y{2, 2, {1, 0, 0, 0}};
  const auto r = cmap(s, y);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_EQ(r.excluded, (std::vector<int>{1}));
  BinaryLabels none{2, 2, {0, 0, 0, 0}};
  EXPECT_THROW(cmap(s, none), ArgumentError);
}

TEST(Prf1, PerfectPredictions) {
  BinaryLabels y{3, 2, {1, 0, 0, 1, 1, 1}};
  const auto r = prf1_report(y, y);
  for (const auto& a : r.per_attribute) {
    EXPECT_DOUBLE_EQ(a.precision, 1.0);
    EXPECT_DOUBLE_EQ(a.recall, 1.0);
    EXPECT_DOUBLE_EQ(a.f1, 1.0);
  }
  for (const auto* avg : {&r.micro, &r.macro, &r.weighted, &r.samples}) EXPECT_DOUBLE_EQ(avg->f1, 1.0);
}

TEST(Prf1, ZeroDivisionFlagged) {
  BinaryLabels truth{2, 1, {1, 1}};
  BinaryLabels pred{2, 1, {0, 0}};
  const auto r = prf1_report(pred, truth);
  EXPECT_EQ(r.per_attribute[0].precision, 0.0);
  EXPECT_EQ(r.per_attribute[0].recall, 0.0);
  EXPECT_TRUE(r.per_attribute[0].zero_division);
}

TEST(Prf1, ShapeMismatchThrows) {
  EXPECT_THROW(prf1_report(BinaryLabels{1, 2, {0, 0}}, BinaryLabels{2, 1, {0, 0}}), ArgumentError);
}

// Raw-video column of the human study. Per-attribute (TP, FP, FN) counts are
// chosen so the rounded precision and recall equal the published values.
struct Counts {
  int tp, fp, fn;
  double p, r, f1;  // published, two decimals
};

BinaryLabels column_fixture(const std::vector<Counts>& cols, int n, BinaryLabels* truth) {
  const int k = static_cast<int>(cols.size());
  BinaryLabels pred{n, k, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * k)};
  *truth = pred;
  for (int j = 0; j < k; ++j) {
    int i = 0;
    auto set = [&](int count, bool p, bool t) {
      for (int c = 0; c < count; ++c, ++i) {
        pred.bits[static_cast<std::size_t>(i) * k + j] = p;
        truth->bits[static_cast<std::size_t>(i) * k + j] = t;
      }
    };
    set(cols[j].tp, true, true);
    set(cols[j].fp, true, false);
    set(cols[j].fn, false, true);
  }
  return pred;
}

TEST(Prf1, HumanStudyRawVideos) {
  const std::vector<Counts> cols = {
      {49, 1, 0, 0.98, 1.00, 0.99},   // skin color
      {97, 3, 1, 0.97, 0.99, 0.98},   // face
      {49, 1, 0, 0.98, 1.00, 0.99},   // gender
      {99, 1, 1, 0.99, 0.99, 0.99},   // nudity
      {88, 3, 12, 0.97, 0.88, 0.92},  // relationship
  };
  BinaryLabels truth;
  const BinaryLabels pred = column_fixture(cols, 120, &truth);
  const auto r = prf1_report(pred, truth);
  auto round2 = [](double x) { return std::round(x * 100) / 100; };
  for (std::size_t j = 0; j < cols.size(); ++j) {
    EXPECT_DOUBLE_EQ(round2(r.per_attribute[j].precision), cols[j].p) << j;
    EXPECT_DOUBLE_EQ(round2(r.per_attribute[j].recall), cols[j].r) << j;
    EXPECT_DOUBLE_EQ(round2(r.per_attribute[j].f1), cols[j].f1) << j;
  }
  EXPECT_DOUBLE_EQ(round2(r.macro.f1), 0.97);
  EXPECT_DOUBLE_EQ(round2(r.macro.precision), 0.98);
  EXPECT_DOUBLE_EQ(round2(r.macro.recall), 0.97);
}

TEST(Prf1, AveragesByHand) {
  // Attribute 0: tp=1 fp=1 fn=0; attribute 1: tp=0 fp=0 fn=1.
  BinaryLabels truth{2, 2, {1, 1, 0, 0}};
  BinaryLabels pred{2, 2, {1, 0, 1, 0}};
  const auto r = prf1_report(pred, truth);
  EXPECT_DOUBLE_EQ(r.per_attribute[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(r.per_attribute[0].recall, 1.0);
  EXPECT_DOUBLE_EQ(r.micro.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.micro.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.macro.f1, (2.0 / 3.0 + 0.0) / 2.0);
  EXPECT_DOUBLE_EQ(r.weighted.f1, (2.0 / 3.0 * 1 + 0.0 * 1) / 2.0);
  // Sample 0: tp=1 fn=1 -> f1 2/3; sample 1: fp=1 -> f1 0.
  EXPECT_DOUBLE_EQ(r.samples.f1, (2.0 / 3.0) / 2.0);
  EXPECT_TRUE(r.samples.zero_division);
}

}  // namespace
}  // namespace vidpriv
