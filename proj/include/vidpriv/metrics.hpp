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

// Classification metrics: top-1 accuracy, class-based mean average precision
// and precision/recall/F1 reports for multi-label predictions.

#ifndef VIDPRIV_METRICS_HPP_
#define VIDPRIV_METRICS_HPP_

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "vidpriv/common.hpp"
#include "vidpriv/losses.hpp"
#include "vidpriv/nn.hpp"

namespace vidpriv {

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  require(predicted.size() == truth.size(), "accuracy: ", predicted.size(), " predictions for ",
          truth.size(), " labels");
  require(!truth.empty(), "accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

/// Row-wise argmax; ties go to the lowest class index.
template <typename S>
std::vector<int> argmax_rows(const nn::Matrix<S>& logits) {
  std::vector<int> out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

/// Scores above 0 (probability above 0.5) predict the attribute.
template <typename S>
BinaryLabels threshold_logits(const nn::Matrix<S>& logits) {
  BinaryLabels b{static_cast<int>(logits.rows()), static_cast<int>(logits.cols()), {}};
  b.bits.resize(static_cast<std::size_t>(b.n) * b.k);
  for (int i = 0; i < b.n; ++i)
    for (int j = 0; j < b.k; ++j) b.bits[static_cast<std::size_t>(i) * b.k + j] = logits(i, j) > S(0);
  return b;
}

/// Mean over attributes of the per-attribute binary accuracy.
inline double mean_binary_accuracy(const BinaryLabels& predicted, const BinaryLabels& truth) {
  require(predicted.n == truth.n && predicted.k == truth.k, "binary accuracy: shape mismatch");
  require(truth.n >= 1 && truth.k >= 1, "binary accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.bits.size(); ++i) hit += predicted.bits[i] == truth.bits[i];
  return static_cast<double>(hit) / static_cast<double>(truth.bits.size());
}

struct CmapResult {
  double value = 0;
  std::vector<double> ap;         // per attribute; 0 for excluded columns
  std::vector<int> excluded;      // attributes without positives
};

/// Average precision of one column: mean of precision@rank over the ranks of
/// the positives, ranking by descending score (ties by lower sample index).
inline double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size(), "average_precision: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (labels[order[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  require(hits > 0, "average_precision: column has no positives");
  return sum / static_cast<double>(hits);
}

/// Class-based mean average precision over the columns of an (n x attrs)
/// score matrix. Columns without positives are excluded and listed.
inline CmapResult cmap(const nn::Matrix<double>& scores, const BinaryLabels& labels) {
  require(scores.rows() == labels.n && scores.cols() == labels.k, "cmap: shape mismatch");
  require(labels.n >= 1, "cmap of an empty set");
  CmapResult out;
  out.ap.assign(labels.k, 0.0);
  std::vector<double> col(labels.n);
  std::vector<std::uint8_t> lab(labels.n);
  int used = 0;
  for (int j = 0; j < labels.k; ++j) {
    bool any = false;
    for (int i = 0; i < labels.n; ++i) {
      col[i] = scores(i, j);
      lab[i] = labels.at(i, j);
      any = any || lab[i];
    }
    if (!any) {
      out.excluded.push_back(j);
      continue;
    }
    out.ap[j] = average_precision(col, lab);
    out.value += out.ap[j];
    ++used;
  }
  require(used > 0, "cmap: no attribute has a positive label");
  out.value /= used;
  return out;
}

struct Prf1 {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
  bool zero_division = false;  // some ratio had a zero denominator and was set to 0
};

struct Prf1Report {
  std::vector<Prf1> per_attribute;
  Prf1 micro, macro, weighted, samples;
};

namespace detail {

inline Prf1 prf1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf1 r;
  r.support = tp + fn;
  if (tp + fp > 0)
    r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  else
    r.zero_division = true;
  if (tp + fn > 0)
    r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  else
    r.zero_division = true;
  if (r.precision + r.recall > 0)
    r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  else
    r.zero_division = true;
  return r;
}

}  // namespace detail

/// Per-attribute precision/recall/F1 plus micro, macro, support-weighted and
/// per-sample averages. Zero denominators yield 0 and set zero_division.
inline Prf1Report prf1_report(const BinaryLabels& predicted, const BinaryLabels& truth) {
  require(predicted.n == truth.n && predicted.k == truth.k, "prf1_report: shape mismatch (",
          predicted.n, "x", predicted.k, " vs ", truth.n, "x", truth.k, ")");
  require(truth.n >= 1 && truth.k >= 1, "prf1_report of an empty set");
  Prf1Report rep;
  std::size_t TP = 0, FP = 0, FN = 0, support = 0;
  for (int j = 0; j < truth.k; ++j) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < truth.n; ++i) {
      const bool p = predicted.at(i, j), t = truth.at(i, j);
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    rep.per_attribute.push_back(detail::prf1_from_counts(tp, fp, fn));
    TP += tp;
    FP += fp;
    FN += fn;
  }
  rep.micro = detail::prf1_from_counts(TP, FP, FN);

  for (const auto& a : rep.per_attribute) {
    rep.macro.precision += a.precision;
    rep.macro.recall += a.recall;
    rep.macro.f1 += a.f1;
    rep.macro.zero_division = rep.macro.zero_division || a.zero_division;
    rep.weighted.precision += a.precision * a.support;
    rep.weighted.recall += a.recall * a.support;
    rep.weighted.f1 += a.f1 * a.support;
    support += a.support;
  }
  const double k = truth.k;
  rep.macro.precision /= k;
  rep.macro.recall /= k;
  rep.macro.f1 /= k;
  rep.macro.support = rep.weighted.support = rep.micro.support;
  if (support > 0) {
    rep.weighted.precision /= support;
    rep.weighted.recall /= support;
    rep.weighted.f1 /= support;
  } else {
    rep.weighted.zero_division = true;
  }

  for (int i = 0; i < truth.n; ++i) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (int j = 0; j < truth.k; ++j) {
      const bool p = predicted.at(i, j), t = truth.at(i, j);
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    const Prf1 s = detail::prf1_from_counts(tp, fp, fn);
    rep.samples.precision += s.precision;
    rep.samples.recall += s.recall;
    rep.samples.f1 += s.f1;
    rep.samples.zero_division = rep.samples.zero_division || s.zero_division;
  }
  rep.samples.precision /= truth.n;
  rep.samples.recall /= truth.n;
  rep.samples.f1 /= truth.n;
  rep.samples.support = rep.micro.support;
  return rep;
}

}  // namespace vidpriv

#endif  // VIDPRIV_METRICS_HPP_
