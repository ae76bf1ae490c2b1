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

// Classification costs over a batch of logits (one row per sample).
//
// Single-class outputs are softmax distributions; multi-attribute outputs are
// independent sigmoid scores, one binary task per column. Values are computed
// in double and reduced by the batch mean; gradients are w.r.t. the logits.

#ifndef VIDPRIV_LOSSES_HPP_
#define VIDPRIV_LOSSES_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "vidpriv/common.hpp"
#include "vidpriv/nn.hpp"

namespace vidpriv {

struct LossValue {
  double value = 0.0;
  int batch_size = 0;
};

template <typename S>
struct LossGrad {
  LossValue loss;
  nn::Matrix<S> grad;  // same shape as the logits
};

/// Row-major (n x k) 0/1 matrix of per-attribute labels.
struct BinaryLabels {
  int n = 0, k = 0;
  std::vector<std::uint8_t> bits;
  std::uint8_t at(int i, int j) const { return bits[static_cast<std::size_t>(i) * k + j]; }
};

enum class OutputKind { kSoftmax, kSigmoid };

namespace detail {

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Stable log-softmax of one row.
template <typename S>
std::vector<double> log_softmax_row(const nn::Matrix<S>& logits, Eigen::Index r) {
  const auto k = logits.cols();
  double mx = -INFINITY;
  for (Eigen::Index j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(logits(r, j)));
  double sum = 0;
  for (Eigen::Index j = 0; j < k; ++j) sum += std::exp(static_cast<double>(logits(r, j)) - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(k);
  for (Eigen::Index j = 0; j < k; ++j) out[j] = static_cast<double>(logits(r, j)) - lse;
  return out;
}

template <typename S>
void check_finite(const nn::Matrix<S>& logits) {
  require(logits.rows() >= 1 && logits.cols() >= 1, "empty logits");
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (!std::isfinite(static_cast<double>(logits.data()[i]))) throw NumericError("non-finite logit");
}

}  // namespace detail

/// Mean over the batch of -log softmax(logits)[label].
template <typename S>
LossGrad<S> cross_entropy(const nn::Matrix<S>& logits, std::span<const int> labels) {
  detail::check_finite(logits);
  const auto n = logits.rows(), k = logits.cols();
  require(static_cast<Eigen::Index>(labels.size()) == n, "label count does not match batch");
  LossGrad<S> out{{0.0, static_cast<int>(n)}, nn::Matrix<S>(n, k)};
  for (Eigen::Index i = 0; i < n; ++i) {
    require(labels[i] >= 0 && labels[i] < k, "label ", labels[i], " out of range for ", k, " classes");
    const auto ls = detail::log_softmax_row(logits, i);
    out.loss.value -= ls[labels[i]];
    for (Eigen::Index j = 0; j < k; ++j)
      out.grad(i, j) = static_cast<S>((std::exp(ls[j]) - (j == labels[i] ? 1.0 : 0.0)) / n);
  }
  out.loss.value /= static_cast<double>(n);
  return out;
}

/// Mean over the batch of the summed per-attribute binary cross-entropies.
template <typename S>
LossGrad<S> cross_entropy(const nn::Matrix<S>& logits, const BinaryLabels& labels) {
  detail::check_finite(logits);
  const auto n = logits.rows(), k = logits.cols();
  require(labels.n == n && labels.k == k, "label matrix does not match logits");
  LossGrad<S> out{{0.0, static_cast<int>(n)}, nn::Matrix<S>(n, k)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      const std::uint8_t y = labels.at(static_cast<int>(i), static_cast<int>(j));
      require(y <= 1, "binary label must be 0 or 1");
      const double z = logits(i, j);
      out.loss.value += y ? detail::softplus(-z) : detail::softplus(z);
      out.grad(i, j) = static_cast<S>((detail::sigmoid(z) - y) / n);
    }
  out.loss.value /= static_cast<double>(n);
  return out;
}

/// J_B: the negated cross-entropy. Minimizing it pushes predictions away from the labels.
template <typename S, typename Labels>
LossGrad<S> negative_budget_xent(const nn::Matrix<S>& logits, const Labels& labels) {
  LossGrad<S> out = cross_entropy(logits, labels);
  out.loss.value = -out.loss.value;
  out.grad = -out.grad;
  return out;
}

/// H_B: mean prediction entropy. Softmax outputs use -sum p ln p; sigmoid
/// outputs sum the binary entropies of the columns.
template <typename S>
LossGrad<S> prediction_entropy(const nn::Matrix<S>& logits, OutputKind kind) {
  detail::check_finite(logits);
  const auto n = logits.rows(), k = logits.cols();
  LossGrad<S> out{{0.0, static_cast<int>(n)}, nn::Matrix<S>(n, k)};
  for (Eigen::Index i = 0; i < n; ++i) {
    if (kind == OutputKind::kSoftmax) {
      const auto ls = detail::log_softmax_row(logits, i);
      double h = 0;
      for (Eigen::Index j = 0; j < k; ++j) h -= std::exp(ls[j]) * ls[j];
      out.loss.value += h;
      // dH/dz_j = -p_j (ln p_j + H)
      for (Eigen::Index j = 0; j < k; ++j)
        out.grad(i, j) = static_cast<S>(-std::exp(ls[j]) * (ls[j] + h) / n);
    } else {
      for (Eigen::Index j = 0; j < k; ++j) {
        const double z = logits(i, j);
        const double p = detail::sigmoid(z);
        // h = softplus(z) - p z ; dh/dz = -z p (1 - p)
        out.loss.value += detail::softplus(z) - p * z;
        out.grad(i, j) = static_cast<S>(-z * p * (1.0 - p) / n);
      }
    }
  }
  out.loss.value /= static_cast<double>(n);
  return out;
}

/// L_T + gamma * budget_term.
inline LossValue hybrid_loss(LossValue target, LossValue budget_term, double gamma) {
  require(gamma >= 0, "gamma must be non-negative, got ", gamma);
  return {target.value + gamma * budget_term.value, target.batch_size};
}

}  // namespace vidpriv

#endif  // VIDPRIV_LOSSES_HPP_
