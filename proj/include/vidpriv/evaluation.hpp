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

// Two-step evaluation of a frozen anonymizer.
//
//   1. A_T: accuracy of the frozen target model on the anonymized eval split.
//   2. A_B: N fresh attackers, drawn from the evaluation half of the budget
//      grid, are trained on the anonymized training split and scored on the
//      anonymized eval split. A_B is the best attacker score.
//
// Attackers depend only on their architecture and the evaluation seed, so the
// attacker order never matters and a smaller attacker set is a prefix of a
// larger one.

#ifndef VIDPRIV_EVALUATION_HPP_
#define VIDPRIV_EVALUATION_HPP_

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vidpriv/common.hpp"
#include "vidpriv/data.hpp"
#include "vidpriv/losses.hpp"
#include "vidpriv/metrics.hpp"
#include "vidpriv/models.hpp"
#include "vidpriv/optim.hpp"
#include "vidpriv/train.hpp"

namespace vidpriv {

/// Method-specific settings of one trade-off point.
struct Variant {
  std::optional<int> K, M, r;
  std::optional<std::string> code;  // obfuscation code
  bool restarting = false;

  bool operator==(const Variant&) const = default;

  /// "r=4", "XKF", "K=2+", "M=8+", "GRL", "GRL+".
  std::string tag() const {
    std::string s;
    if (r) s = "r=" + std::to_string(*r);
    else if (code) s = *code;
    else if (K) s = "K=" + std::to_string(*K);
    else if (M) s = "M=" + std::to_string(*M);
    else s = "GRL";
    if (restarting) s += "+";
    return s;
  }

  /// Size key for scatter markers: r, K or M; 0 when the method has none.
  int marker_size() const { return r ? *r : K ? *K : M ? *M : 0; }

  static Variant parse(const std::string& method, const std::string& tag) {
    Variant v;
    std::string t = tag;
    if (!t.empty() && t.back() == '+') {
      v.restarting = true;
      t.pop_back();
    }
    auto number = [&](std::size_t from) {
      const std::string digits = t.substr(from);
      require<SchemaError>(!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos,
                           "bad variant '", tag, "' for method ", method);
      return std::stoi(digits);
    };
    if (method == "downsample") {
      require<SchemaError>(t.rfind("r=", 0) == 0 && !v.restarting, "bad downsample variant '", tag, "'");
      v.r = number(2);
    } else if (method == "obfuscation") {
      require<SchemaError>(t.size() == 3 && !v.restarting, "bad obfuscation variant '", tag, "'");
      v.code = t;
    } else if (method == "kbeam") {
      require<SchemaError>(t.rfind("K=", 0) == 0, "bad kbeam variant '", tag, "'");
      v.K = number(2);
    } else if (method == "entropy") {
      require<SchemaError>(t.rfind("M=", 0) == 0, "bad entropy variant '", tag, "'");
      v.M = number(2);
    } else if (method == "grl") {
      require<SchemaError>(t == "GRL", "bad grl variant '", tag, "'");
    } else {
      throw SchemaError("unknown method '" + method + "'");
    }
    return v;
  }
};

struct TradeoffPoint {
  std::string method;  // downsample, obfuscation, grl, kbeam, entropy
  Variant variant;
  double A_T = 0;
  double A_B = 0;
  int n_attackers = 0;

  bool operator==(const TradeoffPoint&) const = default;
};

struct EvalConfig {
  int n_attackers = 4;
  int atk_iters = 2000;   // attacker step budget
  int plateau = 200;      // stop when the smoothed train loss stalls this long
  int smooth = 20;        // window of the smoothed train loss
  double min_delta = 1e-4;
  double alpha_atk = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 0;
  UpdateRule update_rule = UpdateRule::kAdam;

  // Target model of a fixed-transform baseline.
  int target_iters = 2000;
  double alpha_tgt = 1e-3;
};

inline void validate(const EvalConfig& c) {
  auto need = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(std::string(key) + ": " + what);
  };
  need(c.n_attackers >= 1, "n_attackers", "must be >= 1");
  need(c.atk_iters >= 1, "atk_iters", "must be >= 1");
  need(c.plateau >= 1, "plateau", "must be >= 1");
  need(c.smooth >= 1, "smooth", "must be >= 1");
  need(c.min_delta >= 0, "min_delta", "must be >= 0");
  need(c.alpha_atk > 0, "alpha_atk", "must be > 0");
  need(c.alpha_tgt > 0, "alpha_tgt", "must be > 0");
  need(c.batch_size >= 1, "batch_size", "must be >= 1");
  need(c.target_iters >= 1, "target_iters", "must be >= 1");
}

template <typename S>
struct FitResult {
  ParameterSet<S> params;
  int steps = 0;
  double smoothed_loss = 0;
};

/// Trains a classifier from scratch on fixed inputs with a step budget and
/// plateau early stop. loss(logits, idx) gives the loss and its gradient.
template <typename S>
FitResult<S> fit_classifier(const ArchSpec& arch, std::uint64_t init_seed, std::uint64_t batch_seed,
                            const nn::Act<S>& inputs, double lr, int max_steps, const EvalConfig& cfg,
                            const std::function<LossGrad<S>(const nn::Matrix<S>&, std::span<const std::size_t>)>& loss) {
  FitResult<S> out{init_params<S>(arch, init_seed), 0, 0};
  Network<S> net(arch);
  Optimizer opt(cfg.update_rule);
  BatchSampler batches(static_cast<std::size_t>(inputs.shape.n), batch_seed);
  std::vector<double> window;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int step = 0; step < max_steps; ++step) {
    const auto idx = batches.next(cfg.batch_size);
    auto logits = net.logits(out.params, nn::select_samples(inputs, idx));
    auto l = loss(logits, idx);
    if (!std::isfinite(l.loss.value)) throw NumericError("non-finite loss while fitting " + std::string(role_name(arch.role)));
    auto g = zero_grads(out.params);
    net.backward_logits(out.params, l.grad, g, false);
    opt.step(out.params, g, lr);
    out.steps = step + 1;

    window.push_back(l.loss.value);
    if (static_cast<int>(window.size()) > cfg.smooth) window.erase(window.begin());
    double mean = 0;
    for (double v : window) mean += v;
    mean /= static_cast<double>(window.size());
    out.smoothed_loss = mean;
    if (static_cast<int>(window.size()) < cfg.smooth) continue;
    if (mean < best - cfg.min_delta) {
      best = mean;
      since_best = 0;
    } else if (++since_best >= cfg.plateau) {
      break;
    }
  }
  return out;
}

/// Logits of a classifier over a whole input set, in batches.
template <typename S>
nn::Matrix<S> batched_logits(const ParameterSet<S>& p, const nn::Act<S>& inputs, int batch_size) {
  Network<S> net(p.arch);
  nn::Matrix<S> out(inputs.shape.n, p.arch.num_outputs);
  std::vector<std::size_t> all(inputs.shape.n);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (std::size_t from = 0; from < all.size(); from += batch_size) {
    const auto idx = chunk(all, from, batch_size);
    auto l = net.logits(p, nn::select_samples(inputs, idx));
    out.middleRows(static_cast<Eigen::Index>(from), l.rows()) = l;
  }
  return out;
}

/// A_B metric: top-1 accuracy (single class) or cMAP (multi-attribute).
template <typename S>
double budget_score(const Dataset& d, const nn::Matrix<S>& logits) {
  std::vector<std::size_t> all(d.clips.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  if (d.budget_mode == BudgetMode::kSingleClass) return budget_accuracy(d, logits, all);
  return cmap(logits.template cast<double>(), gather_budget_bits(d, all)).value;
}

/// Anonymized copy of a whole split, in the network layout.
template <typename S>
nn::Act<S> anonymize_split(const ParameterSet<S>& theta_A, const Dataset& d, int batch_size) {
  Network<S> net(theta_A.arch);
  std::vector<std::size_t> all(d.clips.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  nn::Act<S> out;
  for (std::size_t from = 0; from < all.size(); from += batch_size) {
    const auto idx = chunk(all, from, batch_size);
    auto y = net.transform(theta_A, gather_clips<S>(d, idx));
    if (from == 0) {
      nn::Shape5 s = y.shape;
      s.n = static_cast<int>(all.size());
      out = nn::Act<S>(s);
    }
    const std::size_t block = y.shape.spatial();
    for (int c = 0; c < y.shape.c; ++c)
      std::copy_n(y.v.data() + static_cast<std::size_t>(c) * idx.size() * block, idx.size() * block,
                  out.v.data() + (static_cast<std::size_t>(c) * all.size() + from) * block);
  }
  return out;
}

/// Fixed clip map; receives the split and the clip position so mask-based
/// transforms can reach the clip's region masks.
using ClipTransform = std::function<ClipTensor(const Dataset& split, std::size_t index)>;

/// Split mapped through a fixed transform.
template <typename S>
nn::Act<S> transform_split(const ClipTransform& f, const Dataset& d) {
  std::vector<ClipTensor> out;
  out.reserve(d.clips.size());
  for (std::size_t i = 0; i < d.clips.size(); ++i) out.push_back(f(d, i));
  return clips_to_act<S>(out);
}

struct AttackerResult {
  ArchSpec arch;
  double score = 0;
  int steps = 0;
};

struct TwoStepReport {
  double A_T = 0;
  double A_B = 0;
  std::vector<AttackerResult> attackers;
};

/// Attacker archs for an evaluation run, from the evaluation half of the grid.
inline std::vector<ArchSpec> attacker_archs(const Dataset& d, int n) {
  const int c = d.clips.empty() ? 3 : d.clips.front().clip.channels();
  const auto archs = budget_family(n, default_budget_arch(d.num_budget_outputs, c), GridHalf::kEvaluation);
  const auto training = budget_grid(default_budget_arch(d.num_budget_outputs, c));
  for (const auto& a : archs) {
    const auto pos = std::find(training.begin(), training.end(), a) - training.begin();
    require(pos % 2 == 1, "attacker architecture overlaps the training ensemble");
  }
  return archs;
}

/// Seed of an attacker, a function of its architecture only.
inline std::uint64_t attacker_seed(std::uint64_t seed, const ArchSpec& a, Stream s) {
  return derive_seed(seed, s, static_cast<std::uint64_t>(a.depth),
                     static_cast<std::uint64_t>(std::lround(a.width_multiplier * 1000)));
}

/// Step 2 only: trains and scores attackers on pre-anonymized splits.
template <typename S>
std::vector<AttackerResult> run_attackers(const nn::Act<S>& x_train, const Dataset& train,
                                          const nn::Act<S>& x_eval, const Dataset& eval,
                                          const std::vector<ArchSpec>& archs, const EvalConfig& cfg) {
  std::vector<AttackerResult> out;
  for (const auto& arch : archs) {
    auto fit = fit_classifier<S>(
        arch, attacker_seed(cfg.seed, arch, Stream::kAttackerInit),
        attacker_seed(cfg.seed, arch, Stream::kAttackerBatches), x_train, cfg.alpha_atk, cfg.atk_iters, cfg,
        [&](const nn::Matrix<S>& logits, std::span<const std::size_t> idx) {
          return budget_xent(train, logits, idx);
        });
    out.push_back({arch, budget_score(eval, batched_logits(fit.params, x_eval, cfg.batch_size)), fit.steps});
  }
  return out;
}

inline double max_attacker_score(const std::vector<AttackerResult>& a) {
  require(!a.empty(), "no attackers");
  double best = a.front().score;
  for (const auto& r : a) best = std::max(best, r.score);
  return best;
}

template <typename S>
double target_accuracy(const ParameterSet<S>& theta_T, const nn::Act<S>& x, const Dataset& d, int batch_size) {
  const auto p = argmax_rows(batched_logits(theta_T, x, batch_size));
  std::vector<int> truth;
  for (const auto& c : d.clips) truth.push_back(c.target_label);
  return accuracy(std::span<const int>(p), std::span<const int>(truth));
}

/// Two-step evaluation of a learned anonymizer. Neither parameter set is modified.
template <typename S>
TwoStepReport evaluate_two_step(const ParameterSet<S>& theta_A, const ParameterSet<S>& theta_T,
                                const Dataset& train, const Dataset& eval, const EvalConfig& cfg) {
  validate(cfg);
  const auto archs = attacker_archs(train, cfg.n_attackers);
  const auto x_eval = anonymize_split(theta_A, eval, cfg.batch_size);
  const auto x_train = anonymize_split(theta_A, train, cfg.batch_size);
  TwoStepReport rep;
  rep.A_T = target_accuracy(theta_T, x_eval, eval, cfg.batch_size);
  rep.attackers = run_attackers(x_train, train, x_eval, eval, archs, cfg);
  rep.A_B = max_attacker_score(rep.attackers);
  return rep;
}

/// Baseline point: a fixed transform replaces f_A; a target model is trained on
/// the transformed training split, then the two-step evaluation runs.
template <typename S>
TwoStepReport run_baseline_point(const ClipTransform& transform, const Dataset& train, const Dataset& eval,
                                 const EvalConfig& cfg, ParameterSet<S>* target_out = nullptr) {
  validate(cfg);
  const auto archs = attacker_archs(train, cfg.n_attackers);
  const auto x_train = transform_split<S>(transform, train);
  const auto x_eval = transform_split<S>(transform, eval);
  const int c = train.clips.front().clip.channels();
  const ArchSpec tarch = default_target_arch(train.num_target_classes, c);
  auto fit = fit_classifier<S>(tarch, derive_seed(cfg.seed, Stream::kTargetInit),
                               derive_seed(cfg.seed, Stream::kTargetBatches), x_train, cfg.alpha_tgt,
                               cfg.target_iters, cfg,
                               [&](const nn::Matrix<S>& logits, std::span<const std::size_t> idx) {
                                 const auto y = gather_target_labels(train, idx);
                                 return cross_entropy(logits, std::span<const int>(y));
                               });
  TwoStepReport rep;
  rep.A_T = target_accuracy(fit.params, x_eval, eval, cfg.batch_size);
  rep.attackers = run_attackers(x_train, train, x_eval, eval, archs, cfg);
  rep.A_B = max_attacker_score(rep.attackers);
  if (target_out) *target_out = std::move(fit.params);
  return rep;
}

}  // namespace vidpriv

#endif  // VIDPRIV_EVALUATION_HPP_
