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

// Alternating minimax training of the anonymizer f_A against a target model
// f_T and one or more budget models f_B.
//
// Three schemes share one trainer:
//
//   grl      f_A step on L_T - gamma L_B; f_T alone until val acc > th_T;
//            f_B until train budget acc > th_B.
//   kbeam    f_A and f_T jointly on L_T until val acc > th_T; pick the beam
//            with the lowest L_B and take d_iter ascent steps of f_A on it;
//            every beam descends L_B until train budget acc > th_B.
//   entropy  f_A step on L_T - gamma H_B against the member with the lowest
//            prediction entropy; f_A and f_T jointly on L_T; every member
//            descends L_B.
//
// Restarting reinitializes all budget models at iterations t with
// t % rstrt_iter == 0. Every "until acc > th" loop checks its gate every
// gate_every steps and stops after inner_cap steps with a warning.

#ifndef VIDPRIV_TRAIN_HPP_
#define VIDPRIV_TRAIN_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vidpriv/common.hpp"
#include "vidpriv/data.hpp"
#include "vidpriv/losses.hpp"
#include "vidpriv/metrics.hpp"
#include "vidpriv/models.hpp"
#include "vidpriv/optim.hpp"

namespace vidpriv {

enum class Method { kGrl, kKBeam, kEntropy };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kGrl: return "grl";
    case Method::kKBeam: return "kbeam";
    case Method::kEntropy: return "entropy";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "grl") return Method::kGrl;
  if (s == "kbeam") return Method::kKBeam;
  if (s == "entropy") return Method::kEntropy;
  return std::nullopt;
}

struct TrainConfig {
  Method method = Method::kEntropy;
  double alpha_A = 1e-4;
  double alpha_T = 1e-5;
  double alpha_B = 1e-2;
  double th_T = 0.85;
  double th_B = 0.99;
  double gamma = 2.0;
  int max_iter = 800;
  int d_iter = 30;
  int rstrt_iter = 100;
  int inner_cap = 200;
  int K = 1;  // kbeam beams
  int M = 1;  // entropy ensemble size
  std::uint64_t seed = 0;
  bool restarting = false;

  int batch_size = 32;
  int gate_every = 5;
  int gate_samples = 512;
  int a_steps = 1;                   // adversarial f_A steps per iteration (grl, entropy)
  bool budget_updates = true;        // false freezes every budget model
  bool post_restart_warmup = false;  // retrain restarted members before resuming
  bool ensemble_path = false;        // use the member-selection code even when M = 1
  UpdateRule update_rule = UpdateRule::kAdam;
  int ckpt_every = 0;

  int num_members() const { return method == Method::kKBeam ? K : M; }
};

inline void validate(const TrainConfig& c) {
  auto need = [](bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(std::string(key) + ": " + what);
  };
  need(c.alpha_A > 0, "alpha_A", "step size must be > 0");
  need(c.alpha_T > 0, "alpha_T", "step size must be > 0");
  need(c.alpha_B > 0, "alpha_B", "step size must be > 0");
  need(c.th_T > 0 && c.th_T <= 1, "th_T", "threshold must lie in (0, 1]");
  need(c.th_B > 0 && c.th_B <= 1, "th_B", "threshold must lie in (0, 1]");
  need(c.gamma >= 0 && std::isfinite(c.gamma), "gamma", "must be finite and >= 0");
  need(c.max_iter >= 1, "max_iter", "must be >= 1");
  need(c.d_iter >= 0, "d_iter", "must be >= 0");
  need(c.rstrt_iter >= 1, "rstrt_iter", "must be >= 1");
  need(c.inner_cap >= 1, "inner_cap", "must be >= 1");
  need(c.K >= 1, "K", "must be >= 1");
  need(c.M >= 1, "M", "must be >= 1");
  need(c.batch_size >= 1, "batch_size", "must be >= 1");
  need(c.gate_every >= 1, "gate_every", "must be >= 1");
  need(c.gate_samples >= 1, "gate_samples", "must be >= 1");
  need(c.a_steps >= 0, "a_steps", "must be >= 0");
  need(c.ckpt_every >= 0, "ckpt_every", "must be >= 0");
  need(c.method == Method::kKBeam || c.K == 1, "K", "beams only apply to kbeam");
  need(c.method == Method::kEntropy || c.M == 1, "M", "ensembles only apply to entropy");
}

// ---------------------------------------------------------------------------
// Trace.

struct TraceRecord {
  int iter = 0;
  double L_T = 0;                     // validation target loss after the target phase
  std::optional<double> budget_term;  // L_B (grl, kbeam) or H_B (entropy) of the last f_A step
  double val_acc_T = 0;
  std::vector<double> train_acc_B;  // per member, after the budget phase
  bool restart = false;
  int selected = -1;  // member used by the adversarial f_A step
  int target_steps = 0;
  std::vector<int> budget_steps;
  std::vector<std::string> warnings;

  bool operator==(const TraceRecord&) const = default;
};

inline nlohmann::json to_json(const TraceRecord& r) {
  nlohmann::json j;
  j["iter"] = r.iter;
  j["L_T"] = r.L_T;
  j["budget_term"] = r.budget_term ? nlohmann::json(*r.budget_term) : nlohmann::json(nullptr);
  j["val_acc_T"] = r.val_acc_T;
  j["train_acc_B"] = r.train_acc_B;
  j["restart"] = r.restart;
  j["selected"] = r.selected;
  j["target_steps"] = r.target_steps;
  j["budget_steps"] = r.budget_steps;
  j["warnings"] = r.warnings;
  return j;
}

inline TraceRecord trace_record_from_json(const nlohmann::json& j) {
  TraceRecord r;
  try {
    r.iter = j.at("iter").get<int>();
    r.L_T = j.at("L_T").get<double>();
    if (!j.at("budget_term").is_null()) r.budget_term = j.at("budget_term").get<double>();
    r.val_acc_T = j.at("val_acc_T").get<double>();
    r.train_acc_B = j.at("train_acc_B").get<std::vector<double>>();
    r.restart = j.at("restart").get<bool>();
    r.selected = j.at("selected").get<int>();
    r.target_steps = j.at("target_steps").get<int>();
    r.budget_steps = j.at("budget_steps").get<std::vector<int>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad trace record: ") + e.what());
  }
  return r;
}

struct TrainTrace {
  std::vector<TraceRecord> records;

  int restart_count() const {
    int n = 0;
    for (const auto& r : records) n += r.restart;
    return n;
  }
  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records) out += to_json(r).dump() + "\n";
    return out;
  }
};

// ---------------------------------------------------------------------------
// Helpers.

/// Epoch-wise shuffled index stream.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {
    require(n >= 1, "cannot sample batches from an empty split");
  }

  std::vector<std::size_t> next(int batch) {
    std::vector<std::size_t> out;
    const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(batch), n_);
    while (out.size() < b) {
      if (pos_ == order_.size()) {
        order_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
        detail::shuffle(order_, rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Batch of clips from a split, in the network layout.
template <typename S>
nn::Act<S> gather_clips(const Dataset& d, std::span<const std::size_t> idx) {
  std::vector<const ClipTensor*> ptrs;
  ptrs.reserve(idx.size());
  for (std::size_t i : idx) ptrs.push_back(&d.clips.at(i).clip);
  return clips_to_act<S>(std::span<const ClipTensor* const>(ptrs));
}

inline std::vector<int> gather_target_labels(const Dataset& d, std::span<const std::size_t> idx) {
  std::vector<int> out;
  for (std::size_t i : idx) out.push_back(d.clips.at(i).target_label);
  return out;
}

inline std::vector<int> gather_budget_classes(const Dataset& d, std::span<const std::size_t> idx) {
  std::vector<int> out;
  for (std::size_t i : idx) out.push_back(budget_class(d.clips.at(i)));
  return out;
}

inline BinaryLabels gather_budget_bits(const Dataset& d, std::span<const std::size_t> idx) {
  BinaryLabels b{static_cast<int>(idx.size()), d.num_budget_outputs, {}};
  for (std::size_t i : idx) {
    const auto bits = budget_bits(d.clips.at(i));
    require(static_cast<int>(bits.size()) == b.k, "budget label width mismatch");
    b.bits.insert(b.bits.end(), bits.begin(), bits.end());
  }
  return b;
}

inline OutputKind budget_output_kind(const Dataset& d) {
  return d.budget_mode == BudgetMode::kSingleClass ? OutputKind::kSoftmax : OutputKind::kSigmoid;
}

/// L_B of budget logits against the labels of samples idx.
template <typename S>
LossGrad<S> budget_xent(const Dataset& d, const nn::Matrix<S>& logits, std::span<const std::size_t> idx) {
  if (d.budget_mode == BudgetMode::kSingleClass) {
    const auto y = gather_budget_classes(d, idx);
    return cross_entropy(logits, std::span<const int>(y));
  }
  return cross_entropy(logits, gather_budget_bits(d, idx));
}

/// Budget accuracy: top-1 for single-class labels, mean per-attribute binary
/// accuracy at probability 0.5 otherwise.
template <typename S>
double budget_accuracy(const Dataset& d, const nn::Matrix<S>& logits, std::span<const std::size_t> idx) {
  if (d.budget_mode == BudgetMode::kSingleClass) {
    const auto y = gather_budget_classes(d, idx);
    const auto p = argmax_rows(logits);
    return accuracy(std::span<const int>(p), std::span<const int>(y));
  }
  return mean_binary_accuracy(threshold_logits(logits), gather_budget_bits(d, idx));
}

/// Lowest index among the minima.
inline int argmin_lowest(std::span<const double> v) {
  require(!v.empty(), "argmin of an empty list");
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = static_cast<int>(i);
  return best;
}

/// g_target + coeff * g_term, per tensor.
template <typename S>
Grads<S> combine_grads(const Grads<S>& g_target, const Grads<S>& g_term, double coeff) {
  require(g_target.size() == g_term.size(), "gradient sets differ in size");
  Grads<S> out = g_target;
  for (std::size_t i = 0; i < out.size(); ++i) {
    require(out[i].size() == g_term[i].size(), "gradient tensors differ in size");
    for (std::size_t j = 0; j < out[i].size(); ++j)
      out[i][j] = static_cast<S>(static_cast<double>(out[i][j]) + coeff * static_cast<double>(g_term[i][j]));
  }
  return out;
}

inline std::vector<std::size_t> gate_subset(std::size_t n, int max_samples, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n <= static_cast<std::size_t>(max_samples)) return idx;
  Rng rng(seed);
  detail::shuffle(idx, rng);
  idx.resize(max_samples);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<std::size_t> chunk(std::span<const std::size_t> idx, std::size_t from, std::size_t size) {
  const std::size_t to = std::min(idx.size(), from + size);
  return std::vector<std::size_t>(idx.begin() + from, idx.begin() + to);
}

// ---------------------------------------------------------------------------
// Trainer.

struct ModelArchs {
  ArchSpec anonymizer, target, budget_base;

  static ModelArchs defaults_for(const Dataset& d) {
    const int c = d.clips.empty() ? 3 : d.clips.front().clip.channels();
    return {default_anonymizer_arch(c), default_target_arch(d.num_target_classes, c),
            default_budget_arch(d.num_budget_outputs, c)};
  }
};

enum class Phase { kAdversary, kTarget, kBudget, kRestart };

/// Components of one adversarial f_A step, for inspection by tests.
template <typename S>
struct AdversaryGrads {
  Grads<S> target;  // d L_T / d theta_A
  Grads<S> term;    // d (L_B or H_B) / d theta_A for the selected member
  double L_T = 0;
  double term_value = 0;
  int selected = 0;
  std::vector<double> member_values;  // L_B or H_B of every member
};

template <typename S>
struct TrainResult {
  ParameterSet<S> anonymizer;
  ParameterSet<S> target;
  std::vector<ParameterSet<S>> members;
  TrainTrace trace;
};

template <typename S = float>
class MinimaxTrainer {
 public:
  MinimaxTrainer(const Dataset& train, const Dataset& val, const TrainConfig& cfg)
      : MinimaxTrainer(train, val, cfg, ModelArchs::defaults_for(train)) {}

  MinimaxTrainer(const Dataset& train, const Dataset& val, const TrainConfig& cfg, const ModelArchs& archs)
      : train_(train),
        val_(val),
        cfg_(cfg),
        archs_(archs),
        net_A_(archs.anonymizer),
        net_T_(archs.target),
        opt_A_adv_(cfg.update_rule),
        opt_A_joint_(cfg.update_rule),
        opt_T_(cfg.update_rule),
        target_batches_(train.clips.size(), derive_seed(cfg.seed, Stream::kTargetBatches)),
        adversary_batches_(train.clips.size(), derive_seed(cfg.seed, Stream::kAdversaryBatches)) {
    validate(cfg_);
    validate(train_);
    validate(val_);
    require(!train_.clips.empty() && !val_.clips.empty(), "training needs non-empty train and val splits");
    require(train_.num_target_classes == val_.num_target_classes &&
                train_.num_budget_outputs == val_.num_budget_outputs &&
                train_.budget_mode == val_.budget_mode,
            "train and val splits disagree on label spaces");
    theta_A_ = init_params<S>(archs_.anonymizer, derive_seed(cfg_.seed, Stream::kAnonymizerInit));
    theta_T_ = init_params<S>(archs_.target, derive_seed(cfg_.seed, Stream::kTargetInit));
    member_archs_ = budget_family(cfg_.num_members(), archs_.budget_base, GridHalf::kTraining);
    for (std::size_t i = 0; i < member_archs_.size(); ++i) {
      members_.push_back(init_params<S>(member_archs_[i], member_seed(i, 0)));
      net_B_.emplace_back(member_archs_[i]);
      opt_B_.emplace_back(cfg_.update_rule);
      budget_batches_.emplace_back(train_.clips.size(), derive_seed(cfg_.seed, Stream::kBudgetBatches, i));
    }
    val_gate_ = gate_subset(val_.clips.size(), cfg_.gate_samples, derive_seed(cfg_.seed, Stream::kSplit, 1));
    train_gate_ =
        gate_subset(train_.clips.size(), cfg_.gate_samples, derive_seed(cfg_.seed, Stream::kSplit, 2));
  }

  const TrainConfig& config() const { return cfg_; }
  ParameterSet<S>& anonymizer() { return theta_A_; }
  ParameterSet<S>& target() { return theta_T_; }
  std::vector<ParameterSet<S>>& members() { return members_; }
  const ParameterSet<S>& anonymizer() const { return theta_A_; }
  const ParameterSet<S>& target() const { return theta_T_; }
  const std::vector<ParameterSet<S>>& members() const { return members_; }
  const TrainTrace& trace() const { return trace_; }

  /// Called with (phase, true) before and (phase, false) after every phase.
  std::function<void(Phase, bool)> phase_hook;
  /// Called after every outer iteration.
  std::function<void(const TraceRecord&, const MinimaxTrainer&)> iteration_hook;
  /// Receives one JSON line per outer iteration, flushed immediately.
  std::ostream* trace_sink = nullptr;
  /// Receives warnings.
  std::ostream* log = nullptr;

  // -------------------------------------------------------------------------
  // Single steps. Each takes explicit sample indices into the training split.

  /// Gradients w.r.t. theta_A of L_T and of the budget term on one batch.
  /// kind selects L_B (grl, kbeam) or H_B (entropy); for H_B the member with
  /// the lowest entropy is selected, for L_B the one with the lowest loss.
  AdversaryGrads<S> adversary_grads(std::span<const std::size_t> batch, bool entropy_term,
                                    bool with_target = true, std::optional<int> only_member = {}) {
    AdversaryGrads<S> out;
    auto x = gather_clips<S>(train_, batch);
    auto y = net_A_.transform(theta_A_, x);
    nn::Act<S> gy(y.shape);
    if (with_target) {
      auto lt = net_T_.logits(theta_T_, y);
      const auto labels = gather_target_labels(train_, batch);
      auto ce = cross_entropy(lt, std::span<const int>(labels));
      out.L_T = ce.loss.value;
      auto scratch = zero_grads(theta_T_);
      gy = net_T_.backward_logits(theta_T_, ce.grad, scratch, true);
    }
    out.target = zero_grads(theta_A_);
    net_A_.backward_transform(theta_A_, gy, out.target, false);

    std::vector<LossGrad<S>> terms;
    const int first = only_member ? *only_member : 0;
    const int last = only_member ? *only_member + 1 : static_cast<int>(members_.size());
    for (int i = first; i < last; ++i) {
      auto lb = net_B_[i].logits(members_[i], y);
      terms.push_back(entropy_term ? prediction_entropy(lb, budget_output_kind(train_))
                                   : budget_xent(train_, lb, batch));
      out.member_values.push_back(terms.back().loss.value);
    }
    const int local = argmin_lowest(out.member_values);
    out.selected = first + local;
    out.term_value = out.member_values[local];
    auto scratch = zero_grads(members_[out.selected]);
    auto gterm = net_B_[out.selected].backward_logits(members_[out.selected], terms[local].grad, scratch, true);
    out.term = zero_grads(theta_A_);
    net_A_.backward_transform(theta_A_, gterm, out.term, false);
    return out;
  }

  /// GRL: theta_A descends L_T - gamma L_B.
  AdversaryGrads<S> grl_step(std::span<const std::size_t> batch) {
    auto g = adversary_grads(batch, false, true, 0);
    check_finite_loss(g.L_T, "L_T");
    check_finite_loss(g.term_value, "L_B");
    opt_A_adv_.step(theta_A_, combine_grads(g.target, g.term, -cfg_.gamma), cfg_.alpha_A);
    return g;
  }

  /// Entropy: theta_A descends L_T - gamma H_B of the lowest-entropy member.
  AdversaryGrads<S> entropy_step(std::span<const std::size_t> batch) {
    const bool single = members_.size() == 1 && !cfg_.ensemble_path;
    auto g = adversary_grads(batch, true, true, single ? std::optional<int>(0) : std::nullopt);
    check_finite_loss(g.L_T, "L_T");
    check_finite_loss(g.term_value, "H_B");
    opt_A_adv_.step(theta_A_, combine_grads(g.target, g.term, -cfg_.gamma), cfg_.alpha_A);
    return g;
  }

  /// K-Beam selection: index of the beam with the lowest L_B on the batch.
  int kbeam_select(std::span<const std::size_t> batch, std::vector<double>* losses = nullptr) {
    auto x = gather_clips<S>(train_, batch);
    auto y = net_A_.transform(theta_A_, x);
    std::vector<double> l;
    for (std::size_t i = 0; i < members_.size(); ++i) {
      auto lb = net_B_[i].logits(members_[i], y);
      l.push_back(budget_xent(train_, lb, batch).loss.value);
      check_finite_loss(l.back(), "L_B");
    }
    if (losses) *losses = l;
    return argmin_lowest(l);
  }

  /// K-Beam ascent: theta_A moves up L_B of beam j. Returns L_B before the step.
  double kbeam_ascent_step(int j, std::span<const std::size_t> batch) {
    auto g = adversary_grads(batch, false, false, j);
    check_finite_loss(g.term_value, "L_B");
    opt_A_adv_.step(theta_A_, combine_grads(g.target, g.term, -1.0), cfg_.alpha_A);
    return g.term_value;
  }

  /// One L_T descent step on theta_T, and on theta_A too when joint.
  double target_step(std::span<const std::size_t> batch, bool joint) {
    auto x = gather_clips<S>(train_, batch);
    auto y = net_A_.transform(theta_A_, x);
    auto lt = net_T_.logits(theta_T_, y);
    const auto labels = gather_target_labels(train_, batch);
    auto ce = cross_entropy(lt, std::span<const int>(labels));
    check_finite_loss(ce.loss.value, "L_T");
    auto gT = zero_grads(theta_T_);
    auto gy = net_T_.backward_logits(theta_T_, ce.grad, gT, joint);
    if (joint) {
      auto gA = zero_grads(theta_A_);
      net_A_.backward_transform(theta_A_, gy, gA, false);
      opt_A_joint_.step(theta_A_, gA, cfg_.alpha_T);
    }
    opt_T_.step(theta_T_, gT, cfg_.alpha_T);
    return ce.loss.value;
  }

  /// One L_B descent step of member i on the cached f_A(X^t).
  double budget_step(std::size_t i, std::span<const std::size_t> batch) {
    ensure_cache();
    auto y = nn::select_samples(cache_, batch);
    auto lb = net_B_[i].logits(members_[i], y);
    auto ce = budget_xent(train_, lb, batch);
    check_finite_loss(ce.loss.value, "L_B");
    auto g = zero_grads(members_[i]);
    net_B_[i].backward_logits(members_[i], ce.grad, g, false);
    opt_B_[i].step(members_[i], g, cfg_.alpha_B);
    return ce.loss.value;
  }

  /// Reinitializes every budget model with fresh seeds and resets its optimizer.
  void restart_members() {
    ++generation_;
    for (std::size_t i = 0; i < members_.size(); ++i) {
      members_[i] = init_params<S>(member_archs_[i], member_seed(i, generation_));
      opt_B_[i].reset();
    }
  }

  // -------------------------------------------------------------------------
  // Gates.

  /// Accuracy (and mean L_T) of f_T(f_A(X^v)) on the validation gate subset.
  double val_target_accuracy(double* loss = nullptr) {
    std::vector<int> pred, truth;
    double total = 0;
    for (std::size_t from = 0; from < val_gate_.size(); from += cfg_.batch_size) {
      const auto idx = chunk(val_gate_, from, cfg_.batch_size);
      auto y = net_A_.transform(theta_A_, gather_clips<S>(val_, idx));
      auto lt = net_T_.logits(theta_T_, y);
      const auto labels = gather_target_labels(val_, idx);
      total += cross_entropy(lt, std::span<const int>(labels)).loss.value * static_cast<double>(idx.size());
      const auto p = argmax_rows(lt);
      pred.insert(pred.end(), p.begin(), p.end());
      truth.insert(truth.end(), labels.begin(), labels.end());
    }
    if (loss) *loss = total / static_cast<double>(val_gate_.size());
    return accuracy(std::span<const int>(pred), std::span<const int>(truth));
  }

  /// Budget accuracy of member i on the training gate subset (cached f_A output).
  double train_budget_accuracy(std::size_t i) {
    ensure_cache();
    double hits = 0;
    for (std::size_t from = 0; from < train_gate_.size(); from += cfg_.batch_size) {
      const auto idx = chunk(train_gate_, from, cfg_.batch_size);
      auto lb = net_B_[i].logits(members_[i], nn::select_samples(cache_, idx));
      hits += budget_accuracy(train_, lb, idx) * static_cast<double>(idx.size());
    }
    return hits / static_cast<double>(train_gate_.size());
  }

  // -------------------------------------------------------------------------
  // Phases.

  void target_phase(bool joint, TraceRecord& rec) {
    notify(Phase::kTarget, true);
    double loss = 0;
    double acc = val_target_accuracy(&loss);
    int steps = 0;
    while (acc <= cfg_.th_T) {
      if (steps >= cfg_.inner_cap) {
        warn(rec, detail::concat("iter ", rec.iter, ": target loop hit inner_cap=", cfg_.inner_cap,
                                 " at val acc ", acc));
        break;
      }
      for (int k = 0; k < cfg_.gate_every && steps < cfg_.inner_cap; ++k, ++steps)
        target_step(target_batches_.next(cfg_.batch_size), joint);
      if (joint) invalidate_cache();
      acc = val_target_accuracy(&loss);
    }
    rec.target_steps = steps;
    rec.val_acc_T = acc;
    rec.L_T = loss;
    notify(Phase::kTarget, false);
  }

  void budget_phase(TraceRecord& rec) {
    notify(Phase::kBudget, true);
    rec.train_acc_B.assign(members_.size(), 0.0);
    rec.budget_steps.assign(members_.size(), 0);
    for (std::size_t i = 0; i < members_.size(); ++i) {
      double acc = train_budget_accuracy(i);
      int steps = 0;
      while (acc <= cfg_.th_B) {
        if (steps >= cfg_.inner_cap) {
          warn(rec, detail::concat("iter ", rec.iter, ": budget loop of member ", i, " hit inner_cap=",
                                   cfg_.inner_cap, " at train acc ", acc));
          break;
        }
        for (int k = 0; k < cfg_.gate_every && steps < cfg_.inner_cap; ++k, ++steps)
          budget_step(i, budget_batches_[i].next(cfg_.batch_size));
        acc = train_budget_accuracy(i);
      }
      rec.train_acc_B[i] = acc;
      rec.budget_steps[i] += steps;
    }
    notify(Phase::kBudget, false);
  }

  /// One outer iteration t (1-based).
  TraceRecord iterate(int t) {
    TraceRecord rec;
    rec.iter = t;
    if (cfg_.restarting && t % cfg_.rstrt_iter == 0) {
      notify(Phase::kRestart, true);
      restart_members();
      rec.restart = true;
      notify(Phase::kRestart, false);
      if (cfg_.post_restart_warmup && cfg_.budget_updates) budget_phase(rec);
    }
    const auto warm_steps = rec.budget_steps;
    switch (cfg_.method) {
      case Method::kGrl:
        adversary_phase(rec, [&](auto batch) { return grl_step(batch); });
        target_phase(false, rec);
        break;
      case Method::kEntropy:
        adversary_phase(rec, [&](auto batch) { return entropy_step(batch); });
        target_phase(true, rec);
        break;
      case Method::kKBeam:
        target_phase(true, rec);
        if (cfg_.d_iter > 0) {
          notify(Phase::kAdversary, true);
          rec.selected = kbeam_select(adversary_batches_.next(cfg_.batch_size));
          for (int d = 0; d < cfg_.d_iter; ++d)
            rec.budget_term = kbeam_ascent_step(rec.selected, adversary_batches_.next(cfg_.batch_size));
          invalidate_cache();
          notify(Phase::kAdversary, false);
        }
        break;
    }
    if (cfg_.budget_updates) {
      budget_phase(rec);
      for (std::size_t i = 0; i < warm_steps.size(); ++i) rec.budget_steps[i] += warm_steps[i];
    }
    return rec;
  }

  TrainResult<S> run() {
    for (int t = 1; t <= cfg_.max_iter; ++t) {
      TraceRecord rec = iterate(t);
      trace_.records.push_back(rec);
      if (trace_sink) *trace_sink << to_json(rec).dump() << "\n" << std::flush;
      if (iteration_hook) iteration_hook(rec, *this);
    }
    return {theta_A_, theta_T_, members_, trace_};
  }

 private:
  std::uint64_t member_seed(std::size_t i, int generation) const {
    return derive_seed(cfg_.seed, Stream::kBudgetInit, i, generation);
  }

  template <typename Step>
  void adversary_phase(TraceRecord& rec, Step step) {
    if (cfg_.a_steps == 0) return;
    notify(Phase::kAdversary, true);
    for (int a = 0; a < cfg_.a_steps; ++a) {
      auto g = step(adversary_batches_.next(cfg_.batch_size));
      rec.selected = g.selected;
      rec.budget_term = g.term_value;
    }
    invalidate_cache();
    notify(Phase::kAdversary, false);
  }

  void ensure_cache() {
    if (cache_valid_) return;
    std::vector<std::size_t> all(train_.clips.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    for (std::size_t from = 0; from < all.size(); from += cfg_.batch_size) {
      const auto idx = chunk(all, from, cfg_.batch_size);
      auto y = net_A_.transform(theta_A_, gather_clips<S>(train_, idx));
      if (from == 0) {
        nn::Shape5 s = y.shape;
        s.n = static_cast<int>(all.size());
        cache_ = nn::Act<S>(s);
      }
      const std::size_t block = y.shape.spatial();
      for (int c = 0; c < y.shape.c; ++c)
        std::copy_n(y.v.data() + static_cast<std::size_t>(c) * idx.size() * block, idx.size() * block,
                    cache_.v.data() + (static_cast<std::size_t>(c) * all.size() + from) * block);
    }
    cache_valid_ = true;
  }

  void invalidate_cache() { cache_valid_ = false; }

  void notify(Phase p, bool begin) {
    if (phase_hook) phase_hook(p, begin);
  }

  void warn(TraceRecord& rec, std::string msg) {
    if (log) *log << "warning: " << msg << "\n";
    rec.warnings.push_back(std::move(msg));
  }

  static void check_finite_loss(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
  }

  const Dataset& train_;
  const Dataset& val_;
  TrainConfig cfg_;
  ModelArchs archs_;
  Network<S> net_A_, net_T_;
  std::vector<Network<S>> net_B_;
  ParameterSet<S> theta_A_, theta_T_;
  std::vector<ArchSpec> member_archs_;
  std::vector<ParameterSet<S>> members_;
  Optimizer opt_A_adv_, opt_A_joint_, opt_T_;
  std::vector<Optimizer> opt_B_;
  BatchSampler target_batches_, adversary_batches_;
  std::vector<BatchSampler> budget_batches_;
  std::vector<std::size_t> val_gate_, train_gate_;
  nn::Act<S> cache_;
  bool cache_valid_ = false;
  int generation_ = 0;
  TrainTrace trace_;
};

/// Runs the configured scheme end to end.
template <typename S = float>
TrainResult<S> train(const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                     std::ostream* trace_sink = nullptr, std::ostream* log = nullptr) {
  MinimaxTrainer<S> t(train, val, cfg);
  t.trace_sink = trace_sink;
  t.log = log;
  return t.run();
}

template <typename S = float>
TrainResult<S> train_grl(const Dataset& train, const Dataset& val, TrainConfig cfg) {
  require(cfg.method == Method::kGrl, "train_grl needs method grl");
  return vidpriv::train<S>(train, val, cfg);
}

template <typename S = float>
TrainResult<S> train_kbeam(const Dataset& train, const Dataset& val, TrainConfig cfg) {
  require(cfg.method == Method::kKBeam, "train_kbeam needs method kbeam");
  return vidpriv::train<S>(train, val, cfg);
}

template <typename S = float>
TrainResult<S> train_entropy(const Dataset& train, const Dataset& val, TrainConfig cfg) {
  require(cfg.method == Method::kEntropy, "train_entropy needs method entropy");
  return vidpriv::train<S>(train, val, cfg);
}

}  // namespace vidpriv

#endif  // VIDPRIV_TRAIN_HPP_
