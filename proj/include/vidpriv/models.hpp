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

#ifndef VIDPRIV_MODELS_HPP_
#define VIDPRIV_MODELS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vidpriv/common.hpp"
#include "vidpriv/data.hpp"
#include "vidpriv/nn.hpp"

namespace vidpriv {

enum class Role : int { kAnonymizer = 0, kTarget = 1, kBudget = 2 };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::kAnonymizer: return "anonymizer";
    case Role::kTarget: return "target";
    case Role::kBudget: return "budget";
  }
  return "?";
}

// Budget family axes, listed from the middle outwards so that small families
// hold mid-sized models.
inline constexpr std::array<double, 8> kBudgetWidths = {1.0, 0.75, 1.25, 0.5, 1.5, 0.25, 1.75, 2.0};
inline constexpr std::array<int, 3> kBudgetDepths = {3, 2, 1};

struct ArchSpec {
  Role role = Role::kAnonymizer;
  int depth = 3;
  double width_multiplier = 1.0;
  int num_outputs = 3;
  int channels = 3;  // input channels

  bool operator==(const ArchSpec&) const = default;
};

inline void validate(const ArchSpec& a) {
  require(a.channels == 1 || a.channels == 3, "arch input channels must be 1 or 3");
  require(a.width_multiplier > 0, "width multiplier must be positive");
  require(a.num_outputs >= 1, "num_outputs must be >= 1");
  switch (a.role) {
    case Role::kAnonymizer:
      require(a.depth >= 2, "anonymizer depth must be >= 2");
      require(a.num_outputs == a.channels, "anonymizer output shape must equal its input shape");
      break;
    case Role::kTarget:
      require(a.depth >= 1, "target depth must be >= 1");
      break;
    case Role::kBudget:
      require(a.depth >= 1, "budget depth must be >= 1");
      require(std::find(kBudgetWidths.begin(), kBudgetWidths.end(), a.width_multiplier) !=
                  kBudgetWidths.end(),
              "budget width multiplier ", a.width_multiplier, " not in the budget family");
      break;
  }
}

inline ArchSpec default_anonymizer_arch(int channels = 3) {
  return {Role::kAnonymizer, 3, 1.0, channels, channels};
}
inline ArchSpec default_target_arch(int num_classes, int channels = 3) {
  return {Role::kTarget, 4, 1.0, num_classes, channels};
}
inline ArchSpec default_budget_arch(int num_outputs, int channels = 3) {
  return {Role::kBudget, 3, 1.0, num_outputs, channels};
}

// ---------------------------------------------------------------------------
// Parameter sets.

template <typename S>
struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<S> values;
  bool operator==(const NamedTensor&) const = default;
};

template <typename S>
struct ParameterSet {
  ArchSpec arch;
  std::vector<NamedTensor<S>> weights;
  std::uint64_t seed = 0;

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& t : weights) n += t.values.size();
    return n;
  }
  bool operator==(const ParameterSet&) const = default;
};

/// Gradient buffers aligned with ParameterSet::weights.
template <typename S>
using Grads = std::vector<std::vector<S>>;

template <typename S>
Grads<S> zero_grads(const ParameterSet<S>& p) {
  Grads<S> g(p.weights.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i].assign(p.weights[i].values.size(), S(0));
  return g;
}

template <typename S>
std::uint64_t parameter_hash(const ParameterSet<S>& p) {
  Fnv1a h;
  for (const auto& t : p.weights) {
    h.update(t.name);
    h.update(t.shape.data(), t.shape.size() * sizeof(int));
    h.update(t.values.data(), t.values.size() * sizeof(S));
  }
  return h.digest();
}

template <typename To, typename From>
ParameterSet<To> cast_params(const ParameterSet<From>& p) {
  ParameterSet<To> out{p.arch, {}, p.seed};
  for (const auto& t : p.weights)
    out.weights.push_back({t.name, t.shape, std::vector<To>(t.values.begin(), t.values.end())});
  return out;
}

// ---------------------------------------------------------------------------
// Layer plans.

struct ConvLayerPlan {
  int in = 0, out = 0;
  nn::Kernel3 kernel;
  bool relu = true;
  bool pool_after = false;
  double init_gain = 1.0;
};

struct NetworkPlan {
  std::vector<ConvLayerPlan> convs;
  bool has_dense = false;
  int dense_in = 0, dense_out = 0;
  bool temporal_kernels = false;  // 3D (spatiotemporal) kernels and pooling
};

inline int scaled_width(int base, double mult) {
  return std::max(1, static_cast<int>(std::lround(base * mult)));
}

inline NetworkPlan make_plan(const ArchSpec& a) {
  validate(a);
  NetworkPlan p;
  static constexpr std::array<int, 4> kBase = {8, 16, 16, 16};
  auto base = [](int i) { return kBase[std::min<std::size_t>(i, kBase.size() - 1)]; };
  switch (a.role) {
    case Role::kAnonymizer: {
      const int hidden = scaled_width(8, a.width_multiplier);
      for (int i = 0; i < a.depth; ++i) {
        const bool last = i == a.depth - 1;
        // The residual branch starts small so f_A begins near the identity.
        p.convs.push_back({i == 0 ? a.channels : hidden, last ? a.channels : hidden,
                           nn::Kernel3{1, 3, 3}, !last, false, last ? 0.1 : 1.0});
      }
      break;
    }
    case Role::kTarget:
    case Role::kBudget: {
      const bool temporal = a.role == Role::kTarget;
      p.temporal_kernels = temporal;
      int in = a.channels;
      for (int i = 0; i < a.depth; ++i) {
        const int out = scaled_width(base(i), a.width_multiplier);
        p.convs.push_back({in, out, temporal ? nn::Kernel3{3, 3, 3} : nn::Kernel3{1, 3, 3}, true,
                           i < 2 && i < a.depth - 1, 1.0});
        in = out;
      }
      p.has_dense = true;
      p.dense_in = in;
      p.dense_out = a.num_outputs;
      break;
    }
  }
  return p;
}

/// Zero-mean normal weights with variance gain^2 * 2 / fan_in for convolutions and
/// 1 / fan_in for the dense head; zero biases. Deterministic in (arch, seed).
template <typename S>
ParameterSet<S> init_params(const ArchSpec& arch, std::uint64_t seed) {
  const NetworkPlan plan = make_plan(arch);
  ParameterSet<S> p{arch, {}, seed};
  auto draw = [&](std::size_t tensor, std::size_t n, double stddev) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(arch.role) + 101, tensor));
    std::normal_distribution<double> nd(0.0, stddev);
    std::vector<S> v(n);
    for (auto& x : v) x = static_cast<S>(nd(rng));
    return v;
  };
  for (std::size_t i = 0; i < plan.convs.size(); ++i) {
    const auto& c = plan.convs[i];
    const int fan_in = c.in * c.kernel.volume();
    const std::size_t n = static_cast<std::size_t>(c.out) * fan_in;
    p.weights.push_back({"conv" + std::to_string(i) + ".w",
                         {c.out, c.in, c.kernel.d, c.kernel.h, c.kernel.w},
                         draw(2 * i, n, c.init_gain * std::sqrt(2.0 / fan_in))});
    p.weights.push_back({"conv" + std::to_string(i) + ".b", {c.out}, std::vector<S>(c.out, S(0))});
  }
  if (plan.has_dense) {
    const std::size_t n = static_cast<std::size_t>(plan.dense_out) * plan.dense_in;
    p.weights.push_back({"fc.w", {plan.dense_out, plan.dense_in},
                         draw(2 * plan.convs.size(), n, std::sqrt(1.0 / plan.dense_in))});
    p.weights.push_back({"fc.b", {plan.dense_out}, std::vector<S>(plan.dense_out, S(0))});
  }
  return p;
}

/// Throws unless the weights match the architecture exactly and are finite.
template <typename S>
void validate(const ParameterSet<S>& p) {
  const ParameterSet<S> ref = init_params<S>(p.arch, 0);
  require(ref.weights.size() == p.weights.size(), "parameter tensor count does not match arch");
  for (std::size_t i = 0; i < ref.weights.size(); ++i) {
    const auto& a = ref.weights[i];
    const auto& b = p.weights[i];
    require(a.name == b.name && a.shape == b.shape && a.values.size() == b.values.size(),
            "parameter tensor '", b.name, "' does not match arch");
    for (S v : b.values) require(std::isfinite(static_cast<double>(v)), "non-finite weight in '", b.name, "'");
  }
}

// ---------------------------------------------------------------------------
// Batched forward / backward.

template <typename S>
nn::Act<S> clips_to_act(std::span<const ClipTensor* const> clips) {
  require(!clips.empty(), "empty clip batch");
  const ClipTensor& f = *clips.front();
  nn::Act<S> a(nn::Shape5{f.channels(), static_cast<int>(clips.size()), f.frames(), f.height(), f.width()});
  const std::size_t block = static_cast<std::size_t>(f.frames()) * f.frame_plane();
  for (std::size_t n = 0; n < clips.size(); ++n) {
    require(clips[n]->same_shape(f), "clip batch has mixed shapes");
    auto src = clips[n]->values();
    for (int c = 0; c < f.channels(); ++c)
      std::copy_n(src.data() + c * block, block, a.v.data() + (c * clips.size() + n) * block);
  }
  return a;
}

template <typename S>
nn::Act<S> clips_to_act(const std::vector<ClipTensor>& clips) {
  std::vector<const ClipTensor*> ptrs;
  for (const auto& c : clips) ptrs.push_back(&c);
  return clips_to_act<S>(std::span<const ClipTensor* const>(ptrs));
}

/// Extracts sample n of a [C][N][T][H][W] activation as a clip. Values must lie in [0, 1].
template <typename S>
ClipTensor act_to_clip(const nn::Act<S>& a, int n) {
  const auto& s = a.shape;
  const std::size_t block = s.spatial();
  std::vector<float> v(static_cast<std::size_t>(s.c) * block);
  for (int c = 0; c < s.c; ++c) {
    const S* src = a.v.data() + (static_cast<std::size_t>(c) * s.n + n) * block;
    for (std::size_t i = 0; i < block; ++i) v[c * block + i] = static_cast<float>(src[i]);
  }
  return ClipTensor(s.d, s.w, s.h, s.c, std::move(v));
}

/// One network instance. Caches what backward needs; holds no parameters.
template <typename S>
class Network {
 public:
  using Act = nn::Act<S>;
  using Matrix = nn::Matrix<S>;

  explicit Network(const ArchSpec& arch) : arch_(arch), plan_(make_plan(arch)) {}

  const ArchSpec& arch() const { return arch_; }

  /// Anonymizer forward: clamp01(x + residual(x)), same shape as x.
  Act transform(const ParameterSet<S>& p, const Act& x) {
    require(arch_.role == Role::kAnonymizer, "transform needs an anonymizer");
    check_input(p, x);
    Act r = run_convs(p, x);
    pre_clamp_ = std::move(r);
    for (std::size_t i = 0; i < pre_clamp_.v.size(); ++i) pre_clamp_.v[i] += x.v[i];
    Act out = pre_clamp_;
    for (auto& v : out.v) v = std::clamp(v, S(0), S(1));
    return out;
  }

  /// Classifier forward: logits, one row per sample. Budget networks average
  /// per-frame logits over time; targets pool the whole spatiotemporal volume.
  Matrix logits(const ParameterSet<S>& p, const Act& x) {
    require(arch_.role != Role::kAnonymizer, "logits needs a classifier");
    check_input(p, x);
    Act feat = run_convs(p, x);
    feat_shape_ = feat.shape;
    const std::size_t reduce = plan_.temporal_kernels ? feat.shape.spatial()
                                                      : static_cast<std::size_t>(feat.shape.h) * feat.shape.w;
    pooled_ = nn::mean_pool_forward(feat, reduce);
    const std::size_t wi = 2 * plan_.convs.size();
    Matrix per = nn::dense_forward(pooled_, p.weights[wi].values, p.weights[wi + 1].values, plan_.dense_out);
    if (plan_.temporal_kernels) return per.transpose();
    return average_frames(per, x.shape.n, x.shape.d);
  }

  /// Backward for transform(). grad_out has the output shape. Returns dL/dx
  /// (including the residual path) when want_input.
  Act backward_transform(const ParameterSet<S>& p, const Act& grad_out, Grads<S>& g, bool want_input) {
    Act gr = grad_out;
    for (std::size_t i = 0; i < gr.v.size(); ++i) {
      const S v = pre_clamp_.v[i];
      if (v < S(0) || v > S(1)) gr.v[i] = S(0);
    }
    Act gx = backward_convs(p, gr, g, want_input);
    if (want_input)
      for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gr.v[i];
    return gx;
  }

  /// Backward for logits(). grad_logits is (N x O), one row per sample.
  Act backward_logits(const ParameterSet<S>& p, const Matrix& grad_logits, Grads<S>& g, bool want_input) {
    const std::size_t wi = 2 * plan_.convs.size();
    Matrix gper;
    if (plan_.temporal_kernels) {
      gper = grad_logits.transpose();
    } else {
      const int n = static_cast<int>(grad_logits.rows()), t = feat_shape_.d;
      gper.resize(plan_.dense_out, static_cast<Eigen::Index>(n) * t);
      for (int o = 0; o < plan_.dense_out; ++o)
        for (int i = 0; i < n; ++i)
          for (int f = 0; f < t; ++f) gper(o, i * t + f) = grad_logits(i, o) / static_cast<S>(t);
    }
    Matrix gpool = nn::dense_backward(pooled_, p.weights[wi].values, plan_.dense_out, gper, g[wi], g[wi + 1]);
    const std::size_t reduce = plan_.temporal_kernels ? feat_shape_.spatial()
                                                      : static_cast<std::size_t>(feat_shape_.h) * feat_shape_.w;
    Act gfeat = nn::mean_pool_backward(feat_shape_, reduce, gpool);
    return backward_convs(p, gfeat, g, want_input);
  }

  /// Hash of the on/off pattern of every ReLU and of the output clamp in the
  /// last forward pass. Equal hashes mean the same piecewise-linear region.
  std::uint64_t activation_pattern() const {
    Fnv1a h;
    for (std::size_t k = 0; k < conv_out_.size(); ++k) {
      if (!plan_.convs[k].relu) continue;
      for (S v : conv_out_[k].v) {
        const unsigned char on = v > S(0);
        h.update(&on, 1);
      }
    }
    for (S v : pre_clamp_.v) {
      const unsigned char region = v < S(0) ? 0 : (v > S(1) ? 2 : 1);
      h.update(&region, 1);
    }
    return h.digest();
  }

  /// (O x N*T) per-frame logits -> (N x O) clip logits, averaged before any softmax.
  static Matrix average_frames(const Matrix& per_frame, int n, int t) {
    Matrix out(n, per_frame.rows());
    for (Eigen::Index o = 0; o < per_frame.rows(); ++o)
      for (int i = 0; i < n; ++i) {
        S acc = 0;
        for (int f = 0; f < t; ++f) acc += per_frame(o, static_cast<Eigen::Index>(i) * t + f);
        out(i, o) = acc / static_cast<S>(t);
      }
    return out;
  }

 private:
  void check_input(const ParameterSet<S>& p, const Act& x) const {
    require(p.arch == arch_, "parameter set arch does not match network");
    require(x.shape.c == arch_.channels, "input has ", x.shape.c, " channels, arch expects ",
            arch_.channels);
    require(x.shape.n >= 1 && x.shape.d >= 1 && x.shape.h >= 1 && x.shape.w >= 1, "empty input");
  }

  Act run_convs(const ParameterSet<S>& p, const Act& x) {
    const std::size_t L = plan_.convs.size();
    conv_in_.assign(L, Act{});
    conv_out_.assign(L, Act{});
    pool_window_.assign(L, nn::Kernel3{1, 1, 1});
    Act cur = x;
    for (std::size_t i = 0; i < L; ++i) {
      const auto& c = plan_.convs[i];
      conv_in_[i] = std::move(cur);
      Act y = nn::conv_forward(conv_in_[i], p.weights[2 * i].values, p.weights[2 * i + 1].values, c.out, c.kernel);
      if (c.relu) nn::relu_inplace(y);
      if (c.pool_after) {
        pool_window_[i] = nn::halving_window(y.shape, plan_.temporal_kernels);
        conv_out_[i] = std::move(y);
        cur = nn::avg_pool_forward(conv_out_[i], pool_window_[i]);
      } else {
        conv_out_[i] = y;
        cur = std::move(y);
      }
    }
    return cur;
  }

  Act backward_convs(const ParameterSet<S>& p, Act grad, Grads<S>& g, bool want_input) {
    for (std::size_t k = plan_.convs.size(); k-- > 0;) {
      const auto& c = plan_.convs[k];
      if (c.pool_after) grad = nn::avg_pool_backward(conv_out_[k].shape, pool_window_[k], grad);
      if (c.relu) nn::relu_backward_inplace(conv_out_[k], grad);
      grad = nn::conv_backward(conv_in_[k], p.weights[2 * k].values, c.out, c.kernel, grad, g[2 * k],
                               g[2 * k + 1], want_input || k > 0);
    }
    return grad;
  }

  ArchSpec arch_;
  NetworkPlan plan_;
  std::vector<Act> conv_in_, conv_out_;
  std::vector<nn::Kernel3> pool_window_;
  Act pre_clamp_;
  nn::Shape5 feat_shape_;
  Matrix pooled_;
};

// ---------------------------------------------------------------------------
// Single-clip convenience API.

template <typename S>
ClipTensor anonymize(const ParameterSet<S>& theta_a, const ClipTensor& clip) {
  require(theta_a.arch.role == Role::kAnonymizer, "anonymize needs anonymizer parameters");
  const ClipTensor* one[] = {&clip};
  Network<S> net(theta_a.arch);
  auto out = net.transform(theta_a, clips_to_act<S>(std::span<const ClipTensor* const>(one)));
  return act_to_clip(out, 0);
}

template <typename S>
std::vector<S> predict_target(const ParameterSet<S>& theta_t, const ClipTensor& clip) {
  require(theta_t.arch.role == Role::kTarget, "predict_target needs target parameters");
  const ClipTensor* one[] = {&clip};
  Network<S> net(theta_t.arch);
  auto l = net.logits(theta_t, clips_to_act<S>(std::span<const ClipTensor* const>(one)));
  return std::vector<S>(l.data(), l.data() + l.size());
}

template <typename S>
std::vector<S> predict_budget(const ParameterSet<S>& theta_b, const ClipTensor& clip) {
  require(theta_b.arch.role == Role::kBudget, "predict_budget needs budget parameters");
  const ClipTensor* one[] = {&clip};
  Network<S> net(theta_b.arch);
  auto l = net.logits(theta_b, clips_to_act<S>(std::span<const ClipTensor* const>(one)));
  return std::vector<S>(l.data(), l.data() + l.size());
}

// ---------------------------------------------------------------------------
// Budget model family.

enum class GridHalf { kTraining, kEvaluation };

/// The full (width x depth) grid, in a fixed order. Even positions form the
/// training half and odd positions the evaluation half, so both halves span
/// every depth and the whole width range.
inline std::vector<ArchSpec> budget_grid(const ArchSpec& base) {
  std::vector<ArchSpec> grid;
  for (double w : kBudgetWidths)
    for (int depth : kBudgetDepths) {
      ArchSpec a = base;
      a.role = Role::kBudget;
      a.depth = depth;
      a.width_multiplier = w;
      grid.push_back(a);
    }
  return grid;
}

inline std::vector<ArchSpec> budget_family(int count, const ArchSpec& base, GridHalf half) {
  require(count >= 1, "budget family size must be >= 1");
  const auto grid = budget_grid(base);
  std::vector<ArchSpec> halfgrid;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if ((i % 2 == 0) == (half == GridHalf::kTraining)) halfgrid.push_back(grid[i]);
  require(static_cast<std::size_t>(count) <= halfgrid.size(), "budget family size ", count,
          " exceeds the ", halfgrid.size(), " architectures in this half of the grid");
  halfgrid.resize(count);
  return halfgrid;
}

}  // namespace vidpriv

#endif  // VIDPRIV_MODELS_HPP_
