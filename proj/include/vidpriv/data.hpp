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

#ifndef VIDPRIV_DATA_HPP_
#define VIDPRIV_DATA_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vidpriv/common.hpp"

namespace vidpriv {

/// A video clip of T frames, each W x H with C channels, intensities in [0, 1].
///
/// Logical shape is [T, W, H, C]. Storage is planar, channel-major:
/// index = ((c * T + t) * H + y) * W + x. Networks consume this layout directly.
class ClipTensor {
 public:
  ClipTensor() = default;

  ClipTensor(int t, int w, int h, int c) : t_(t), w_(w), h_(h), c_(c) {
    check_dims(t, w, h, c);
    values_.assign(static_cast<std::size_t>(t) * w * h * c, 0.0f);
  }

  ClipTensor(int t, int w, int h, int c, std::vector<float> values)
      : t_(t), w_(w), h_(h), c_(c), values_(std::move(values)) {
    check_dims(t, w, h, c);
    require(values_.size() == static_cast<std::size_t>(t) * w * h * c,
            "clip value count ", values_.size(), " does not match shape");
    for (float v : values_) {
      require(std::isfinite(v) && v >= 0.0f && v <= 1.0f, "clip value ", v, " outside [0,1]");
    }
  }

  int frames() const { return t_; }
  int width() const { return w_; }
  int height() const { return h_; }
  int channels() const { return c_; }
  std::size_t size() const { return values_.size(); }
  std::size_t frame_plane() const { return static_cast<std::size_t>(w_) * h_; }

  std::size_t index(int t, int x, int y, int c) const {
    return ((static_cast<std::size_t>(c) * t_ + t) * h_ + y) * w_ + x;
  }
  float at(int t, int x, int y, int c) const { return values_[index(t, x, y, c)]; }
  float& at(int t, int x, int y, int c) { return values_[index(t, x, y, c)]; }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  bool same_shape(const ClipTensor& o) const {
    return t_ == o.t_ && w_ == o.w_ && h_ == o.h_ && c_ == o.c_;
  }
  bool operator==(const ClipTensor&) const = default;

 private:
  static void check_dims(int t, int w, int h, int c) {
    require(t >= 1 && w >= 1 && h >= 1, "clip dimensions must be positive");
    require(c == 1 || c == 3, "clip channel count must be 1 or 3, got ", c);
  }

  int t_ = 0, w_ = 0, h_ = 0, c_ = 0;
  std::vector<float> values_;
};

// ---------------------------------------------------------------------------
// Privacy attribute schema (per-frame labels).

inline constexpr int kNumAttributes = 5;

enum class Attribute : int { kSkinColor = 0, kFace, kGender, kNudity, kRelationship };

inline constexpr std::array<std::string_view, kNumAttributes> kAttributeNames = {
    "skin_color", "face", "gender", "nudity", "relationship"};

/// Number of admissible values per attribute, in Attribute order.
inline constexpr std::array<int, kNumAttributes> kAttributeCardinality = {5, 3, 4, 3, 2};

inline std::optional<Attribute> attribute_from_name(std::string_view name) {
  for (int i = 0; i < kNumAttributes; ++i) {
    if (kAttributeNames[i] == name) return static_cast<Attribute>(i);
  }
  return std::nullopt;
}

struct PrivacyAttributeFrameLabel {
  int skin_color = 0;    // 0 unidentifiable, 1 white, 2 brown/yellow, 3 black, 4 coexisting
  int face = 0;          // 0 invisible, 1 partially visible, 2 completely visible
  int gender = 0;        // 0 unidentifiable, 1 male, 2 female, 3 coexisting
  int nudity = 0;        // 0 none, 1 partial, 2 semi
  int relationship = 0;  // 0 unidentifiable, 1 identifiable
  bool present = true;   // false: frame shows no person, attribute fields ignored

  int get(Attribute a) const {
    switch (a) {
      case Attribute::kSkinColor: return skin_color;
      case Attribute::kFace: return face;
      case Attribute::kGender: return gender;
      case Attribute::kNudity: return nudity;
      case Attribute::kRelationship: return relationship;
    }
    return 0;
  }
  void set(Attribute a, int v) {
    switch (a) {
      case Attribute::kSkinColor: skin_color = v; break;
      case Attribute::kFace: face = v; break;
      case Attribute::kGender: gender = v; break;
      case Attribute::kNudity: nudity = v; break;
      case Attribute::kRelationship: relationship = v; break;
    }
  }
  bool valid() const {
    if (!present) return true;
    for (int i = 0; i < kNumAttributes; ++i) {
      int v = get(static_cast<Attribute>(i));
      if (v < 0 || v >= kAttributeCardinality[i]) return false;
    }
    return true;
  }
  bool operator==(const PrivacyAttributeFrameLabel&) const = default;
};

using AttributeBits = std::array<std::uint8_t, kNumAttributes>;

/// Clip-level "can tell" bits: attribute i is 1 iff some frame with a person
/// carries a nonzero value for it. Frames without a person contribute nothing.
inline AttributeBits binarize_attributes(std::span<const PrivacyAttributeFrameLabel> frames) {
  require(!frames.empty(), "binarize_attributes needs at least one frame");
  AttributeBits bits{};
  for (const auto& f : frames) {
    if (!f.present) continue;
    for (int i = 0; i < kNumAttributes; ++i) {
      if (f.get(static_cast<Attribute>(i)) != 0) bits[i] = 1;
    }
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Clips, masks, datasets.

/// Binary per-frame region mask with logical shape [T, W, H]; storage (t, y, x).
class FrameMask {
 public:
  FrameMask() = default;
  FrameMask(int t, int w, int h)
      : t_(t), w_(w), h_(h), bits_(static_cast<std::size_t>(t) * w * h, 0) {
    require(t >= 1 && w >= 1 && h >= 1, "mask dimensions must be positive");
  }
  int frames() const { return t_; }
  int width() const { return w_; }
  int height() const { return h_; }
  bool at(int t, int x, int y) const { return bits_[idx(t, x, y)] != 0; }
  void set(int t, int x, int y, bool v) { bits_[idx(t, x, y)] = v ? 1 : 0; }
  bool empty() const { return bits_.empty(); }
  bool operator==(const FrameMask&) const = default;

 private:
  std::size_t idx(int t, int x, int y) const {
    return (static_cast<std::size_t>(t) * h_ + y) * w_ + x;
  }
  int t_ = 0, w_ = 0, h_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct RegionMasks {
  std::optional<FrameMask> face;
  std::optional<FrameMask> body;
  bool operator==(const RegionMasks&) const = default;
};

using BudgetLabel = std::variant<int, std::vector<PrivacyAttributeFrameLabel>>;

struct AnnotatedClip {
  ClipTensor clip;
  int target_label = 0;
  BudgetLabel budget_label = 0;
  bool operator==(const AnnotatedClip&) const = default;
};

enum class Split { kTrain, kVal, kEval, kUnsplit };
enum class BudgetMode { kSingleClass, kMultiAttribute };

struct Dataset {
  std::vector<AnnotatedClip> clips;
  Split split = Split::kUnsplit;
  int num_target_classes = 0;
  /// Class count for single-class budgets; kNumAttributes for attribute budgets.
  int num_budget_outputs = 0;
  BudgetMode budget_mode = BudgetMode::kSingleClass;
  /// Empty, or one entry per clip.
  std::vector<RegionMasks> masks;

  std::size_t size() const { return clips.size(); }
  bool empty() const { return clips.empty(); }
  bool operator==(const Dataset&) const = default;
};

/// Throws ArgumentError on any broken Dataset invariant.
inline void validate(const Dataset& d) {
  require(d.num_target_classes >= 1, "dataset needs at least one target class");
  require(d.num_budget_outputs >= 1, "dataset needs at least one budget output");
  require(d.masks.empty() || d.masks.size() == d.clips.size(), "mask list must align with clips");
  const ClipTensor* first = d.clips.empty() ? nullptr : &d.clips.front().clip;
  for (std::size_t i = 0; i < d.clips.size(); ++i) {
    const auto& c = d.clips[i];
    require(c.clip.same_shape(*first), "clip ", i, " shape differs from clip 0");
    require(c.target_label >= 0 && c.target_label < d.num_target_classes, "clip ", i,
            " target label ", c.target_label, " out of range");
    if (d.budget_mode == BudgetMode::kSingleClass) {
      const int* b = std::get_if<int>(&c.budget_label);
      require(b != nullptr, "clip ", i, " needs a single-class budget label");
      require(*b >= 0 && *b < d.num_budget_outputs, "clip ", i, " budget label out of range");
    } else {
      const auto* fl = std::get_if<std::vector<PrivacyAttributeFrameLabel>>(&c.budget_label);
      require(fl != nullptr, "clip ", i, " needs per-frame attribute labels");
      require(static_cast<int>(fl->size()) == c.clip.frames(), "clip ", i,
              " attribute label count differs from frame count");
      for (const auto& f : *fl) require(f.valid(), "clip ", i, " has an out-of-range attribute");
    }
    if (!d.masks.empty()) {
      for (const auto* m : {&d.masks[i].face, &d.masks[i].body}) {
        if (!m->has_value()) continue;
        require((*m)->frames() == c.clip.frames() && (*m)->width() == c.clip.width() &&
                    (*m)->height() == c.clip.height(),
                "clip ", i, " mask shape differs from the clip");
      }
    }
  }
}

/// Budget targets in training form: a class id, or the binarized attribute vector.
inline int budget_class(const AnnotatedClip& c) {
  const int* b = std::get_if<int>(&c.budget_label);
  require(b != nullptr, "clip carries attribute labels, not a budget class");
  return *b;
}

inline AttributeBits budget_bits(const AnnotatedClip& c) {
  const auto* fl = std::get_if<std::vector<PrivacyAttributeFrameLabel>>(&c.budget_label);
  require(fl != nullptr, "clip carries a budget class, not attribute labels");
  return binarize_attributes(*fl);
}

// ---------------------------------------------------------------------------
// Synthetic toy dataset.
//
// A colored square (budget: red/green/blue) translates in one of four
// directions (target: up/down/left/right) over a mid-gray background.
// All three colors have the same channel mean, so an equal-weight grayscale
// projection erases the budget label while keeping the motion.

inline constexpr int kToyTargetClasses = 4;
inline constexpr int kToyBudgetClasses = 3;
inline constexpr float kToyBackground = 0.5f;
inline constexpr float kToyNoise = 0.05f;
inline constexpr std::array<std::array<float, 3>, kToyBudgetClasses> kToyColors = {{
    {0.9f, 0.1f, 0.1f}, {0.1f, 0.9f, 0.1f}, {0.1f, 0.1f, 0.9f}}};

enum class Direction : int { kUp = 0, kDown, kLeft, kRight };

namespace detail {

inline double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

/// Fisher-Yates on the raw engine, independent of std::shuffle's implementation.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace detail

inline Dataset generate_toy_dataset(std::uint64_t seed, int n_clips, int t, int side) {
  require(n_clips >= 1, "n_clips must be >= 1");
  require(t >= 2, "toy clips need t >= 2");
  require(side >= 16, "toy clips need side >= 16");

  Rng rng(derive_seed(seed, Stream::kData));
  const int q = side / 4;
  const double span = side - q;
  const double speed = std::min(side / 16.0, span / (t - 1) * 0.75);
  const double travel = speed * (t - 1);

  Dataset d;
  d.num_target_classes = kToyTargetClasses;
  d.num_budget_outputs = kToyBudgetClasses;
  d.budget_mode = BudgetMode::kSingleClass;
  d.clips.reserve(n_clips);
  d.masks.reserve(n_clips);

  // i mod 4 and i mod 3 are independent over any 12 consecutive ids.
  std::vector<int> order(n_clips);
  for (int i = 0; i < n_clips; ++i) order[i] = i;
  detail::shuffle(order, rng);

  for (int id : order) {
    const int dir = id % kToyTargetClasses;
    const int color = id % kToyBudgetClasses;
    const bool vertical = dir == static_cast<int>(Direction::kUp) ||
                          dir == static_cast<int>(Direction::kDown);
    const double sign = (dir == static_cast<int>(Direction::kUp) ||
                         dir == static_cast<int>(Direction::kLeft)) ? -1.0 : 1.0;
    double along = uniform01(rng) * (span - travel);
    if (sign < 0) along += travel;
    const double across = uniform01(rng) * span;

    ClipTensor clip(t, side, side, 3);
    FrameMask body(t, side, side), face(t, side, side);
    for (int f = 0; f < t; ++f) {
      const double pos = along + sign * speed * f;
      const double px = vertical ? across : pos;
      const double py = vertical ? pos : across;
      for (int y = 0; y < side; ++y) {
        const double oy = detail::overlap(y, y + 1, py, py + q);
        for (int x = 0; x < side; ++x) {
          const double cov = oy * detail::overlap(x, x + 1, px, px + q);
          for (int c = 0; c < 3; ++c) {
            const double base = kToyBackground + cov * (kToyColors[color][c] - kToyBackground);
            const double noise = (2.0 * uniform01(rng) - 1.0) * kToyNoise;
            clip.at(f, x, y, c) = static_cast<float>(base + noise);
          }
          if (cov >= 0.5) {
            body.set(f, x, y, true);
            if (y + 0.5 < py + q / 4.0) face.set(f, x, y, true);
          }
        }
      }
    }
    d.clips.push_back({std::move(clip), dir, color});
    d.masks.push_back({std::move(face), std::move(body)});
  }
  return d;
}

struct Splits {
  Dataset train, val, eval;
};

/// Deterministic 70/15/15 split, stratified by single-class budget label
/// (or unstratified for attribute budgets).
inline Splits split_dataset(const Dataset& d, std::uint64_t seed) {
  require(!d.empty(), "cannot split an empty dataset");
  Rng rng(derive_seed(seed, Stream::kSplit));
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < d.size(); ++i) {
    int key = d.budget_mode == BudgetMode::kSingleClass ? budget_class(d.clips[i]) : 0;
    strata[key].push_back(i);
  }
  Splits s;
  for (Dataset* part : {&s.train, &s.val, &s.eval}) {
    part->num_target_classes = d.num_target_classes;
    part->num_budget_outputs = d.num_budget_outputs;
    part->budget_mode = d.budget_mode;
  }
  s.train.split = Split::kTrain;
  s.val.split = Split::kVal;
  s.eval.split = Split::kEval;
  auto take = [&](Dataset& part, std::size_t i) {
    part.clips.push_back(d.clips[i]);
    if (!d.masks.empty()) part.masks.push_back(d.masks[i]);
  };
  for (auto& [key, idx] : strata) {
    detail::shuffle(idx, rng);
    const auto n = idx.size();
    const auto n_train = static_cast<std::size_t>(std::lround(0.70 * n));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::lround(0.15 * n)));
    for (std::size_t k = 0; k < n; ++k) {
      take(k < n_train ? s.train : (k < n_train + n_val ? s.val : s.eval), idx[k]);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Cropping.

enum class CropMode { kCenter, kRandom };

inline ClipTensor crop_clip(const ClipTensor& clip, int out_w, int out_h, CropMode mode,
                            std::uint64_t seed = 0) {
  require(out_w >= 1 && out_h >= 1, "crop size must be positive");
  require(out_w <= clip.width() && out_h <= clip.height(), "crop ", out_w, "x", out_h,
          " larger than frame ", clip.width(), "x", clip.height());
  int x0 = (clip.width() - out_w) / 2;
  int y0 = (clip.height() - out_h) / 2;
  if (mode == CropMode::kRandom) {
    Rng rng(derive_seed(seed, Stream::kCrop));
    x0 = static_cast<int>(uniform_index(rng, clip.width() - out_w + 1));
    y0 = static_cast<int>(uniform_index(rng, clip.height() - out_h + 1));
  }
  ClipTensor out(clip.frames(), out_w, out_h, clip.channels());
  for (int c = 0; c < clip.channels(); ++c)
    for (int f = 0; f < clip.frames(); ++f)
      for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) out.at(f, x, y, c) = clip.at(f, x0 + x, y0 + y, c);
  return out;
}

/// Top-left offset (x, y) used by center crops.
inline std::pair<int, int> center_crop_offset(int w, int h, int out_w, int out_h) {
  return {(w - out_w) / 2, (h - out_h) / 2};
}

// ---------------------------------------------------------------------------
// Dataset statistics.

/// One labeled video as seen by the statistics functions.
template <typename Key>
struct LabeledFrames {
  Key action;
  std::span<const PrivacyAttributeFrameLabel> frames;
};

template <typename Key>
std::map<Key, std::size_t> action_distribution(std::span<const Key> actions) {
  require(!actions.empty(), "action_distribution needs a non-empty dataset");
  std::map<Key, std::size_t> hist;
  for (const auto& a : actions) ++hist[a];
  return hist;
}

inline std::map<int, std::size_t> action_distribution(const Dataset& d) {
  std::vector<int> labels;
  labels.reserve(d.size());
  for (const auto& c : d.clips) labels.push_back(c.target_label);
  return action_distribution<int>(labels);
}

/// One column of the correlation matrix: an (attribute, value) pair.
struct AttributeValue {
  Attribute attribute;
  int value;
};

inline std::vector<AttributeValue> attribute_value_columns() {
  std::vector<AttributeValue> cols;
  for (int a = 0; a < kNumAttributes; ++a)
    for (int v = 0; v < kAttributeCardinality[a]; ++v) cols.push_back({static_cast<Attribute>(a), v});
  return cols;
}

/// Row per action, column per (attribute, value): the fraction of the action's
/// person-bearing frames carrying that value. Actions with no such frames have
/// absent entries.
template <typename Key>
struct ActionAttributeCorrelation {
  std::vector<Key> actions;
  std::vector<AttributeValue> columns;
  std::vector<std::vector<std::optional<double>>> ratio;  // [action][column]

  std::optional<double> at(const Key& action, Attribute a, int value) const {
    for (std::size_t r = 0; r < actions.size(); ++r) {
      if (!(actions[r] == action)) continue;
      for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c].attribute == a && columns[c].value == value) return ratio[r][c];
    }
    return std::nullopt;
  }
};

template <typename Key>
ActionAttributeCorrelation<Key> action_attribute_correlation(
    std::span<const LabeledFrames<Key>> videos, std::span<const Key> all_actions = {}) {
  std::map<Key, std::vector<std::size_t>> counts;
  std::map<Key, std::size_t> frames;
  auto cols = attribute_value_columns();
  for (const auto& a : all_actions) {
    counts[a].assign(cols.size(), 0);
    frames[a] = 0;
  }
  for (const auto& v : videos) {
    auto& row = counts[v.action];
    if (row.empty()) row.assign(cols.size(), 0);
    auto& n = frames[v.action];
    for (const auto& f : v.frames) {
      if (!f.present) continue;
      ++n;
      std::size_t off = 0;
      for (int a = 0; a < kNumAttributes; ++a) {
        row[off + f.get(static_cast<Attribute>(a))] += 1;
        off += kAttributeCardinality[a];
      }
    }
  }
  ActionAttributeCorrelation<Key> out;
  out.columns = cols;
  for (const auto& [action, row] : counts) {
    out.actions.push_back(action);
    auto& r = out.ratio.emplace_back(cols.size());
    const auto n = frames[action];
    if (n == 0) continue;
    for (std::size_t c = 0; c < cols.size(); ++c)
      r[c] = static_cast<double>(row[c]) / static_cast<double>(n);
  }
  return out;
}

inline ActionAttributeCorrelation<int> action_attribute_correlation(const Dataset& d) {
  require(d.budget_mode == BudgetMode::kMultiAttribute,
          "action_attribute_correlation needs a multi-attribute dataset");
  std::vector<LabeledFrames<int>> videos;
  for (const auto& c : d.clips)
    videos.push_back({c.target_label, std::get<std::vector<PrivacyAttributeFrameLabel>>(c.budget_label)});
  std::vector<int> all(d.num_target_classes);
  for (int i = 0; i < d.num_target_classes; ++i) all[i] = i;
  return action_attribute_correlation<int>(std::span<const LabeledFrames<int>>(videos),
                                           std::span<const int>(all));
}

}  // namespace vidpriv

#endif  // VIDPRIV_DATA_HPP_
