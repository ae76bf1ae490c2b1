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

// Fixed anonymization baselines: spatial downsampling and mask-based
// obfuscation (box or segmentation, blur or blacken, face or body).

#ifndef VIDPRIV_BASELINES_HPP_
#define VIDPRIV_BASELINES_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vidpriv/common.hpp"
#include "vidpriv/data.hpp"

namespace vidpriv {

inline constexpr std::array<int, 5> kDownsampleRates = {1, 2, 4, 8, 16};

/// Average-pools every frame by r x r blocks, then upsamples back to the input
/// size by nearest neighbour. A remainder that does not fill a block is dropped
/// from the pooled grid and filled from the nearest cell.
inline ClipTensor downsample(const ClipTensor& clip, int r) {
  require(std::find(kDownsampleRates.begin(), kDownsampleRates.end(), r) != kDownsampleRates.end(),
          "downsample rate ", r, " not in {1,2,4,8,16}");
  if (r == 1) return clip;
  const int W = clip.width(), H = clip.height();
  require(W >= r && H >= r, "downsample rate ", r, " exceeds frame size ", W, "x", H);
  const int pw = W / r, ph = H / r;
  ClipTensor out = clip;
  std::vector<double> cell(static_cast<std::size_t>(pw) * ph);
  const double inv = 1.0 / (static_cast<double>(r) * r);
  for (int c = 0; c < clip.channels(); ++c)
    for (int t = 0; t < clip.frames(); ++t) {
      std::fill(cell.begin(), cell.end(), 0.0);
      for (int y = 0; y < ph * r; ++y)
        for (int x = 0; x < pw * r; ++x) cell[(y / r) * pw + x / r] += clip.at(t, x, y, c);
      for (int y = 0; y < H; ++y) {
        const int cy = static_cast<int>(static_cast<long>(y) * ph / H);
        for (int x = 0; x < W; ++x) {
          const int cx = static_cast<int>(static_cast<long>(x) * pw / W);
          out.at(t, x, y, c) = static_cast<float>(cell[cy * pw + cx] * inv);
        }
      }
    }
  return out;
}

enum class ObfuscationRegion { kFace, kBody };
enum class ObfuscationShape { kBox, kSegmentation };
enum class ObfuscationMode { kBlur, kBlacken };

struct ObfuscationSpec {
  ObfuscationRegion region = ObfuscationRegion::kFace;
  ObfuscationShape shape = ObfuscationShape::kBox;
  ObfuscationMode mode = ObfuscationMode::kBlacken;

  bool operator==(const ObfuscationSpec&) const = default;

  /// Three-letter code: X|S (box, segmentation), K|B (blacken, blur), F|D (face, body).
  std::string code() const {
    std::string s;
    s += shape == ObfuscationShape::kBox ? 'X' : 'S';
    s += mode == ObfuscationMode::kBlacken ? 'K' : 'B';
    s += region == ObfuscationRegion::kFace ? 'F' : 'D';
    return s;
  }

  static ObfuscationSpec parse(std::string_view code) {
    require(code.size() == 3, "obfuscation code must have 3 letters, got '", code, "'");
    ObfuscationSpec s;
    switch (code[0]) {
      case 'X': s.shape = ObfuscationShape::kBox; break;
      case 'S': s.shape = ObfuscationShape::kSegmentation; break;
      default: throw ArgumentError(detail::concat("bad shape letter in obfuscation code '", code, "'"));
    }
    switch (code[1]) {
      case 'K': s.mode = ObfuscationMode::kBlacken; break;
      case 'B': s.mode = ObfuscationMode::kBlur; break;
      default: throw ArgumentError(detail::concat("bad mode letter in obfuscation code '", code, "'"));
    }
    switch (code[2]) {
      case 'F': s.region = ObfuscationRegion::kFace; break;
      case 'D': s.region = ObfuscationRegion::kBody; break;
      default: throw ArgumentError(detail::concat("bad region letter in obfuscation code '", code, "'"));
    }
    return s;
  }
};

inline std::vector<ObfuscationSpec> all_obfuscations() {
  std::vector<ObfuscationSpec> out;
  for (const char* c : {"XKF", "XKD", "SKF", "SKD", "XBF", "XBD", "SBF", "SBD"})
    out.push_back(ObfuscationSpec::parse(c));
  return out;
}

struct BlurParams {
  double min_sigma = 3.0;
  double diameter_divisor = 8.0;  // sigma = max(min_sigma, diameter / divisor)
};

namespace detail {

struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive
  bool empty() const { return x1 < x0; }
  int diameter() const { return std::max(x1 - x0 + 1, y1 - y0 + 1); }
};

inline Box mask_box(const FrameMask& m, int t) {
  Box b{m.width(), m.height(), -1, -1};
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(t, x, y)) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  if (b.x1 < 0) return Box{};
  return b;
}

/// Separable Gaussian blur of one channel plane, truncated at 3 sigma, edges clamped.
inline std::vector<double> gaussian_blur(const std::vector<double>& plane, int w, int h, double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  std::vector<double> tmp(plane.size()), out(plane.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * plane[y * w + std::clamp(x + i, 0, w - 1)];
      tmp[y * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
      out[y * w + x] = acc;
    }
  return out;
}

}  // namespace detail

/// Blackens or blurs the chosen region of every frame; pixels outside it are
/// copied unchanged. Box mode uses the tight per-frame bounding box of the mask.
inline ClipTensor obfuscate(const ClipTensor& clip, const RegionMasks& masks, const ObfuscationSpec& spec,
                            const BlurParams& blur = {}) {
  const auto& maybe = spec.region == ObfuscationRegion::kFace ? masks.face : masks.body;
  require(maybe.has_value(), "obfuscation ", spec.code(), " needs a ",
          spec.region == ObfuscationRegion::kFace ? "face" : "body", " mask");
  const FrameMask& m = *maybe;
  require(m.frames() == clip.frames() && m.width() == clip.width() && m.height() == clip.height(),
          "mask shape does not match clip");
  ClipTensor out = clip;
  const int W = clip.width(), H = clip.height();
  std::vector<std::uint8_t> region(static_cast<std::size_t>(W) * H);
  std::vector<double> plane(region.size());
  for (int t = 0; t < clip.frames(); ++t) {
    const detail::Box box = detail::mask_box(m, t);
    if (box.empty()) continue;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        region[y * W + x] = spec.shape == ObfuscationShape::kBox
                                ? (x >= box.x0 && x <= box.x1 && y >= box.y0 && y <= box.y1)
                                : m.at(t, x, y);
    const double sigma = std::max(blur.min_sigma, box.diameter() / blur.diameter_divisor);
    for (int c = 0; c < clip.channels(); ++c) {
      if (spec.mode == ObfuscationMode::kBlacken) {
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x)
            if (region[y * W + x]) out.at(t, x, y, c) = 0.0f;
        continue;
      }
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) plane[y * W + x] = clip.at(t, x, y, c);
      const auto blurred = detail::gaussian_blur(plane, W, H, sigma);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          if (region[y * W + x]) out.at(t, x, y, c) = static_cast<float>(std::clamp(blurred[y * W + x], 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace vidpriv

#endif  // VIDPRIV_BASELINES_HPP_
