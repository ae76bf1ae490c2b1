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

// Forward/backward kernels shared by all networks.
//
// Activations use a channel-major batch layout [C][N][D][H][W]. With that
// layout a convolution is one GEMM of the (O x K) kernel matrix against the
// im2col matrix of the whole batch, and its output is already the next
// layer's input. Frame-level 2D convolutions are 3D convolutions with a
// depth-1 kernel, so they never mix frames.

#ifndef VIDPRIV_NN_HPP_
#define VIDPRIV_NN_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "vidpriv/common.hpp"

namespace vidpriv::nn {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatrixMap = Eigen::Map<Matrix<S>>;
template <typename S>
using ConstMatrixMap = Eigen::Map<const Matrix<S>>;

struct Shape5 {
  int c = 0, n = 0, d = 0, h = 0, w = 0;
  std::size_t spatial() const { return static_cast<std::size_t>(d) * h * w; }
  std::size_t per_channel() const { return static_cast<std::size_t>(n) * spatial(); }
  std::size_t size() const { return static_cast<std::size_t>(c) * per_channel(); }
  bool operator==(const Shape5&) const = default;
};

template <typename S>
struct Act {
  Shape5 shape;
  std::vector<S> v;

  Act() = default;
  explicit Act(Shape5 s) : shape(s), v(s.size(), S(0)) {}

  S& at(int c, int n, int z, int y, int x) {
    return v[(((static_cast<std::size_t>(c) * shape.n + n) * shape.d + z) * shape.h + y) * shape.w + x];
  }
  const S& at(int c, int n, int z, int y, int x) const {
    return v[(((static_cast<std::size_t>(c) * shape.n + n) * shape.d + z) * shape.h + y) * shape.w + x];
  }
  MatrixMap<S> matrix() { return MatrixMap<S>(v.data(), shape.c, shape.per_channel()); }
  ConstMatrixMap<S> matrix() const { return ConstMatrixMap<S>(v.data(), shape.c, shape.per_channel()); }
};

struct Kernel3 {
  int d = 1, h = 3, w = 3;
  int volume() const { return d * h * w; }
};

/// Gathers samples `idx` (along n) of a [C][N][D][H][W] activation.
template <typename S>
Act<S> select_samples(const Act<S>& a, std::span<const std::size_t> idx) {
  Act<S> out(Shape5{a.shape.c, static_cast<int>(idx.size()), a.shape.d, a.shape.h, a.shape.w});
  const std::size_t block = a.shape.spatial();
  for (int c = 0; c < a.shape.c; ++c)
    for (std::size_t k = 0; k < idx.size(); ++k) {
      require(idx[k] < static_cast<std::size_t>(a.shape.n), "sample index out of range");
      std::copy_n(a.v.data() + (static_cast<std::size_t>(c) * a.shape.n + idx[k]) * block, block,
                  out.v.data() + (static_cast<std::size_t>(c) * idx.size() + k) * block);
    }
  return out;
}

namespace detail {

inline constexpr std::size_t kIm2colBudget = std::size_t{1} << 22;

inline int chunk_samples(std::size_t rows, const Shape5& s) {
  const std::size_t per = rows * s.spatial();
  return static_cast<int>(std::clamp<std::size_t>(kIm2colBudget / std::max<std::size_t>(per, 1), 1,
                                                  static_cast<std::size_t>(s.n)));
}

/// cols[(ci, kz, ky, kx)][(n - n0, z, y, x)] = in[ci][n][z + kz - pd][y + ky - ph][x + kx - pw]
template <typename S>
void im2col(const Act<S>& in, Kernel3 k, int n0, int cnt, Matrix<S>& cols) {
  const Shape5& s = in.shape;
  const int pd = k.d / 2, ph = k.h / 2, pw = k.w / 2;
  cols.resize(static_cast<Eigen::Index>(s.c) * k.volume(),
              static_cast<Eigen::Index>(cnt) * s.spatial());
  for (int ci = 0; ci < s.c; ++ci)
    for (int kz = 0; kz < k.d; ++kz)
      for (int ky = 0; ky < k.h; ++ky)
        for (int kx = 0; kx < k.w; ++kx) {
          const Eigen::Index row = ((ci * k.d + kz) * k.h + ky) * k.w + kx;
          S* out = cols.row(row).data();
          for (int n = 0; n < cnt; ++n)
            for (int z = 0; z < s.d; ++z) {
              const int iz = z + kz - pd;
              for (int y = 0; y < s.h; ++y, out += s.w) {
                const int iy = y + ky - ph;
                if (iz < 0 || iz >= s.d || iy < 0 || iy >= s.h) {
                  std::fill(out, out + s.w, S(0));
                  continue;
                }
                const S* src = &in.at(ci, n0 + n, iz, iy, 0);
                const int x_lo = std::max(0, pw - kx);
                const int x_hi = std::min(s.w, s.w + pw - kx);
                std::fill(out, out + x_lo, S(0));
                for (int x = x_lo; x < x_hi; ++x) out[x] = src[x + kx - pw];
                std::fill(out + std::max(x_lo, x_hi), out + s.w, S(0));
              }
            }
        }
}

template <typename S>
void col2im_add(const Matrix<S>& cols, Kernel3 k, int n0, int cnt, Act<S>& din) {
  const Shape5& s = din.shape;
  const int pd = k.d / 2, ph = k.h / 2, pw = k.w / 2;
  for (int ci = 0; ci < s.c; ++ci)
    for (int kz = 0; kz < k.d; ++kz)
      for (int ky = 0; ky < k.h; ++ky)
        for (int kx = 0; kx < k.w; ++kx) {
          const Eigen::Index row = ((ci * k.d + kz) * k.h + ky) * k.w + kx;
          const S* src = cols.row(row).data();
          for (int n = 0; n < cnt; ++n)
            for (int z = 0; z < s.d; ++z) {
              const int iz = z + kz - pd;
              for (int y = 0; y < s.h; ++y, src += s.w) {
                const int iy = y + ky - ph;
                if (iz < 0 || iz >= s.d || iy < 0 || iy >= s.h) continue;
                S* dst = &din.at(ci, n0 + n, iz, iy, 0);
                const int x_lo = std::max(0, pw - kx);
                const int x_hi = std::min(s.w, s.w + pw - kx);
                for (int x = x_lo; x < x_hi; ++x) dst[x + kx - pw] += src[x];
              }
            }
        }
}

}  // namespace detail

/// Stride-1 "same" convolution. weight is (O x C*kd*kh*kw) row-major, bias has O entries.
template <typename S>
Act<S> conv_forward(const Act<S>& in, const std::vector<S>& weight, const std::vector<S>& bias,
                    int out_channels, Kernel3 k) {
  const Shape5& s = in.shape;
  const Eigen::Index K = static_cast<Eigen::Index>(s.c) * k.volume();
  require(weight.size() == static_cast<std::size_t>(out_channels * K), "conv weight size mismatch");
  require(bias.size() == static_cast<std::size_t>(out_channels), "conv bias size mismatch");
  Act<S> out(Shape5{out_channels, s.n, s.d, s.h, s.w});
  ConstMatrixMap<S> wm(weight.data(), out_channels, K);
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bv(bias.data(), out_channels);
  auto om = out.matrix();
  const auto sp = static_cast<Eigen::Index>(s.spatial());
  const int step = detail::chunk_samples(static_cast<std::size_t>(K), s);
  Matrix<S> cols;
  for (int n0 = 0; n0 < s.n; n0 += step) {
    const int cnt = std::min(step, s.n - n0);
    detail::im2col(in, k, n0, cnt, cols);
    auto blk = om.middleCols(n0 * sp, cnt * sp);
    blk.noalias() = wm * cols;
    blk.colwise() += bv;
  }
  return out;
}

/// Accumulates weight/bias gradients; returns the input gradient when want_input.
template <typename S>
Act<S> conv_backward(const Act<S>& in, const std::vector<S>& weight, int out_channels, Kernel3 k,
                     const Act<S>& grad_out, std::vector<S>& grad_w, std::vector<S>& grad_b,
                     bool want_input) {
  const Shape5& s = in.shape;
  const Eigen::Index K = static_cast<Eigen::Index>(s.c) * k.volume();
  ConstMatrixMap<S> wm(weight.data(), out_channels, K);
  MatrixMap<S> gw(grad_w.data(), out_channels, K);
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> gb(grad_b.data(), out_channels);
  auto gm = grad_out.matrix();
  gb += gm.rowwise().sum();
  Act<S> din;
  if (want_input) din = Act<S>(s);
  const auto sp = static_cast<Eigen::Index>(s.spatial());
  const int step = detail::chunk_samples(static_cast<std::size_t>(K), s);
  Matrix<S> cols, dcols;
  for (int n0 = 0; n0 < s.n; n0 += step) {
    const int cnt = std::min(step, s.n - n0);
    detail::im2col(in, k, n0, cnt, cols);
    auto blk = gm.middleCols(n0 * sp, cnt * sp);
    gw.noalias() += blk * cols.transpose();
    if (want_input) {
      dcols.noalias() = wm.transpose() * blk;
      detail::col2im_add(dcols, k, n0, cnt, din);
    }
  }
  return din;
}

template <typename S>
void relu_inplace(Act<S>& a) {
  for (auto& x : a.v) x = x > S(0) ? x : S(0);
}

/// grad *= (activation > 0), where activation is the ReLU output.
template <typename S>
void relu_backward_inplace(const Act<S>& activation, Act<S>& grad) {
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    if (!(activation.v[i] > S(0))) grad.v[i] = S(0);
}

/// Average pooling with window == stride. Trailing remainders are dropped.
template <typename S>
Act<S> avg_pool_forward(const Act<S>& in, Kernel3 p) {
  const Shape5& s = in.shape;
  Shape5 o{s.c, s.n, s.d / p.d, s.h / p.h, s.w / p.w};
  require(o.d >= 1 && o.h >= 1 && o.w >= 1, "pooling window larger than input");
  Act<S> out(o);
  const S scale = S(1) / static_cast<S>(p.volume());
  for (int c = 0; c < o.c; ++c)
    for (int n = 0; n < o.n; ++n)
      for (int z = 0; z < o.d; ++z)
        for (int y = 0; y < o.h; ++y)
          for (int x = 0; x < o.w; ++x) {
            S acc = 0;
            for (int a = 0; a < p.d; ++a)
              for (int b = 0; b < p.h; ++b)
                for (int e = 0; e < p.w; ++e) acc += in.at(c, n, z * p.d + a, y * p.h + b, x * p.w + e);
            out.at(c, n, z, y, x) = acc * scale;
          }
  return out;
}

template <typename S>
Act<S> avg_pool_backward(const Shape5& in_shape, Kernel3 p, const Act<S>& grad_out) {
  Act<S> din(in_shape);
  const Shape5& o = grad_out.shape;
  const S scale = S(1) / static_cast<S>(p.volume());
  for (int c = 0; c < o.c; ++c)
    for (int n = 0; n < o.n; ++n)
      for (int z = 0; z < o.d; ++z)
        for (int y = 0; y < o.h; ++y)
          for (int x = 0; x < o.w; ++x) {
            const S g = grad_out.at(c, n, z, y, x) * scale;
            for (int a = 0; a < p.d; ++a)
              for (int b = 0; b < p.h; ++b)
                for (int e = 0; e < p.w; ++e) din.at(c, n, z * p.d + a, y * p.h + b, x * p.w + e) += g;
          }
  return din;
}

/// Pool window that halves every dimension that can be halved.
inline Kernel3 halving_window(const Shape5& s, bool pool_depth) {
  return Kernel3{pool_depth && s.d >= 2 ? 2 : 1, s.h >= 2 ? 2 : 1, s.w >= 2 ? 2 : 1};
}

/// Mean over the trailing `reduce` positions of each (c, n, ...) group.
/// With reduce = H*W this is per-frame pooling; with D*H*W it is per-sample.
template <typename S>
Matrix<S> mean_pool_forward(const Act<S>& in, std::size_t reduce) {
  const std::size_t groups = in.v.size() / reduce;
  Matrix<S> out(in.shape.c, static_cast<Eigen::Index>(groups / in.shape.c));
  const S scale = S(1) / static_cast<S>(reduce);
  for (std::size_t g = 0; g < groups; ++g) {
    S acc = 0;
    const S* p = in.v.data() + g * reduce;
    for (std::size_t i = 0; i < reduce; ++i) acc += p[i];
    out.data()[g] = acc * scale;
  }
  return out;
}

template <typename S>
Act<S> mean_pool_backward(const Shape5& in_shape, std::size_t reduce, const Matrix<S>& grad_out) {
  Act<S> din(in_shape);
  const S scale = S(1) / static_cast<S>(reduce);
  const std::size_t groups = din.v.size() / reduce;
  for (std::size_t g = 0; g < groups; ++g) {
    const S gv = grad_out.data()[g] * scale;
    std::fill(din.v.data() + g * reduce, din.v.data() + (g + 1) * reduce, gv);
  }
  return din;
}

/// out (O x M) = W (O x C) * in (C x M) + b
template <typename S>
Matrix<S> dense_forward(const Matrix<S>& in, const std::vector<S>& weight, const std::vector<S>& bias,
                        int out_features) {
  const auto c = in.rows();
  require(weight.size() == static_cast<std::size_t>(out_features * c), "dense weight size mismatch");
  ConstMatrixMap<S> wm(weight.data(), out_features, c);
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bv(bias.data(), out_features);
  Matrix<S> out = wm * in;
  out.colwise() += bv;
  return out;
}

template <typename S>
Matrix<S> dense_backward(const Matrix<S>& in, const std::vector<S>& weight, int out_features,
                         const Matrix<S>& grad_out, std::vector<S>& grad_w, std::vector<S>& grad_b) {
  const auto c = in.rows();
  ConstMatrixMap<S> wm(weight.data(), out_features, c);
  MatrixMap<S> gw(grad_w.data(), out_features, c);
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> gb(grad_b.data(), out_features);
  gw.noalias() += grad_out * in.transpose();
  gb += grad_out.rowwise().sum();
  return wm.transpose() * grad_out;
}

}  // namespace vidpriv::nn

#endif  // VIDPRIV_NN_HPP_
