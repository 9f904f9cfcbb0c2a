#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/raster.hpp"

// Dense building blocks of the segmentation network. Activations are
// channel-planar rasters (C x H x W); weights are row-major spans.

namespace wsseg::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Plain loop: Eigen's vectorised reductions change their summation order
// with the buffer's alignment, so results would differ between runs.
template <typename T>
T plane_sum(const Raster<T>& r, int c) {
  const std::size_t n = r.plane_size();
  const T* p = r.data().data() + static_cast<std::size_t>(c) * n;
  T s{0};
  for (std::size_t i = 0; i < n; ++i) s += p[i];
  return s;
}

/// Scratch memory reused across layers; one per thread.
template <typename T>
struct Workspace {
  std::vector<T> cols;
  std::vector<T> tmp;
};

// ---------------------------------------------------------------- 3x3 conv

/// Unfolds 3x3 zero-padded neighbourhoods into a (C*9) x (H*W) matrix.
template <typename T>
void im2col3x3(const Raster<T>& in, std::vector<T>& cols) {
  const int C = in.channels(), H = in.height(), W = in.width();
  const std::size_t hw = in.plane_size();
  cols.resize(static_cast<std::size_t>(C) * 9 * hw);
  for (int ci = 0; ci < C; ++ci) {
    const T* src = in.plane(ci).data();
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = cols.data() + ((static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw);
        const int dy = ky - 1, dx = kx - 1;
        const int x_lo = std::max(0, -dx), x_hi = std::min(W, W - dx);
        for (int y = 0; y < H; ++y) {
          T* row = dst + static_cast<std::size_t>(y) * W;
          const int sy = y + dy;
          if (sy < 0 || sy >= H) {
            std::fill_n(row, W, T{0});
            continue;
          }
          std::fill(row, row + x_lo, T{0});
          std::memcpy(row + x_lo, src + static_cast<std::size_t>(sy) * W + x_lo + dx,
                      sizeof(T) * std::max(0, x_hi - x_lo));
          std::fill(row + std::max(x_lo, x_hi), row + W, T{0});
        }
      }
  }
}

template <typename T>
void col2im3x3(std::span<const T> cols, Raster<T>& out) {
  const int C = out.channels(), H = out.height(), W = out.width();
  const std::size_t hw = out.plane_size();
  for (int ci = 0; ci < C; ++ci) {
    T* dst = out.plane(ci).data();
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = cols.data() + ((static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw);
        const int dy = ky - 1, dx = kx - 1;
        const int x_lo = std::max(0, -dx), x_hi = std::min(W, W - dx);
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          T* d = dst + static_cast<std::size_t>(sy) * W + dx;
          const T* s = src + static_cast<std::size_t>(y) * W;
          for (int x = x_lo; x < x_hi; ++x) d[x] += s[x];
        }
      }
  }
}

/// out = conv3x3(in) + bias, same padding. `weight` is Cout x (Cin*9).
template <typename T>
Raster<T> conv3x3_forward(const Raster<T>& in, std::span<const T> weight, std::span<const T> bias,
                          int out_channels, Workspace<T>& ws) {
  const int cin = in.channels();
  const auto hw = static_cast<Eigen::Index>(in.plane_size());
  im2col3x3(in, ws.cols);
  Raster<T> out(in.height(), in.width(), out_channels);
  ConstMatrixMap<T> w(weight.data(), out_channels, cin * 9);
  ConstMatrixMap<T> cols(ws.cols.data(), cin * 9, hw);
  MatrixMap<T> o(out.data().data(), out_channels, hw);
  o.noalias() = w * cols;
  for (int c = 0; c < out_channels; ++c) o.row(c).array() += bias[c];
  return out;
}

/// Accumulates weight/bias gradients; writes the input gradient if asked.
template <typename T>
void conv3x3_backward(const Raster<T>& in, std::span<const T> weight, const Raster<T>& dout,
                      std::span<T> dweight, std::span<T> dbias, Raster<T>* din,
                      Workspace<T>& ws) {
  const int cin = in.channels(), cout = dout.channels();
  const auto hw = static_cast<Eigen::Index>(in.plane_size());
  im2col3x3(in, ws.cols);
  ConstMatrixMap<T> cols(ws.cols.data(), cin * 9, hw);
  ConstMatrixMap<T> d(dout.data().data(), cout, hw);
  MatrixMap<T> dw(dweight.data(), cout, cin * 9);
  dw.noalias() += d * cols.transpose();
  for (int c = 0; c < cout; ++c) dbias[c] += plane_sum(dout, c);
  if (din) {
    ConstMatrixMap<T> w(weight.data(), cout, cin * 9);
    ws.tmp.resize(static_cast<std::size_t>(cin) * 9 * hw);
    MatrixMap<T> dcols(ws.tmp.data(), cin * 9, hw);
    dcols.noalias() = w.transpose() * d;
    *din = Raster<T>(in.height(), in.width(), cin, T{0});
    col2im3x3<T>(ws.tmp, *din);
  }
}

// ---------------------------------------------------------------- 1x1 conv

template <typename T>
Raster<T> conv1x1_forward(const Raster<T>& in, std::span<const T> weight, std::span<const T> bias,
                          int out_channels) {
  const auto hw = static_cast<Eigen::Index>(in.plane_size());
  Raster<T> out(in.height(), in.width(), out_channels);
  ConstMatrixMap<T> w(weight.data(), out_channels, in.channels());
  ConstMatrixMap<T> x(in.data().data(), in.channels(), hw);
  MatrixMap<T> o(out.data().data(), out_channels, hw);
  o.noalias() = w * x;
  for (int c = 0; c < out_channels; ++c) o.row(c).array() += bias[c];
  return out;
}

template <typename T>
Raster<T> conv1x1_backward(const Raster<T>& in, std::span<const T> weight, const Raster<T>& dout,
                           std::span<T> dweight, std::span<T> dbias) {
  const int cin = in.channels(), cout = dout.channels();
  const auto hw = static_cast<Eigen::Index>(in.plane_size());
  ConstMatrixMap<T> x(in.data().data(), cin, hw);
  ConstMatrixMap<T> d(dout.data().data(), cout, hw);
  MatrixMap<T> dw(dweight.data(), cout, cin);
  dw.noalias() += d * x.transpose();
  for (int c = 0; c < cout; ++c) dbias[c] += plane_sum(dout, c);
  ConstMatrixMap<T> w(weight.data(), cout, cin);
  Raster<T> din(in.height(), in.width(), cin);
  MatrixMap<T> dx(din.data().data(), cin, hw);
  dx.noalias() = w.transpose() * d;
  return din;
}

// ------------------------------------------------------------------- ReLU

template <typename T>
void relu_inplace(Raster<T>& x) {
  for (auto& v : x.data()) v = v > T{0} ? v : T{0};
}

/// Gradient through ReLU given the activation output.
template <typename T>
void relu_backward_inplace(const Raster<T>& out, Raster<T>& grad) {
  const auto& o = out.data();
  auto& g = grad.data();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(o[i] > T{0})) g[i] = T{0};
}

// ------------------------------------------------------------- 2x2 maxpool

template <typename T>
Raster<T> maxpool2_forward(const Raster<T>& in, std::vector<std::uint8_t>& argmax) {
  const int C = in.channels(), H = in.height() / 2, W = in.width() / 2;
  Raster<T> out(H, W, C);
  argmax.assign(out.size(), 0);
  std::size_t k = 0;
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x, ++k) {
        T best = in(2 * y, 2 * x, c);
        std::uint8_t arg = 0;
        for (std::uint8_t j = 1; j < 4; ++j) {
          const T v = in(2 * y + j / 2, 2 * x + j % 2, c);
          if (v > best) {
            best = v;
            arg = j;
          }
        }
        out.data()[k] = best;
        argmax[k] = arg;
      }
  return out;
}

template <typename T>
Raster<T> maxpool2_backward(const Raster<T>& dout, const std::vector<std::uint8_t>& argmax,
                            int in_height, int in_width) {
  Raster<T> din(in_height, in_width, dout.channels(), T{0});
  std::size_t k = 0;
  for (int c = 0; c < dout.channels(); ++c)
    for (int y = 0; y < dout.height(); ++y)
      for (int x = 0; x < dout.width(); ++x, ++k)
        din(2 * y + argmax[k] / 2, 2 * x + argmax[k] % 2, c) += dout.data()[k];
  return din;
}

// ------------------------------------------------------ bilinear upsample

namespace detail {
struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> w_hi;
};
/// Half-pixel-centre sampling taps for a 2x enlargement of `n` samples.
inline Taps upsample_taps(int n) {
  Taps t;
  for (int o = 0; o < 2 * n; ++o) {
    const double src = std::max(0.0, (o + 0.5) / 2.0 - 0.5);
    const int lo = std::min(static_cast<int>(src), n - 1);
    const int hi = std::min(lo + 1, n - 1);
    t.lo.push_back(lo);
    t.hi.push_back(hi);
    t.w_hi.push_back(src - lo);
  }
  return t;
}
}  // namespace detail

template <typename T>
Raster<T> upsample2_forward(const Raster<T>& in) {
  const int C = in.channels(), H = in.height(), W = in.width();
  const auto ty = detail::upsample_taps(H), tx = detail::upsample_taps(W);
  Raster<T> out(2 * H, 2 * W, C);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < 2 * H; ++y) {
      const T wy = static_cast<T>(ty.w_hi[y]);
      for (int x = 0; x < 2 * W; ++x) {
        const T wx = static_cast<T>(tx.w_hi[x]);
        const T top = in(ty.lo[y], tx.lo[x], c) * (1 - wx) + in(ty.lo[y], tx.hi[x], c) * wx;
        const T bot = in(ty.hi[y], tx.lo[x], c) * (1 - wx) + in(ty.hi[y], tx.hi[x], c) * wx;
        out(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  return out;
}

template <typename T>
Raster<T> upsample2_backward(const Raster<T>& dout) {
  const int C = dout.channels(), H = dout.height() / 2, W = dout.width() / 2;
  const auto ty = detail::upsample_taps(H), tx = detail::upsample_taps(W);
  Raster<T> din(H, W, C, T{0});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < 2 * H; ++y) {
      const T wy = static_cast<T>(ty.w_hi[y]);
      for (int x = 0; x < 2 * W; ++x) {
        const T wx = static_cast<T>(tx.w_hi[x]);
        const T g = dout(y, x, c);
        din(ty.lo[y], tx.lo[x], c) += g * (1 - wy) * (1 - wx);
        din(ty.lo[y], tx.hi[x], c) += g * (1 - wy) * wx;
        din(ty.hi[y], tx.lo[x], c) += g * wy * (1 - wx);
        din(ty.hi[y], tx.hi[x], c) += g * wy * wx;
      }
    }
  return din;
}

// ------------------------------------------- 2x2 stride-2 transposed conv

/// `weight` is laid out [Cout][2][2][Cin], i.e. a (Cout*4) x Cin matrix.
template <typename T>
Raster<T> upconv2_forward(const Raster<T>& in, std::span<const T> weight, std::span<const T> bias,
                          int out_channels, Workspace<T>& ws) {
  const int cin = in.channels(), H = in.height(), W = in.width();
  const auto hw = static_cast<Eigen::Index>(in.plane_size());
  ws.tmp.resize(static_cast<std::size_t>(out_channels) * 4 * hw);
  ConstMatrixMap<T> w(weight.data(), out_channels * 4, cin);
  ConstMatrixMap<T> x(in.data().data(), cin, hw);
  MatrixMap<T> t(ws.tmp.data(), out_channels * 4, hw);
  t.noalias() = w * x;
  Raster<T> out(2 * H, 2 * W, out_channels);
  for (int o = 0; o < out_channels; ++o)
    for (int k = 0; k < 4; ++k) {
      const T* row = ws.tmp.data() + (static_cast<std::size_t>(o) * 4 + k) * hw;
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx)
          out(2 * y + k / 2, 2 * xx + k % 2, o) = row[y * W + xx] + bias[o];
    }
  return out;
}

template <typename T>
Raster<T> upconv2_backward(const Raster<T>& in, std::span<const T> weight, const Raster<T>& dout,
                           std::span<T> dweight, std::span<T> dbias, Workspace<T>& ws) {
  const int cin = in.channels(), cout = dout.channels(), H = in.height(), W = in.width();
  const auto hw = static_cast<Eigen::Index>(in.plane_size());
  ws.tmp.resize(static_cast<std::size_t>(cout) * 4 * hw);
  for (int o = 0; o < cout; ++o) {
    T sum = 0;
    for (int k = 0; k < 4; ++k) {
      T* row = ws.tmp.data() + (static_cast<std::size_t>(o) * 4 + k) * hw;
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          const T g = dout(2 * y + k / 2, 2 * xx + k % 2, o);
          row[y * W + xx] = g;
          sum += g;
        }
    }
    dbias[o] += sum;
  }
  ConstMatrixMap<T> t(ws.tmp.data(), cout * 4, hw);
  ConstMatrixMap<T> x(in.data().data(), cin, hw);
  MatrixMap<T> dw(dweight.data(), cout * 4, cin);
  dw.noalias() += t * x.transpose();
  ConstMatrixMap<T> w(weight.data(), cout * 4, cin);
  Raster<T> din(H, W, cin);
  MatrixMap<T> dx(din.data().data(), cin, hw);
  dx.noalias() = w.transpose() * t;
  return din;
}

// ------------------------------------------------------- channel plumbing

template <typename T>
Raster<T> concat_channels(const Raster<T>& a, const Raster<T>& b) {
  if (!a.same_extent(b)) throw ShapeError("concat operands differ in extent");
  Raster<T> out(a.height(), a.width(), a.channels() + b.channels());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.size());
  return out;
}

template <typename T>
void split_channels(const Raster<T>& in, int first, Raster<T>& a, Raster<T>& b) {
  a = Raster<T>(in.height(), in.width(), first);
  b = Raster<T>(in.height(), in.width(), in.channels() - first);
  std::copy(in.data().begin(), in.data().begin() + a.size(), a.data().begin());
  std::copy(in.data().begin() + a.size(), in.data().end(), b.data().begin());
}

/// Two-class softmax across the channel axis.
template <typename T>
Raster<T> softmax2_forward(const Raster<T>& logits) {
  Raster<T> p(logits.height(), logits.width(), 2);
  const std::size_t n = logits.plane_size();
  const T* l0 = logits.plane(0).data();
  const T* l1 = logits.plane(1).data();
  T* p0 = p.plane(0).data();
  T* p1 = p.plane(1).data();
  for (std::size_t i = 0; i < n; ++i) {
    const T m = std::max(l0[i], l1[i]);
    const T e0 = std::exp(l0[i] - m), e1 = std::exp(l1[i] - m);
    const T s = e0 + e1;
    p0[i] = e0 / s;
    p1[i] = e1 / s;
  }
  return p;
}

template <typename T>
Raster<T> softmax2_backward(const Raster<T>& probs, const Raster<T>& dprobs) {
  Raster<T> dl(probs.height(), probs.width(), 2);
  const std::size_t n = probs.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    const T p0 = probs.data()[i], p1 = probs.data()[n + i];
    const T g0 = dprobs.data()[i], g1 = dprobs.data()[n + i];
    const T pg0 = p0 * g0, pg1 = p1 * g1;
    const T dot = pg0 + pg1;
    dl.data()[i] = pg0 - p0 * dot;
    dl.data()[n + i] = pg1 - p1 * dot;
  }
  return dl;
}

/// Mirror index without edge repetition (…2 1 0 1 2…), period 2(n-1).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

template <typename T>
Raster<T> reflect_pad(const Raster<T>& in, int height, int width) {
  Raster<T> out(height, width, in.channels());
  for (int c = 0; c < in.channels(); ++c)
    for (int y = 0; y < height; ++y) {
      const int sy = reflect_index(y, in.height());
      for (int x = 0; x < width; ++x) out(y, x, c) = in(sy, reflect_index(x, in.width()), c);
    }
  return out;
}

template <typename T>
Raster<T> crop_top_left(const Raster<T>& in, int height, int width) {
  Raster<T> out(height, width, in.channels());
  for (int c = 0; c < in.channels(); ++c)
    for (int y = 0; y < height; ++y)
      std::copy_n(&in(y, 0, c), width, &out(y, 0, c));
  return out;
}

}  // namespace wsseg::nn
