// Copyright 2026 The ctxhourglass Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ctxh/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "ctxh/parallel.hpp"

namespace ctxh::kernels {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

using Index = Eigen::Index;

Index idx(std::size_t v) { return static_cast<Index>(v); }

void check_bias(const Shape& bias, std::size_t out_channels, const char* op) {
  if (bias != Shape{1, out_channels, 1, 1}) {
    throw ShapeError(std::string(op) + ": bias shape " + to_string(bias) + " does not match " +
                     std::to_string(out_channels) + " output channels");
  }
}

// Rows are (c, u, v) kernel taps, columns are output pixels (i, j).
template <typename T>
void im2col_same(const T* x, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, T* cols) {
  const auto pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        T* row = cols + ((c * k + u) * k + v) * h * w;
        const std::ptrdiff_t dv = static_cast<std::ptrdiff_t>(v) - pad;
        const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, -dv);
        const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(W, W - dv);
        for (std::ptrdiff_t i = 0; i < H; ++i) {
          T* dst = row + i * W;
          const std::ptrdiff_t si = i + static_cast<std::ptrdiff_t>(u) - pad;
          if (si < 0 || si >= H || j_lo >= j_hi) {
            std::fill(dst, dst + W, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::ptrdiff_t>(c) * H + si) * W;
          std::fill(dst, dst + j_lo, T(0));
          std::copy(src + j_lo + dv, src + j_hi + dv, dst + j_lo);
          std::fill(dst + j_hi, dst + W, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_same_add(const T* cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, T* x) {
  const auto pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        const T* row = cols + ((c * k + u) * k + v) * h * w;
        const std::ptrdiff_t dv = static_cast<std::ptrdiff_t>(v) - pad;
        const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, -dv);
        const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(W, W - dv);
        for (std::ptrdiff_t i = 0; i < H; ++i) {
          const std::ptrdiff_t si = i + static_cast<std::ptrdiff_t>(u) - pad;
          if (si < 0 || si >= H) continue;
          const T* src = row + i * W;
          T* dst = x + (static_cast<std::ptrdiff_t>(c) * H + si) * W;
          for (std::ptrdiff_t j = j_lo; j < j_hi; ++j) dst[j + dv] += src[j];
        }
      }
    }
  }
}

template <typename T>
void add_bias(T* out, const Tensor<T>& bias, std::size_t out_channels, std::size_t plane) {
  for (std::size_t o = 0; o < out_channels; ++o) {
    const T b = bias[o];
    T* p = out + o * plane;
    for (std::size_t q = 0; q < plane; ++q) p[q] += b;
  }
}

template <typename T>
void bias_grad(const Tensor<T>& grad_out, Tensor<T>& grad_bias) {
  const Shape& s = grad_out.shape();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < s.c; ++o) {
      T acc = 0;
      for (T g : grad_out.plane(n, o)) acc += g;
      grad_bias[o] += acc;
    }
  }
}

// Sums per-sample partials in batch order so the result is independent of threading.
template <typename T>
void reduce_partials(const std::vector<RowMat<T>>& partials, RowMat<T>& total) {
  for (const auto& p : partials) total += p;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_same_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.h != ws.w) throw ShapeError("conv2d_same: kernel must be square, got " + to_string(ws));
  if (ws.h % 2 == 0) throw ShapeError("conv2d_same: kernel size must be odd, got " + std::to_string(ws.h));
  if (xs.c != ws.c) {
    throw ShapeError("conv2d_same: input has " + std::to_string(xs.c) + " channels, filter expects " +
                     std::to_string(ws.c));
  }
  check_bias(bias.shape(), ws.n, "conv2d_same");

  const std::size_t k = ws.h;
  const std::size_t plane = xs.spatial();
  const std::size_t taps = xs.c * k * k;
  Tensor<T> out({xs.n, ws.n, xs.h, xs.w});
  ConstMatMap<T> wm(weight.raw(), idx(ws.n), idx(taps));

  parallel_for(xs.n, [&](std::size_t n) {
    const T* xn = x.raw() + x.offset(n, 0, 0, 0);
    std::vector<T> cols;
    const T* colp = xn;
    if (k != 1) {
      cols.resize(taps * plane);
      im2col_same(xn, xs.c, xs.h, xs.w, k, cols.data());
      colp = cols.data();
    }
    MatMap<T> on(out.raw() + out.offset(n, 0, 0, 0), idx(ws.n), idx(plane));
    on.noalias() = wm * ConstMatMap<T>(colp, idx(taps), idx(plane));
    add_bias(on.data(), bias, ws.n, plane);
  });
  return out;
}

template <typename T>
void conv2d_same_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                          Tensor<T>* grad_x, Tensor<T>* grad_weight, Tensor<T>* grad_bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const std::size_t k = ws.h;
  const std::size_t plane = xs.spatial();
  const std::size_t taps = xs.c * k * k;
  require_same_shape(grad_out.shape(), Shape{xs.n, ws.n, xs.h, xs.w}, "conv2d_same_backward");
  if (grad_x) require_same_shape(grad_x->shape(), xs, "conv2d_same_backward");
  if (grad_weight) require_same_shape(grad_weight->shape(), ws, "conv2d_same_backward");

  ConstMatMap<T> wm(weight.raw(), idx(ws.n), idx(taps));
  std::vector<RowMat<T>> partials(grad_weight ? xs.n : 0);

  parallel_for(xs.n, [&](std::size_t n) {
    ConstMatMap<T> gn(grad_out.raw() + grad_out.offset(n, 0, 0, 0), idx(ws.n), idx(plane));
    if (grad_weight) {
      const T* xn = x.raw() + x.offset(n, 0, 0, 0);
      std::vector<T> cols;
      const T* colp = xn;
      if (k != 1) {
        cols.resize(taps * plane);
        im2col_same(xn, xs.c, xs.h, xs.w, k, cols.data());
        colp = cols.data();
      }
      partials[n].noalias() = gn * ConstMatMap<T>(colp, idx(taps), idx(plane)).transpose();
    }
    if (grad_x) {
      T* gxn = grad_x->raw() + grad_x->offset(n, 0, 0, 0);
      if (k == 1) {
        MatMap<T>(gxn, idx(xs.c), idx(plane)).noalias() += wm.transpose() * gn;
      } else {
        RowMat<T> gcols = wm.transpose() * gn;
        col2im_same_add(gcols.data(), xs.c, xs.h, xs.w, k, gxn);
      }
    }
  });

  if (grad_weight) {
    RowMat<T> total = RowMat<T>::Zero(idx(ws.n), idx(taps));
    reduce_partials(partials, total);
    MatMap<T>(grad_weight->raw(), idx(ws.n), idx(taps)) += total;
  }
  if (grad_bias) bias_grad(grad_out, *grad_bias);
}

template <typename T>
Tensor<T> transposed_conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                                    std::size_t stride) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (stride == 0) throw ShapeError("transposed_conv2d: stride must be positive");
  if (ws.h != ws.w) throw ShapeError("transposed_conv2d: kernel must be square, got " + to_string(ws));
  if (xs.c != ws.c) {
    throw ShapeError("transposed_conv2d: input has " + std::to_string(xs.c) + " channels, filter expects " +
                     std::to_string(ws.c));
  }
  check_bias(bias.shape(), ws.n, "transposed_conv2d");

  const std::size_t k = ws.h;
  const std::size_t oh = (xs.h - 1) * stride + k;
  const std::size_t ow = (xs.w - 1) * stride + k;
  const std::size_t in_plane = xs.spatial();
  const std::size_t rows = ws.n * k * k;

  // Rearranged weight: row (o, u, v), column c.
  RowMat<T> wr(idx(rows), idx(ws.c));
  for (std::size_t o = 0; o < ws.n; ++o)
    for (std::size_t c = 0; c < ws.c; ++c)
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v) wr(idx((o * k + u) * k + v), idx(c)) = weight(o, c, u, v);

  Tensor<T> out({xs.n, ws.n, oh, ow});
  parallel_for(xs.n, [&](std::size_t n) {
    ConstMatMap<T> xn(x.raw() + x.offset(n, 0, 0, 0), idx(xs.c), idx(in_plane));
    RowMat<T> cols = wr * xn;
    for (std::size_t o = 0; o < ws.n; ++o) {
      for (std::size_t u = 0; u < k; ++u) {
        for (std::size_t v = 0; v < k; ++v) {
          const T* src = cols.data() + ((o * k + u) * k + v) * in_plane;
          for (std::size_t i = 0; i < xs.h; ++i) {
            T* dst = out.raw() + out.offset(n, o, i * stride + u, v);
            for (std::size_t j = 0; j < xs.w; ++j) dst[j * stride] += src[i * xs.w + j];
          }
        }
      }
    }
    add_bias(out.raw() + out.offset(n, 0, 0, 0), bias, ws.n, oh * ow);
  });
  return out;
}

template <typename T>
void transposed_conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                                std::size_t stride, Tensor<T>* grad_x, Tensor<T>* grad_weight,
                                Tensor<T>* grad_bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const std::size_t k = ws.h;
  const std::size_t oh = (xs.h - 1) * stride + k;
  const std::size_t ow = (xs.w - 1) * stride + k;
  const std::size_t in_plane = xs.spatial();
  const std::size_t rows = ws.n * k * k;
  require_same_shape(grad_out.shape(), Shape{xs.n, ws.n, oh, ow}, "transposed_conv2d_backward");

  RowMat<T> wr(idx(rows), idx(ws.c));
  for (std::size_t o = 0; o < ws.n; ++o)
    for (std::size_t c = 0; c < ws.c; ++c)
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v) wr(idx((o * k + u) * k + v), idx(c)) = weight(o, c, u, v);

  std::vector<RowMat<T>> partials(grad_weight ? xs.n : 0);
  parallel_for(xs.n, [&](std::size_t n) {
    RowMat<T> gcols(idx(rows), idx(in_plane));
    for (std::size_t o = 0; o < ws.n; ++o) {
      for (std::size_t u = 0; u < k; ++u) {
        for (std::size_t v = 0; v < k; ++v) {
          T* dst = gcols.data() + ((o * k + u) * k + v) * in_plane;
          for (std::size_t i = 0; i < xs.h; ++i) {
            const T* src = grad_out.raw() + grad_out.offset(n, o, i * stride + u, v);
            for (std::size_t j = 0; j < xs.w; ++j) dst[i * xs.w + j] = src[j * stride];
          }
        }
      }
    }
    ConstMatMap<T> xn(x.raw() + x.offset(n, 0, 0, 0), idx(xs.c), idx(in_plane));
    if (grad_weight) partials[n].noalias() = gcols * xn.transpose();
    if (grad_x) {
      MatMap<T>(grad_x->raw() + grad_x->offset(n, 0, 0, 0), idx(xs.c), idx(in_plane)).noalias() +=
          wr.transpose() * gcols;
    }
  });

  if (grad_weight) {
    RowMat<T> total = RowMat<T>::Zero(idx(rows), idx(ws.c));
    reduce_partials(partials, total);
    for (std::size_t o = 0; o < ws.n; ++o)
      for (std::size_t c = 0; c < ws.c; ++c)
        for (std::size_t u = 0; u < k; ++u)
          for (std::size_t v = 0; v < k; ++v) (*grad_weight)(o, c, u, v) += total(idx((o * k + u) * k + v), idx(c));
  }
  if (grad_bias) bias_grad(grad_out, *grad_bias);
}

template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& x, std::vector<std::size_t>* argmax) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("maxpool2: spatial size must be even, got " + to_string(s));
  }
  Tensor<T> out({s.n, s.c, s.h / 2, s.w / 2});
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t q = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t i = 0; i < s.h / 2; ++i) {
        for (std::size_t j = 0; j < s.w / 2; ++j, ++q) {
          std::size_t best = x.offset(n, c, 2 * i, 2 * j);
          const std::size_t cand[3] = {best + 1, x.offset(n, c, 2 * i + 1, 2 * j),
                                       x.offset(n, c, 2 * i + 1, 2 * j + 1)};
          for (std::size_t p : cand) {
            if (x[p] > x[best]) best = p;
          }
          out[q] = x[best];
          if (argmax) (*argmax)[q] = best;
        }
      }
    }
  }
  return out;
}

template <typename T>
void maxpool2_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax, Tensor<T>& grad_x) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool2_backward: argmax size mismatch");
  for (std::size_t q = 0; q < argmax.size(); ++q) grad_x[argmax[q]] += grad_out[q];
}

GridIndex context_index_map(std::size_t i, std::size_t j, std::size_t h1, std::size_t w1, std::size_t h2,
                            std::size_t w2) {
  if (h1 == 0 || w1 == 0 || h1 > h2 || w1 > w2) {
    throw ContractError("context_index_map: need 1 <= small <= large, got small (" + std::to_string(h1) + "," +
                        std::to_string(w1) + ") large (" + std::to_string(h2) + "," + std::to_string(w2) + ")");
  }
  if (i >= h2 || j >= w2) {
    throw ContractError("context_index_map: position (" + std::to_string(i) + "," + std::to_string(j) +
                        ") outside the " + std::to_string(h2) + "x" + std::to_string(w2) + " grid");
  }
  return {i * h1 / h2, j * w1 / w2};
}

std::vector<std::size_t> context_axis_map(std::size_t small, std::size_t large) {
  if (small == 0 || small > large) throw ContractError("context_axis_map: need 1 <= small <= large");
  std::vector<std::size_t> m(large);
  for (std::size_t i = 0; i < large; ++i) m[i] = i * small / large;
  return m;
}

template <typename T>
Tensor<T> context_gather(const Tensor<T>& small, std::size_t h2, std::size_t w2) {
  const Shape& s = small.shape();
  if (s.h > h2 || s.w > w2) {
    throw ShapeError("contextual_conv: context map " + to_string(s) + " is larger than target " +
                     std::to_string(h2) + "x" + std::to_string(w2));
  }
  const auto rows = context_axis_map(s.h, h2);
  const auto cols = context_axis_map(s.w, w2);
  Tensor<T> out({s.n, s.c, h2, w2});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto src = small.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < h2; ++i) {
        const T* srow = src.data() + rows[i] * s.w;
        T* drow = dst.data() + i * w2;
        for (std::size_t j = 0; j < w2; ++j) drow[j] = srow[cols[j]];
      }
    }
  }
  return out;
}

template <typename T>
void context_scatter_add(const Tensor<T>& grad_large, Tensor<T>& grad_small) {
  const Shape& l = grad_large.shape();
  const Shape& s = grad_small.shape();
  if (l.n != s.n || l.c != s.c) throw ShapeError("context_scatter_add: batch/channel mismatch");
  const auto rows = context_axis_map(s.h, l.h);
  const auto cols = context_axis_map(s.w, l.w);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto src = grad_large.plane(n, c);
      auto dst = grad_small.plane(n, c);
      for (std::size_t i = 0; i < l.h; ++i) {
        const T* grow = src.data() + i * l.w;
        T* srow = dst.data() + rows[i] * s.w;
        for (std::size_t j = 0; j < l.w; ++j) srow[cols[j]] += grow[j];
      }
    }
  }
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw ShapeError("concat_channels: " + to_string(as) + " and " + to_string(bs) + " differ outside channels");
  }
  Tensor<T> out({as.n, as.c + bs.c, as.h, as.w});
  for (std::size_t n = 0; n < as.n; ++n) {
    for (std::size_t c = 0; c < as.c; ++c) std::ranges::copy(a.plane(n, c), out.plane(n, c).begin());
    for (std::size_t c = 0; c < bs.c; ++c) std::ranges::copy(b.plane(n, c), out.plane(n, as.c + c).begin());
  }
  return out;
}

template <typename T>
Tensor<T> selu_forward(const Tensor<T>& x) {
  const T lambda = static_cast<T>(kSeluLambda);
  const T la = static_cast<T>(kSeluLambda * kSeluAlpha);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    out[i] = v > T(0) ? lambda * v : la * std::expm1(v);
  }
  return out;
}

template <typename T>
void selu_backward(const Tensor<T>& x, const Tensor<T>& grad_out, Tensor<T>& grad_x) {
  const T lambda = static_cast<T>(kSeluLambda);
  const T la = static_cast<T>(kSeluLambda * kSeluAlpha);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    grad_x[i] += grad_out[i] * (v > T(0) ? lambda : la * std::exp(v));
  }
}

#define CTXH_INSTANTIATE(T)                                                                                 \
  template Tensor<T> conv2d_same_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template void conv2d_same_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*,  \
                                        Tensor<T>*, Tensor<T>*);                                            \
  template Tensor<T> transposed_conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                                  std::size_t);                                             \
  template void transposed_conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                              std::size_t, Tensor<T>*, Tensor<T>*, Tensor<T>*);             \
  template Tensor<T> maxpool2_forward<T>(const Tensor<T>&, std::vector<std::size_t>*);                     \
  template void maxpool2_backward<T>(const Tensor<T>&, const std::vector<std::size_t>&, Tensor<T>&);       \
  template Tensor<T> context_gather<T>(const Tensor<T>&, std::size_t, std::size_t);                        \
  template void context_scatter_add<T>(const Tensor<T>&, Tensor<T>&);                                      \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> selu_forward<T>(const Tensor<T>&);                                                    \
  template void selu_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);

CTXH_INSTANTIATE(float)
CTXH_INSTANTIATE(double)

#undef CTXH_INSTANTIATE

}  // namespace ctxh::kernels
