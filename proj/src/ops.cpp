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

#include "ctxh/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace ctxh {

namespace {

template <typename T>
Tensor<T>* slot_if(Tape<T>& tape, std::size_t id) {
  return tape.requires_grad(id) ? &tape.grad_slot(id) : nullptr;
}

template <typename T>
Tape<T>& same_tape(std::initializer_list<Var<T>> vars) {
  Tape<T>* tape = nullptr;
  for (const auto& v : vars) {
    if (!v.valid()) throw ContractError("operation received an unset Var");
    if (tape == nullptr) tape = &v.tape();
    if (&v.tape() != tape) throw ContractError("operation mixes Vars from different tapes");
  }
  return *tape;
}

void check_labels(const Shape& logits, const LabelMap& labels) {
  const Shape& ls = labels.shape();
  if (ls.c != 1 || ls.n != logits.n || ls.h != logits.h || ls.w != logits.w) {
    throw ShapeError("softmax_cross_entropy: labels " + to_string(ls) + " do not match logits " + to_string(logits));
  }
  for (std::int32_t v : labels.data()) {
    if (v < 0 || static_cast<std::size_t>(v) >= logits.c) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(v) + " outside [0, " +
                      std::to_string(logits.c) + ")");
    }
  }
}

// Loss value and its gradient with respect to the logits.
template <typename T>
T cross_entropy_with_grad(const Tensor<T>& logits, const LabelMap& labels, Tensor<T>* grad) {
  check_labels(logits.shape(), labels);
  const Shape& s = logits.shape();
  const std::size_t plane = s.spatial();
  const std::size_t count = s.n * plane;
  const T inv = T(1) / static_cast<T>(count);
  std::vector<T> probs(s.c);
  T total = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t q = 0; q < plane; ++q) {
      T m = logits[logits.offset(n, 0, 0, 0) + q];
      for (std::size_t c = 1; c < s.c; ++c) m = std::max(m, logits[logits.offset(n, c, 0, 0) + q]);
      T z = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        probs[c] = std::exp(logits[logits.offset(n, c, 0, 0) + q] - m);
        z += probs[c];
      }
      const auto label = static_cast<std::size_t>(labels[n * plane + q]);
      total += m + std::log(z) - logits[logits.offset(n, label, 0, 0) + q];
      if (grad) {
        for (std::size_t c = 0; c < s.c; ++c) {
          const T p = probs[c] / z;
          (*grad)[grad->offset(n, c, 0, 0) + q] = (p - (c == label ? T(1) : T(0))) * inv;
        }
      }
    }
  }
  return total * inv;
}

template <typename T>
Tensor<T> scalar(T v) {
  return Tensor<T>({1, 1, 1, 1}, v);
}

}  // namespace

template <typename T>
ConvFilter<T> ConvFilter<T>::zeros(std::size_t out_channels, std::size_t in_channels, std::size_t k) {
  return {ctxh::zeros<T>({out_channels, in_channels, k, k}), ctxh::zeros<T>({1, out_channels, 1, 1})};
}

// ---------------------------------------------------------------------------
// Tensor-level operators.

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const ConvFilter<T>& f) {
  return kernels::conv2d_same_forward(x, f.weights, f.bias);
}

template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const ConvFilter<T>& f, std::size_t stride) {
  return kernels::transposed_conv2d_forward(x, f.weights, f.bias, stride);
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x) {
  return kernels::maxpool2_forward<T>(x, nullptr);
}

template <typename T>
Tensor<T> selu(const Tensor<T>& x) {
  return kernels::selu_forward(x);
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  return kernels::concat_channels(a, b);
}

template <typename T>
Tensor<T> contextual_conv(const Tensor<T>& small, const Tensor<T>& large, const ContextLink<T>& link) {
  const Shape& ss = small.shape();
  const Shape& ls = large.shape();
  if (ss.n != ls.n) throw ShapeError("contextual_conv: batch sizes differ");
  if (link.bank_small.out_channels() != link.bank_large.out_channels()) {
    throw ShapeError("contextual_conv: banks disagree on output channels");
  }
  Tensor<T> acc = conv2d_same(large, link.bank_large);
  acc += kernels::context_gather(conv2d_same(small, link.bank_small), ls.h, ls.w);
  return kernels::selu_forward(acc);
}

template <typename T>
T softmax_cross_entropy(const Tensor<T>& logits, const LabelMap& labels) {
  return cross_entropy_with_grad<T>(logits, labels, nullptr);
}

template <typename T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "mse_loss");
  T acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<T>(pred.size());
}

// ---------------------------------------------------------------------------
// Recorded operators.

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape({a, b});
  const std::size_t ai = a.id(), bi = b.id();
  return tape.record("add", ctxh::add(a.value(), b.value()), {ai, bi}, [ai, bi](Tape<T>& t, std::size_t self) {
    t.accumulate(ai, t.grad(self));
    t.accumulate(bi, t.grad(self));
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape({a, b});
  const std::size_t ai = a.id(), bi = b.id();
  return tape.record("mul", ctxh::mul(a.value(), b.value()), {ai, bi}, [ai, bi](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (t.requires_grad(ai)) t.accumulate(ai, ctxh::mul(g, t.value(bi)));
    if (t.requires_grad(bi)) t.accumulate(bi, ctxh::mul(g, t.value(ai)));
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tape<T>& tape = same_tape({a});
  const std::size_t ai = a.id();
  return tape.record("scale", ctxh::scale(a.value(), factor), {ai}, [ai, factor](Tape<T>& t, std::size_t self) {
    t.accumulate(ai, ctxh::scale(t.grad(self), factor));
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& tape = same_tape({a});
  const std::size_t ai = a.id();
  return tape.record("sum", scalar(ctxh::sum(a.value())), {ai}, [ai](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    for (T& v : t.grad_slot(ai).data()) v += g;
  });
}

template <typename T>
Var<T> conv2d_same(Var<T> x, Var<T> weight, Var<T> bias) {
  Tape<T>& tape = same_tape({x, weight, bias});
  const std::size_t xi = x.id(), wi = weight.id(), bi = bias.id();
  return tape.record("conv2d_same", kernels::conv2d_same_forward(x.value(), weight.value(), bias.value()),
                     {xi, wi, bi}, [xi, wi, bi](Tape<T>& t, std::size_t self) {
                       Tensor<T>* gx = slot_if(t, xi);
                       Tensor<T>* gw = slot_if(t, wi);
                       Tensor<T>* gb = slot_if(t, bi);
                       kernels::conv2d_same_backward(t.value(xi), t.value(wi), t.grad(self), gx, gw, gb);
                     });
}

template <typename T>
Var<T> transposed_conv2d(Var<T> x, Var<T> weight, Var<T> bias, std::size_t stride) {
  Tape<T>& tape = same_tape({x, weight, bias});
  const std::size_t xi = x.id(), wi = weight.id(), bi = bias.id();
  return tape.record("transposed_conv2d",
                     kernels::transposed_conv2d_forward(x.value(), weight.value(), bias.value(), stride),
                     {xi, wi, bi}, [xi, wi, bi, stride](Tape<T>& t, std::size_t self) {
                       Tensor<T>* gx = slot_if(t, xi);
                       Tensor<T>* gw = slot_if(t, wi);
                       Tensor<T>* gb = slot_if(t, bi);
                       kernels::transposed_conv2d_backward(t.value(xi), t.value(wi), t.grad(self), stride, gx, gw,
                                                           gb);
                     });
}

template <typename T>
Var<T> maxpool2(Var<T> x) {
  Tape<T>& tape = same_tape({x});
  const std::size_t xi = x.id();
  auto argmax = std::make_shared<std::vector<std::size_t>>();
  Tensor<T> out = kernels::maxpool2_forward(x.value(), argmax.get());
  return tape.record("maxpool2", std::move(out), {xi}, [xi, argmax](Tape<T>& t, std::size_t self) {
    kernels::maxpool2_backward(t.grad(self), *argmax, t.grad_slot(xi));
  });
}

template <typename T>
Var<T> selu(Var<T> x) {
  Tape<T>& tape = same_tape({x});
  const std::size_t xi = x.id();
  return tape.record("selu", kernels::selu_forward(x.value()), {xi}, [xi](Tape<T>& t, std::size_t self) {
    kernels::selu_backward(t.value(xi), t.grad(self), t.grad_slot(xi));
  });
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape({a, b});
  const std::size_t ai = a.id(), bi = b.id();
  const std::size_t ac = a.shape().c, bc = b.shape().c;
  return tape.record("concat_channels", kernels::concat_channels(a.value(), b.value()), {ai, bi},
                     [ai, bi, ac, bc](Tape<T>& t, std::size_t self) {
                       const Tensor<T>& g = t.grad(self);
                       if (t.requires_grad(ai)) t.accumulate(ai, slice_channels(g, 0, ac));
                       if (t.requires_grad(bi)) t.accumulate(bi, slice_channels(g, ac, ac + bc));
                     });
}

template <typename T>
Var<T> context_gather(Var<T> small, std::size_t h2, std::size_t w2) {
  Tape<T>& tape = same_tape({small});
  const std::size_t si = small.id();
  return tape.record("context_gather", kernels::context_gather(small.value(), h2, w2), {si},
                     [si](Tape<T>& t, std::size_t self) { kernels::context_scatter_add(t.grad(self), t.grad_slot(si)); });
}

template <typename T>
Var<T> contextual_conv(Var<T> large, Var<T> weight_large, Var<T> bias_large,
                       std::span<const ContextSource<T>> sources) {
  const Shape ls = large.shape();
  Var<T> acc = conv2d_same(large, weight_large, bias_large);
  for (const auto& src : sources) {
    if (src.features.shape().n != ls.n) throw ShapeError("contextual_conv: batch sizes differ");
    if (src.weight.shape().n != weight_large.shape().n) {
      throw ShapeError("contextual_conv: banks disagree on output channels");
    }
    Var<T> small_out = conv2d_same(src.features, src.weight, src.bias);
    acc = add(acc, context_gather(small_out, ls.h, ls.w));
  }
  return selu(acc);
}

template <typename T>
Var<T> contextual_conv(Var<T> small, Var<T> large, Var<T> weight_small, Var<T> bias_small, Var<T> weight_large,
                       Var<T> bias_large) {
  const ContextSource<T> src{small, weight_small, bias_small};
  return contextual_conv(large, weight_large, bias_large, std::span<const ContextSource<T>>(&src, 1));
}

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, const LabelMap& labels) {
  Tape<T>& tape = same_tape({logits});
  const std::size_t li = logits.id();
  auto grad = std::make_shared<Tensor<T>>(logits.shape());
  const T loss = cross_entropy_with_grad(logits.value(), labels, grad.get());
  return tape.record("softmax_cross_entropy", scalar(loss), {li}, [li, grad](Tape<T>& t, std::size_t self) {
    t.accumulate(li, ctxh::scale(*grad, t.grad(self)[0]));
  });
}

template <typename T>
Var<T> mse_loss(Var<T> pred, const Tensor<T>& target) {
  Tape<T>& tape = same_tape({pred});
  const std::size_t pi = pred.id();
  const T loss = mse_loss(pred.value(), target);
  auto diff = std::make_shared<Tensor<T>>(ctxh::sub(pred.value(), target));
  return tape.record("mse_loss", scalar(loss), {pi}, [pi, diff](Tape<T>& t, std::size_t self) {
    const T factor = T(2) * t.grad(self)[0] / static_cast<T>(diff->size());
    t.accumulate(pi, ctxh::scale(*diff, factor));
  });
}

template <typename T>
Var<T> scaled_gradient(Var<T> x, T factor) {
  Tape<T>& tape = same_tape({x});
  const std::size_t xi = x.id();
  return tape.record("scaled_gradient", x.value(), {xi}, [xi, factor](Tape<T>& t, std::size_t self) {
    t.accumulate(xi, ctxh::scale(t.grad(self), factor));
  });
}

#define CTXH_INSTANTIATE(T)                                                                                    \
  template struct ConvFilter<T>;                                                                              \
  template Tensor<T> conv2d_same<T>(const Tensor<T>&, const ConvFilter<T>&);                                  \
  template Tensor<T> transposed_conv2d<T>(const Tensor<T>&, const ConvFilter<T>&, std::size_t);               \
  template Tensor<T> maxpool2<T>(const Tensor<T>&);                                                           \
  template Tensor<T> selu<T>(const Tensor<T>&);                                                               \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> contextual_conv<T>(const Tensor<T>&, const Tensor<T>&, const ContextLink<T>&);           \
  template T softmax_cross_entropy<T>(const Tensor<T>&, const LabelMap&);                                     \
  template T mse_loss<T>(const Tensor<T>&, const Tensor<T>&);                                                 \
  template Var<T> add<T>(Var<T>, Var<T>);                                                                     \
  template Var<T> mul<T>(Var<T>, Var<T>);                                                                     \
  template Var<T> scale<T>(Var<T>, T);                                                                        \
  template Var<T> sum<T>(Var<T>);                                                                             \
  template Var<T> conv2d_same<T>(Var<T>, Var<T>, Var<T>);                                                     \
  template Var<T> transposed_conv2d<T>(Var<T>, Var<T>, Var<T>, std::size_t);                                  \
  template Var<T> maxpool2<T>(Var<T>);                                                                        \
  template Var<T> selu<T>(Var<T>);                                                                            \
  template Var<T> concat_channels<T>(Var<T>, Var<T>);                                                         \
  template Var<T> context_gather<T>(Var<T>, std::size_t, std::size_t);                                        \
  template Var<T> contextual_conv<T>(Var<T>, Var<T>, Var<T>, std::span<const ContextSource<T>>);              \
  template Var<T> contextual_conv<T>(Var<T>, Var<T>, Var<T>, Var<T>, Var<T>, Var<T>);                         \
  template Var<T> softmax_cross_entropy<T>(Var<T>, const LabelMap&);                                          \
  template Var<T> mse_loss<T>(Var<T>, const Tensor<T>&);                                                      \
  template Var<T> scaled_gradient<T>(Var<T>, T);

CTXH_INSTANTIATE(float)
CTXH_INSTANTIATE(double)

#undef CTXH_INSTANTIATE

}  // namespace ctxh
