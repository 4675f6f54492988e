#include "lulc/tape.hpp"

#include <algorithm>
#include <cmath>

#include "lulc/kernels.hpp"

namespace lulc {

template <class T>
int ParameterStore<T>::add(std::string name, BasicTensor<T> value, bool trainable) {
  for (const auto& p : params_)
    if (p.name == name) throw UsageError("duplicate parameter name " + name);
  BasicTensor<T> grad(value.shape());
  params_.push_back({std::move(name), std::move(value), std::move(grad), trainable});
  return static_cast<int>(params_.size()) - 1;
}

template <class T>
int ParameterStore<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  throw UsageError("unknown parameter " + name);
}

template <class T>
std::size_t ParameterStore<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.value.size();
  return n;
}

template <class T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) {
    if (p.grad.shape() != p.value.shape())
      p.grad = BasicTensor<T>(p.value.shape());
    else
      p.grad.fill(T(0));
  }
}

template <class T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw UsageError("invalid tape variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <class T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw UsageError("invalid tape variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <class T>
Var Tape<T>::constant(BasicTensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Tape<T>::input(BasicTensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Tape<T>::parameter(ParameterStore<T>& store, int index) {
  Parameter<T>& p = store.at(index);
  Node n;
  n.external_value = &p.value;
  n.external_grad = &p.grad;
  n.requires_grad = record_ && p.trainable;
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Tape<T>::record(BasicTensor<T> value, std::initializer_list<Var> parents, Backward backward) {
#ifndef NDEBUG
  for (const T v : value.values())
    if (!std::isfinite(static_cast<double>(v))) throw NumericalError("non-finite value produced on tape");
#endif
  Node n;
  n.value = std::move(value);
  const int self = static_cast<int>(nodes_.size());
  for (Var p : parents) {
    if (p.id < 0 || p.id >= self) throw UsageError("tape parent recorded out of order");
    n.parents.push_back(p.id);
    n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(p.id)].requires_grad;
  }
  n.requires_grad = n.requires_grad && record_;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {self};
}

template <class T>
const BasicTensor<T>& Tape<T>::value(Var v) const {
  const Node& n = node(v);
  return n.external_value ? *n.external_value : n.value;
}

template <class T>
const BasicTensor<T>& Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  return n.external_grad ? *n.external_grad : n.grad;
}

template <class T>
BasicTensor<T>* Tape<T>::grad_slot(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (n.external_grad) {
    if (n.external_grad->shape() != n.external_value->shape()) *n.external_grad = BasicTensor<T>(n.external_value->shape());
    return n.external_grad;
  }
  if (n.grad.shape() != value(v).shape()) n.grad = BasicTensor<T>(value(v).shape());
  return &n.grad;
}

template <class T>
void Tape<T>::backward(Var loss) {
  if (value(loss).size() != 1) throw UsageError("backward needs a scalar loss, got " + shape_string(value(loss).shape()));
  if (!node(loss).requires_grad) return;
  BasicTensor<T>* seed = grad_slot(loss);
  (*seed)[0] += T(1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.backward) continue;
    if (n.grad.shape() != n.value.shape()) continue;  // never reached by the loss
    for (int p : n.parents)
      if (p >= id) throw UsageError("cycle detected on tape");
    n.backward(*this, n.grad);
  }
}

namespace ops {

namespace {

template <class T>
void require_same(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
  if (a.shape() != b.shape())
    throw UsageError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

template <class T>
T sigmoid_value(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

// (channels, inner spatial size, batch) of an [N,C,...] tensor.
struct Layout {
  int n, c;
  std::size_t inner;
};

template <class T>
Layout layout(const BasicTensor<T>& x, const char* what) {
  if (x.rank() < 2) throw UsageError(std::string(what) + " needs an [N,C,...] tensor");
  return {x.dim(0), x.dim(1), x.size() / (static_cast<std::size_t>(x.dim(0)) * static_cast<std::size_t>(x.dim(1)))};
}

}  // namespace

template <class T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, const BasicTensor<T>* mask) {
  BasicTensor<T> y;
  kernels::conv2d_forward(tape.value(x), tape.value(weight), &tape.value(bias), mask, y);
  return tape.record(std::move(y), {x, weight, bias}, [x, weight, bias, mask](Tape<T>& t, const BasicTensor<T>& g) {
    kernels::conv2d_backward(t.value(x), t.value(weight), mask, g, t.grad_slot(x), t.grad_slot(weight),
                             t.grad_slot(bias));
  });
}

template <class T>
Var add(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  require_same(av, bv, "add");
  BasicTensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape<T>& t, const BasicTensor<T>& g) {
    for (Var v : {a, b})
      if (auto* s = t.grad_slot(v))
        for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i];
  });
}

template <class T>
Var mul(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  require_same(av, bv, "mul");
  BasicTensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape<T>& t, const BasicTensor<T>& g) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (auto* s = t.grad_slot(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * bv[i];
    if (auto* s = t.grad_slot(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * av[i];
  });
}

template <class T>
Var sum(Tape<T>& tape, Var x) {
  double s = 0.0;
  for (T v : tape.value(x).values()) s += static_cast<double>(v);
  return tape.record(BasicTensor<T>({1}, static_cast<T>(s)), {x}, [x](Tape<T>& t, const BasicTensor<T>& g) {
    if (auto* s = t.grad_slot(x))
      for (auto& v : s->values()) v += g[0];
  });
}

template <class T>
Var relu(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > T(0) ? xv[i] : T(0);
  return tape.record(std::move(y), {x}, [x](Tape<T>& t, const BasicTensor<T>& g) {
    const auto& xv = t.value(x);
    if (auto* s = t.grad_slot(x))
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xv[i] > T(0)) (*s)[i] += g[i];
  });
}

template <class T>
Var sigmoid(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = sigmoid_value(xv[i]);
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(y), {x}, [x, self](Tape<T>& t, const BasicTensor<T>& g) {
    const auto& yv = t.value(Var{self});
    if (auto* s = t.grad_slot(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * yv[i] * (T(1) - yv[i]);
  });
}

template <class T>
Var gated(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  require_same(av, bv, "gated");
  BasicTensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(av[i]) * sigmoid_value(bv[i]);
  return tape.record(std::move(y), {a, b}, [a, b](Tape<T>& t, const BasicTensor<T>& g) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    auto* sa = t.grad_slot(a);
    auto* sb = t.grad_slot(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T th = std::tanh(av[i]);
      const T sg = sigmoid_value(bv[i]);
      if (sa) (*sa)[i] += g[i] * (T(1) - th * th) * sg;
      if (sb) (*sb)[i] += g[i] * th * sg * (T(1) - sg);
    }
  });
}

template <class T>
Var slice_channels(Tape<T>& tape, Var x, int begin, int end) {
  const auto& xv = tape.value(x);
  const Layout l = layout(xv, "slice_channels");
  if (begin < 0 || end > l.c || begin >= end) throw UsageError("slice_channels range out of bounds");
  Shape shape = xv.shape();
  shape[1] = end - begin;
  BasicTensor<T> y(shape);
  const std::size_t width = static_cast<std::size_t>(end - begin) * l.inner;
  for (int n = 0; n < l.n; ++n)
    std::copy_n(xv.data() + (static_cast<std::size_t>(n) * l.c + begin) * l.inner, width,
                y.data() + static_cast<std::size_t>(n) * width);
  return tape.record(std::move(y), {x}, [x, begin, end, l](Tape<T>& t, const BasicTensor<T>& g) {
    auto* s = t.grad_slot(x);
    if (!s) return;
    const std::size_t width = static_cast<std::size_t>(end - begin) * l.inner;
    for (int n = 0; n < l.n; ++n) {
      T* dst = s->data() + (static_cast<std::size_t>(n) * l.c + begin) * l.inner;
      const T* src = g.data() + static_cast<std::size_t>(n) * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
    }
  });
}

template <class T>
Var batchnorm(Tape<T>& tape, Var x, Var gamma, Var beta, BatchNormBuffers<T> buffers, Mode mode) {
  const auto& xv = tape.value(x);
  const Layout l = layout(xv, "batchnorm");
  require_shape(tape.value(gamma), Shape{l.c}, "batchnorm gamma");
  require_shape(tape.value(beta), Shape{l.c}, "batchnorm beta");
  const bool have_stats = buffers.running_mean && buffers.running_var &&
                          buffers.running_mean->shape() == Shape{l.c} && buffers.running_var->shape() == Shape{l.c};
  if (mode == Mode::Eval && !have_stats)
    throw UsageError("batchnorm eval mode requires initialized running statistics");
  const std::size_t m = static_cast<std::size_t>(l.n) * l.inner;
  if (mode == Mode::Train && m < 2) throw UsageError("batchnorm train mode needs more than one value per channel");

  std::vector<T> mean(static_cast<std::size_t>(l.c)), inv_std(static_cast<std::size_t>(l.c));
  for (int c = 0; c < l.c; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (mode == Mode::Train) {
      double s = 0.0, ss = 0.0;
      for (int n = 0; n < l.n; ++n) {
        const T* p = xv.data() + (static_cast<std::size_t>(n) * l.c + ci) * l.inner;
        for (std::size_t i = 0; i < l.inner; ++i) s += static_cast<double>(p[i]);
      }
      const double mu = s / static_cast<double>(m);
      for (int n = 0; n < l.n; ++n) {
        const T* p = xv.data() + (static_cast<std::size_t>(n) * l.c + ci) * l.inner;
        for (std::size_t i = 0; i < l.inner; ++i) {
          const double d = static_cast<double>(p[i]) - mu;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(m);
      mean[ci] = static_cast<T>(mu);
      inv_std[ci] = static_cast<T>(1.0 / std::sqrt(var + kBatchNormEps));
      if (have_stats) {
        auto& rm = (*buffers.running_mean)[ci];
        auto& rv = (*buffers.running_var)[ci];
        const double unbiased = ss / static_cast<double>(m - 1);
        rm = static_cast<T>((1.0 - kBatchNormMomentum) * static_cast<double>(rm) + kBatchNormMomentum * mu);
        rv = static_cast<T>((1.0 - kBatchNormMomentum) * static_cast<double>(rv) + kBatchNormMomentum * unbiased);
      }
    } else {
      mean[ci] = (*buffers.running_mean)[ci];
      inv_std[ci] = static_cast<T>(1.0 / std::sqrt(static_cast<double>((*buffers.running_var)[ci]) + kBatchNormEps));
    }
  }

  const auto& gv = tape.value(gamma);
  const auto& bv = tape.value(beta);
  BasicTensor<T> y(xv.shape());
  BasicTensor<T> xhat(xv.shape());
  for (int n = 0; n < l.n; ++n)
    for (int c = 0; c < l.c; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const std::size_t off = (static_cast<std::size_t>(n) * l.c + ci) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        const T h = (xv[off + i] - mean[ci]) * inv_std[ci];
        xhat[off + i] = h;
        y[off + i] = gv[ci] * h + bv[ci];
      }
    }

  return tape.record(std::move(y), {x, gamma, beta},
                     [x, gamma, beta, mode, l, m, inv_std = std::move(inv_std), xhat = std::move(xhat)](
                         Tape<T>& t, const BasicTensor<T>& g) {
                       const auto& gv = t.value(gamma);
                       auto* sx = t.grad_slot(x);
                       auto* sg = t.grad_slot(gamma);
                       auto* sb = t.grad_slot(beta);
                       for (int c = 0; c < l.c; ++c) {
                         const auto ci = static_cast<std::size_t>(c);
                         double sum_g = 0.0, sum_gx = 0.0;
                         for (int n = 0; n < l.n; ++n) {
                           const std::size_t off = (static_cast<std::size_t>(n) * l.c + ci) * l.inner;
                           for (std::size_t i = 0; i < l.inner; ++i) {
                             sum_g += static_cast<double>(g[off + i]);
                             sum_gx += static_cast<double>(g[off + i]) * static_cast<double>(xhat[off + i]);
                           }
                         }
                         if (sg) (*sg)[ci] += static_cast<T>(sum_gx);
                         if (sb) (*sb)[ci] += static_cast<T>(sum_g);
                         if (!sx) continue;
                         const double scale = static_cast<double>(gv[ci]) * static_cast<double>(inv_std[ci]);
                         const double md = static_cast<double>(m);
                         for (int n = 0; n < l.n; ++n) {
                           const std::size_t off = (static_cast<std::size_t>(n) * l.c + ci) * l.inner;
                           for (std::size_t i = 0; i < l.inner; ++i) {
                             if (mode == Mode::Train) {
                               const double d = static_cast<double>(g[off + i]) - sum_g / md -
                                                static_cast<double>(xhat[off + i]) * sum_gx / md;
                               (*sx)[off + i] += static_cast<T>(scale * d);
                             } else {
                               (*sx)[off + i] += static_cast<T>(scale * static_cast<double>(g[off + i]));
                             }
                           }
                         }
                       }
                     });
}

template <class T>
Var global_avg_pool(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  if (xv.rank() != 4) throw UsageError("global_avg_pool needs [N,C,H,W]");
  const Layout l = layout(xv, "global_avg_pool");
  BasicTensor<T> y({l.n, l.c, 1, 1});
  for (std::size_t nc = 0; nc < y.size(); ++nc) {
    double s = 0.0;
    for (std::size_t i = 0; i < l.inner; ++i) s += static_cast<double>(xv[nc * l.inner + i]);
    y[nc] = static_cast<T>(s / static_cast<double>(l.inner));
  }
  return tape.record(std::move(y), {x}, [x, l](Tape<T>& t, const BasicTensor<T>& g) {
    auto* s = t.grad_slot(x);
    if (!s) return;
    const T inv = T(1) / static_cast<T>(l.inner);
    for (std::size_t nc = 0; nc < g.size(); ++nc)
      for (std::size_t i = 0; i < l.inner; ++i) (*s)[nc * l.inner + i] += g[nc] * inv;
  });
}

template <class T>
Var channel_scale(Tape<T>& tape, Var x, Var scale) {
  const auto& xv = tape.value(x);
  const Layout l = layout(xv, "channel_scale");
  require_shape(tape.value(scale), Shape{l.n, l.c, 1, 1}, "channel_scale scale");
  const auto& sv = tape.value(scale);
  BasicTensor<T> y(xv.shape());
  for (std::size_t nc = 0; nc < sv.size(); ++nc)
    for (std::size_t i = 0; i < l.inner; ++i) y[nc * l.inner + i] = xv[nc * l.inner + i] * sv[nc];
  return tape.record(std::move(y), {x, scale}, [x, scale, l](Tape<T>& t, const BasicTensor<T>& g) {
    const auto& xv = t.value(x);
    const auto& sv = t.value(scale);
    auto* sx = t.grad_slot(x);
    auto* ss = t.grad_slot(scale);
    for (std::size_t nc = 0; nc < sv.size(); ++nc) {
      double acc = 0.0;
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t k = nc * l.inner + i;
        if (sx) (*sx)[k] += g[k] * sv[nc];
        acc += static_cast<double>(g[k]) * static_cast<double>(xv[k]);
      }
      if (ss) (*ss)[nc] += static_cast<T>(acc);
    }
  });
}

template <class T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const int> targets) {
  const auto& z = tape.value(logits);
  const Layout l = layout(z, "softmax_cross_entropy");
  const std::size_t rows = static_cast<std::size_t>(l.n) * l.inner;
  if (targets.size() != rows)
    throw UsageError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  for (int tcls : targets)
    if (tcls < 0 || tcls >= l.c) throw UsageError("softmax_cross_entropy: target " + std::to_string(tcls) + " out of range");
  BasicTensor<T> probs(z.shape());
  double total = 0.0;
  for (int n = 0; n < l.n; ++n)
    for (std::size_t i = 0; i < l.inner; ++i) {
      const std::size_t base = static_cast<std::size_t>(n) * l.c * l.inner + i;
      double mx = -INFINITY;
      for (int k = 0; k < l.c; ++k) mx = std::max(mx, static_cast<double>(z[base + static_cast<std::size_t>(k) * l.inner]));
      double se = 0.0;
      for (int k = 0; k < l.c; ++k) se += std::exp(static_cast<double>(z[base + static_cast<std::size_t>(k) * l.inner]) - mx);
      const double lse = mx + std::log(se);
      for (int k = 0; k < l.c; ++k) {
        const std::size_t idx = base + static_cast<std::size_t>(k) * l.inner;
        probs[idx] = static_cast<T>(std::exp(static_cast<double>(z[idx]) - lse));
      }
      const int tcls = targets[static_cast<std::size_t>(n) * l.inner + i];
      total += lse - static_cast<double>(z[base + static_cast<std::size_t>(tcls) * l.inner]);
    }
  const double inv_rows = 1.0 / static_cast<double>(rows);
  std::vector<int> tgt(targets.begin(), targets.end());
  return tape.record(BasicTensor<T>({1}, static_cast<T>(total * inv_rows)), {logits},
                     [logits, l, inv_rows, probs = std::move(probs), tgt = std::move(tgt)](Tape<T>& t,
                                                                                           const BasicTensor<T>& g) {
                       auto* s = t.grad_slot(logits);
                       if (!s) return;
                       const double scale = static_cast<double>(g[0]) * inv_rows;
                       for (int n = 0; n < l.n; ++n)
                         for (std::size_t i = 0; i < l.inner; ++i) {
                           const std::size_t base = static_cast<std::size_t>(n) * l.c * l.inner + i;
                           const int tcls = tgt[static_cast<std::size_t>(n) * l.inner + i];
                           for (int k = 0; k < l.c; ++k) {
                             const std::size_t idx = base + static_cast<std::size_t>(k) * l.inner;
                             const double d = static_cast<double>(probs[idx]) - (k == tcls ? 1.0 : 0.0);
                             (*s)[idx] += static_cast<T>(scale * d);
                           }
                         }
                     });
}

}  // namespace ops

template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& z) {
  if (z.rank() < 2) throw UsageError("softmax needs an [N,K,...] tensor");
  const int n = z.dim(0), k = z.dim(1);
  const std::size_t inner = z.size() / (static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
  BasicTensor<T> p(z.shape());
  for (int b = 0; b < n; ++b)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = static_cast<std::size_t>(b) * k * inner + i;
      double mx = -INFINITY;
      for (int c = 0; c < k; ++c) mx = std::max(mx, static_cast<double>(z[base + static_cast<std::size_t>(c) * inner]));
      double se = 0.0;
      for (int c = 0; c < k; ++c) se += std::exp(static_cast<double>(z[base + static_cast<std::size_t>(c) * inner]) - mx);
      for (int c = 0; c < k; ++c) {
        const std::size_t idx = base + static_cast<std::size_t>(c) * inner;
        p[idx] = static_cast<T>(std::exp(static_cast<double>(z[idx]) - mx) / se);
      }
    }
  return p;
}

#define LULC_INSTANTIATE_TAPE(T)                                                                             \
  template class ParameterStore<T>;                                                                          \
  template class Tape<T>;                                                                                    \
  template BasicTensor<T> softmax<T>(const BasicTensor<T>&);                                                 \
  namespace ops {                                                                                            \
  template Var conv2d<T>(Tape<T>&, Var, Var, Var, const BasicTensor<T>*);                                    \
  template Var add<T>(Tape<T>&, Var, Var);                                                                   \
  template Var mul<T>(Tape<T>&, Var, Var);                                                                   \
  template Var sum<T>(Tape<T>&, Var);                                                                        \
  template Var relu<T>(Tape<T>&, Var);                                                                       \
  template Var sigmoid<T>(Tape<T>&, Var);                                                                    \
  template Var gated<T>(Tape<T>&, Var, Var);                                                                 \
  template Var slice_channels<T>(Tape<T>&, Var, int, int);                                                   \
  template Var batchnorm<T>(Tape<T>&, Var, Var, Var, BatchNormBuffers<T>, Mode);                             \
  template Var global_avg_pool<T>(Tape<T>&, Var);                                                            \
  template Var channel_scale<T>(Tape<T>&, Var, Var);                                                         \
  template Var softmax_cross_entropy<T>(Tape<T>&, Var, std::span<const int>);                                \
  }

LULC_INSTANTIATE_TAPE(float)
LULC_INSTANTIATE_TAPE(double)

}  // namespace lulc
