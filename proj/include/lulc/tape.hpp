#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lulc/tensor.hpp"

namespace lulc {

// Handle to a node recorded on a Tape.
struct Var {
  int id = -1;
};

template <class T>
struct Parameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool trainable = true;  // false for batch-norm running statistics
};

// Named parameter registry; registration order is the checkpoint order.
template <class T>
class ParameterStore {
 public:
  int add(std::string name, BasicTensor<T> value, bool trainable = true);

  int index_of(const std::string& name) const;
  Parameter<T>& at(int i) { return params_[static_cast<std::size_t>(i)]; }
  const Parameter<T>& at(int i) const { return params_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(params_.size()); }

  std::size_t trainable_count() const;
  void zero_grad();

  template <class U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>(), p.trainable);
    return out;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter<T>> params_;
};

enum class Mode { Train, Eval };

// Records a static per-batch graph in creation (= topological) order and runs
// reverse-mode accumulation over it. Single owner; not thread-safe.
template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const BasicTensor<T>& out_grad)>;

  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}

  Var constant(BasicTensor<T> value);
  // Leaf whose gradient is kept on the tape (inputs under test).
  Var input(BasicTensor<T> value);
  // Leaf bound to a store entry; backward accumulates into Parameter::grad.
  Var parameter(ParameterStore<T>& store, int index);

  Var record(BasicTensor<T> value, std::initializer_list<Var> parents, Backward backward);

  const BasicTensor<T>& value(Var v) const;
  const BasicTensor<T>& grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  // Gradient slot for accumulation, or nullptr when v needs no gradient.
  BasicTensor<T>* grad_slot(Var v);

  // Seeds d(loss)/d(loss) = 1 and visits every node once in reverse order.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    BasicTensor<T> value;
    BasicTensor<T> grad;
    const BasicTensor<T>* external_value = nullptr;
    BasicTensor<T>* external_grad = nullptr;
    std::vector<int> parents;
    Backward backward;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  bool record_;
};

// Running statistics consulted in eval mode and updated in train mode.
template <class T>
struct BatchNormBuffers {
  BasicTensor<T>* running_mean = nullptr;
  BasicTensor<T>* running_var = nullptr;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

namespace ops {

template <class T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, const BasicTensor<T>* mask = nullptr);
template <class T>
Var add(Tape<T>& tape, Var a, Var b);
template <class T>
Var mul(Tape<T>& tape, Var a, Var b);
template <class T>
Var sum(Tape<T>& tape, Var x);
template <class T>
Var relu(Tape<T>& tape, Var x);
template <class T>
Var sigmoid(Tape<T>& tape, Var x);
// tanh(a) * sigmoid(b).
template <class T>
Var gated(Tape<T>& tape, Var a, Var b);
// Channels [begin, end) of an [N,C,...] tensor.
template <class T>
Var slice_channels(Tape<T>& tape, Var x, int begin, int end);
// Per-channel normalization over batch and spatial dims of [N,C,H,W] (or [N,C]).
template <class T>
Var batchnorm(Tape<T>& tape, Var x, Var gamma, Var beta, BatchNormBuffers<T> buffers, Mode mode);
// [N,C,H,W] -> [N,C,1,1].
template <class T>
Var global_avg_pool(Tape<T>& tape, Var x);
// x[N,C,H,W] * s[N,C,1,1] broadcast over space.
template <class T>
Var channel_scale(Tape<T>& tape, Var x, Var s);
// Mean negative log-likelihood over every (n, h, w) row of logits [N,K,H,W]
// (or [N,K]); targets hold one class per row in row-major (n, h, w) order.
template <class T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const int> targets);

}  // namespace ops

// Row-wise softmax over axis 1 of [N,K,...], log-sum-exp stabilized.
template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

}  // namespace lulc
