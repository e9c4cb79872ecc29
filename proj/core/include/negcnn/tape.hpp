#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <vector>

#include "negcnn/tensor.hpp"

namespace negcnn {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const BasicTensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool tracked() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Append-only record of primitive operations for reverse-mode
// differentiation. Inputs of a node always precede it. A tape is owned by a
// single thread; one training step builds and consumes one tape.
template <typename T>
class Tape {
 public:
  // Receives the gradient flowing into a node's output and pushes input
  // gradients back through Tape::accumulate.
  using BackwardFn = std::function<void(const BasicTensor<T>& upstream, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Untracked leaf.
  Var<T> constant(BasicTensor<T> value);
  // Tracked leaf; receives a gradient on backward().
  Var<T> parameter(BasicTensor<T> value);

  // Appends an operation result. The node is tracked when any input is,
  // and only then is `backward` kept.
  Var<T> record(BasicTensor<T> value, std::initializer_list<Var<T>> inputs,
                BackwardFn backward);

  void accumulate(const Var<T>& target, const BasicTensor<T>& grad);
  void accumulate(const Var<T>& target, BasicTensor<T>&& grad);

  // Differentiates the scalar `loss`. Throws ContractError for a non-scalar
  // terminal or a tape that was already consumed. Afterwards every parameter
  // leaf has a gradient of its own shape and the tape is consumed.
  void backward(const Var<T>& loss);

  const BasicTensor<T>& value(const Var<T>& v) const;
  bool tracked(const Var<T>& v) const;
  const BasicTensor<T>& grad(const Var<T>& v) const;
  bool has_grad(const Var<T>& v) const;

  // Parameter leaves in registration order.
  const std::vector<std::size_t>& parameter_ids() const noexcept { return parameters_; }
  Var<T> var(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }
  void reset();

 private:
  struct Node {
    BasicTensor<T> value;
    std::optional<BasicTensor<T>> grad;
    BackwardFn backward;
    bool tracked = false;
  };

  void check_owned(const Var<T>& v) const;

  std::vector<Node> nodes_;
  std::vector<std::size_t> parameters_;
  bool consumed_ = false;
};

template <typename T>
const BasicTensor<T>& Var<T>::value() const {
  return tape_->value(*this);
}

template <typename T>
bool Var<T>::tracked() const {
  return tape_->tracked(*this);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace negcnn
