#include "negcnn/tape.hpp"

#include <algorithm>

#include "negcnn/errors.hpp"

namespace negcnn {

template <typename T>
void Tape<T>::check_owned(const Var<T>& v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("variable does not belong to this tape");
  }
}

template <typename T>
Var<T> Tape<T>::constant(BasicTensor<T> value) {
  nodes_.push_back(Node{std::move(value), std::nullopt, nullptr, false});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::parameter(BasicTensor<T> value) {
  nodes_.push_back(Node{std::move(value), std::nullopt, nullptr, true});
  parameters_.push_back(nodes_.size() - 1);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(BasicTensor<T> value, std::initializer_list<Var<T>> inputs,
                       BackwardFn backward) {
  if (consumed_) throw ContractError("cannot record on a consumed tape; call reset()");
  bool tracked = false;
  for (const Var<T>& in : inputs) {
    check_owned(in);
    tracked = tracked || nodes_[in.id_].tracked;
  }
  nodes_.push_back(Node{std::move(value), std::nullopt,
                        tracked ? std::move(backward) : BackwardFn{}, tracked});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Tape<T>::accumulate(const Var<T>& target, const BasicTensor<T>& grad) {
  check_owned(target);
  Node& node = nodes_[target.id_];
  if (!node.tracked) return;
  if (grad.shape() != node.value.shape()) {
    throw DimensionError("gradient shape " + shape_to_string(grad.shape()) +
                         " does not match value shape " + shape_to_string(node.value.shape()));
  }
  if (!node.grad) {
    node.grad = grad;
    return;
  }
  auto dst = node.grad->data();
  auto src = grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void Tape<T>::accumulate(const Var<T>& target, BasicTensor<T>&& grad) {
  check_owned(target);
  Node& node = nodes_[target.id_];
  if (!node.tracked) return;
  if (!node.grad && grad.shape() == node.value.shape()) {
    node.grad = std::move(grad);
    return;
  }
  accumulate(target, static_cast<const BasicTensor<T>&>(grad));
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  check_owned(loss);
  if (consumed_) throw ContractError("tape already consumed by backward()");
  if (!nodes_[loss.id_].value.is_scalar()) {
    throw ContractError("backward() needs a scalar terminal, got shape " +
                        shape_to_string(nodes_[loss.id_].value.shape()));
  }
  consumed_ = true;
  if (nodes_[loss.id_].tracked) {
    nodes_[loss.id_].grad = BasicTensor<T>::ones(nodes_[loss.id_].value.shape());
  }
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.backward && node.grad) {
      // Moving the closure out releases its saved buffers as soon as it ran.
      BackwardFn fn = std::move(node.backward);
      node.backward = nullptr;
      fn(*node.grad, *this);
    }
  }
  for (std::size_t id : parameters_) {
    if (!nodes_[id].grad) nodes_[id].grad = BasicTensor<T>::zeros(nodes_[id].value.shape());
  }
}

template <typename T>
const BasicTensor<T>& Tape<T>::value(const Var<T>& v) const {
  check_owned(v);
  return nodes_[v.id_].value;
}

template <typename T>
bool Tape<T>::tracked(const Var<T>& v) const {
  check_owned(v);
  return nodes_[v.id_].tracked;
}

template <typename T>
bool Tape<T>::has_grad(const Var<T>& v) const {
  check_owned(v);
  return nodes_[v.id_].grad.has_value();
}

template <typename T>
const BasicTensor<T>& Tape<T>::grad(const Var<T>& v) const {
  check_owned(v);
  const auto& g = nodes_[v.id_].grad;
  if (!g) throw ContractError("no gradient recorded for node " + std::to_string(v.id_));
  return *g;
}

template <typename T>
Var<T> Tape<T>::var(std::size_t id) {
  if (id >= nodes_.size()) throw ContractError("node id out of range");
  return Var<T>(this, id);
}

template <typename T>
void Tape<T>::reset() {
  nodes_.clear();
  parameters_.clear();
  consumed_ = false;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace negcnn
