#include "negcnn/tensor.hpp"

#include <sstream>

#include "negcnn/errors.hpp"

namespace negcnn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor() : shape_{1}, data_(1, T{}) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), T{});
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_to_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " elements, got " +
                         std::to_string(data_.size()));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value) {
  BasicTensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from(std::initializer_list<std::size_t> shape,
                                    std::initializer_list<T> values) {
  return BasicTensor(Shape(shape), std::vector<T>(values));
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::size_t BasicTensor<T>::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw DimensionError("index rank " + std::to_string(index.size()) + " does not match " +
                         shape_to_string(shape_));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) {
      throw DimensionError("index " + std::to_string(i) + " out of range on axis " +
                           std::to_string(axis) + " of " + shape_to_string(shape_));
    }
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

template <typename T>
T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) {
  return data_[flat_index(index)];
}

template <typename T>
const T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  return data_[flat_index(index)];
}

template <typename T>
T BasicTensor<T>::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() requires a single-element tensor, got " + shape_to_string(shape_));
  }
  return data_[0];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshape(Shape shape) const& {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshape(Shape shape) && {
  return BasicTensor(std::move(shape), std::move(data_));
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace negcnn
