#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace negcnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major array. The shape is fixed at construction; reshape()
// returns a new tensor with the same elements.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  // A one-element tensor of shape {1} holding zero.
  BasicTensor();
  explicit BasicTensor(Shape shape);
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor full(Shape shape, T value);
  static BasicTensor ones(Shape shape) { return full(std::move(shape), T{1}); }
  static BasicTensor scalar(T value) { return BasicTensor({1}, {value}); }
  static BasicTensor from(std::initializer_list<std::size_t> shape,
                          std::initializer_list<T> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool is_scalar() const noexcept { return data_.size() == 1; }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // Bounds-checked multi-index access.
  T& at(std::initializer_list<std::size_t> index);
  const T& at(std::initializer_list<std::size_t> index) const;

  T item() const;

  BasicTensor reshape(Shape shape) const&;
  BasicTensor reshape(Shape shape) &&;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool operator==(const BasicTensor& other) const = default;

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace negcnn
