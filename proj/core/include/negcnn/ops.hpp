#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "negcnn/tape.hpp"
#include "negcnn/tensor.hpp"

// Differentiable primitives. Every op appends one node to the tape of its
// inputs; the node carries a backward rule only when an input is tracked.
namespace negcnn::ops {

// [m x k] * [k x n] -> [m x n]
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T factor);
// max(x, 0); the subgradient at exactly 0 is 0.
template <typename T>
Var<T> relu(const Var<T>& a);

// Sum of all elements -> shape {1}.
template <typename T>
Var<T> sum(const Var<T>& a);

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape);

// x: [N x F], bias: [F]; adds bias to every row.
template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& bias);

// Cross-correlation, stride 1, symmetric zero padding.
// input [N,C,H,W], weights [F,C,k,k], bias [F] -> [N,F,H+2p-k+1,W+2p-k+1].
// Kernel sizes 3 and 5 are supported.
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weights, const Var<T>& bias,
              std::size_t padding);

// Non-overlapping max pooling with window and stride s in {2, 4}.
// Backward routes each window's gradient to its first maximum in row-major order.
template <typename T>
Var<T> maxpool2d(const Var<T>& input, std::size_t window);

// Mean over the batch of -log softmax(logits)[label]; logits [N x K].
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const std::int32_t> labels);

}  // namespace negcnn::ops
