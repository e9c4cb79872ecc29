#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "negcnn/nn/architecture.hpp"
#include "negcnn/tape.hpp"
#include "negcnn/tensor.hpp"

namespace negcnn::nn {

struct NamedTensor {
  std::string name;
  Tensor value;
  bool operator==(const NamedTensor&) const = default;
};

// Weights and biases for one ArchitectureSpec. Parameter order follows the
// layer order: conv{i}.weight [F,C,k,k], conv{i}.bias [F],
// fc{i}.weight [in,out], fc{i}.bias [out].
class Network {
 public:
  // Validates that `parameters` match the shapes implied by `spec`.
  Network(ArchitectureSpec spec, std::vector<NamedTensor> parameters, std::uint64_t seed);

  const ArchitectureSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<NamedTensor>& parameters() const noexcept { return parameters_; }
  std::vector<NamedTensor>& parameters() noexcept { return parameters_; }
  std::size_t parameter_count() const;

 private:
  ArchitectureSpec spec_;
  std::vector<NamedTensor> parameters_;
  std::uint64_t seed_;
};

// Expected (name, shape) of every parameter of `spec`, in order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ArchitectureSpec& spec);

// He-normal weights (std = sqrt(2 / fan_in)), zero biases. Deterministic for a seed.
Network build_network(const ArchitectureSpec& spec, std::uint64_t seed);

// Registers every parameter as a tracked leaf, in parameter order.
std::vector<Var<float>> bind_parameters(const Network& net, Tape<float>& tape);

// Logits [N x K]. ReLU follows every convolution and every hidden fc layer;
// the softmax layer is left to the loss.
Var<float> forward(const Network& net, const std::vector<Var<float>>& params,
                   const Var<float>& batch);

// Inference without gradient bookkeeping.
Tensor predict_logits(const Network& net, const Tensor& batch);

}  // namespace negcnn::nn
