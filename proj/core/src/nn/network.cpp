#include "negcnn/nn/network.hpp"

#include <cmath>
#include <random>

#include "negcnn/errors.hpp"
#include "negcnn/ops.hpp"

namespace negcnn::nn {

std::vector<std::pair<std::string, Shape>> parameter_layout(const ArchitectureSpec& spec) {
  const auto shapes = propagate_shapes(spec);
  std::vector<std::pair<std::string, Shape>> layout;
  Shape in = spec.input_shape;
  std::size_t conv_index = 0;
  std::size_t fc_index = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind == LayerKind::kConv) {
      const std::string prefix = "conv" + std::to_string(++conv_index);
      layout.emplace_back(prefix + ".weight", Shape{layer.filters, in[0], layer.kernel, layer.kernel});
      layout.emplace_back(prefix + ".bias", Shape{layer.filters});
    } else if (layer.kind == LayerKind::kFullyConnected) {
      const std::string prefix = "fc" + std::to_string(++fc_index);
      layout.emplace_back(prefix + ".weight", Shape{shape_size(in), shapes[i][0]});
      layout.emplace_back(prefix + ".bias", Shape{shapes[i][0]});
    }
    in = shapes[i];
  }
  return layout;
}

Network::Network(ArchitectureSpec spec, std::vector<NamedTensor> parameters, std::uint64_t seed)
    : spec_(std::move(spec)), parameters_(std::move(parameters)), seed_(seed) {
  const auto layout = parameter_layout(spec_);
  if (layout.size() != parameters_.size()) {
    throw DimensionError(spec_.name + ": expected " + std::to_string(layout.size()) +
                         " parameter tensors, got " + std::to_string(parameters_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (parameters_[i].name != layout[i].first || parameters_[i].value.shape() != layout[i].second) {
      throw DimensionError(spec_.name + ": parameter " + std::to_string(i) + " is " +
                           parameters_[i].name + shape_to_string(parameters_[i].value.shape()) +
                           ", expected " + layout[i].first + shape_to_string(layout[i].second));
    }
  }
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters_) total += p.value.size();
  return total;
}

Network build_network(const ArchitectureSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<NamedTensor> params;
  for (auto& [name, shape] : parameter_layout(spec)) {
    Tensor t(shape);
    if (name.ends_with(".weight")) {
      // conv: fan_in = C*k*k; fc weight [in, out]: fan_in = in
      const std::size_t fan_in = shape.size() == 4 ? shape[1] * shape[2] * shape[3] : shape[0];
      std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
      for (float& v : t.data()) v = dist(rng);
    }
    params.push_back({name, std::move(t)});
  }
  return Network(spec, std::move(params), seed);
}

std::vector<Var<float>> bind_parameters(const Network& net, Tape<float>& tape) {
  std::vector<Var<float>> vars;
  vars.reserve(net.parameters().size());
  for (const auto& p : net.parameters()) vars.push_back(tape.parameter(p.value));
  return vars;
}

Var<float> forward(const Network& net, const std::vector<Var<float>>& params,
                   const Var<float>& batch) {
  const ArchitectureSpec& spec = net.spec();
  const Shape& in = batch.shape();
  if (in.size() != 4 || Shape(in.begin() + 1, in.end()) != spec.input_shape) {
    throw DimensionError(spec.name + ": batch shape " + shape_to_string(in) +
                         " does not match input " + shape_to_string(spec.input_shape));
  }
  if (params.size() != net.parameters().size()) {
    throw ContractError("forward: parameter binding does not match the network");
  }
  const std::size_t n = in[0];
  Var<float> x = batch;
  std::size_t p = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    switch (layer.kind) {
      case LayerKind::kConv:
        x = ops::relu(ops::conv2d(x, params[p], params[p + 1], layer.pad_amount()));
        p += 2;
        break;
      case LayerKind::kMaxPool:
        x = ops::maxpool2d(x, layer.window);
        break;
      case LayerKind::kFullyConnected: {
        if (x.shape().size() != 2) x = ops::reshape(x, {n, x.value().size() / n});
        x = ops::add_bias(ops::matmul(x, params[p]), params[p + 1]);
        p += 2;
        const bool is_output = i + 2 == spec.layers.size();
        if (!is_output) x = ops::relu(x);
        break;
      }
      case LayerKind::kSoftmax:
        break;
    }
  }
  return x;
}

Tensor predict_logits(const Network& net, const Tensor& batch) {
  Tape<float> tape;
  std::vector<Var<float>> params;
  params.reserve(net.parameters().size());
  for (const auto& p : net.parameters()) params.push_back(tape.constant(p.value));
  const Var<float> x = tape.constant(batch);
  return forward(net, params, x).value();
}

}  // namespace negcnn::nn
