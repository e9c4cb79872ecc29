#include <benchmark/benchmark.h>

#include <random>

#include "negcnn/exec_mode.hpp"
#include "negcnn/nn/network.hpp"
#include "negcnn/ops.hpp"
#include "negcnn/train/trainer.hpp"

using namespace negcnn;

namespace {

Tensor random(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1, 1);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  return t;
}

// state.range(1): 0 reference, 1 fast.
void set_mode(const benchmark::State& state) {
  set_exec_mode(state.range(1) ? ExecMode::kFast : ExecMode::kReference);
}

void BM_Matmul(benchmark::State& state) {
  set_mode(state);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random({n, n}, 1), b = random({n, n}, 2);
  for (auto _ : state) {
    Tape<float> t;
    benchmark::DoNotOptimize(ops::matmul(t.constant(a), t.constant(b)).value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->ArgsProduct({{64, 256}, {0, 1}});

void BM_ConvForwardBackward(benchmark::State& state) {
  set_mode(state);
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = random({64, c, 32, 32}, 1), w = random({c, c, 3, 3}, 2), b = random({c}, 3);
  for (auto _ : state) {
    Tape<float> t;
    const auto wp = t.parameter(w);
    const auto y = ops::conv2d(t.constant(x), wp, t.constant(b), 1);
    t.backward(ops::sum(y));
    benchmark::DoNotOptimize(t.grad(wp).data().data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ConvForwardBackward)->ArgsProduct({{8, 32}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_LeNetTrainStep(benchmark::State& state) {
  set_mode(state);
  auto net = nn::build_network(nn::bundled_architecture("LeNet-5"), 1);
  const auto x = random({64, 1, 32, 32}, 4);
  std::vector<std::int32_t> labels(64);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int32_t>(i % 10);
  train::OptimizerState opt;
  for (auto _ : state) {
    Tape<float> t;
    const auto params = nn::bind_parameters(net, t);
    const auto loss = ops::softmax_cross_entropy(nn::forward(net, params, t.constant(x)),
                                                 std::span<const std::int32_t>(labels));
    t.backward(loss);
    std::vector<Tensor> grads;
    for (const auto& p : params) grads.push_back(t.grad(p));
    train::sgd_step(net, grads, opt, {1e-4, 0.9});
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_LeNetTrainStep)->ArgsProduct({{0}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_MvggInference(benchmark::State& state) {
  set_mode(state);
  const auto name = "MVGG-" + std::to_string(state.range(0));
  const auto net = nn::build_network(nn::bundled_architecture(name).bind({3, 32, 32}, 10), 1);
  const auto x = random({64, 3, 32, 32}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(nn::predict_logits(net, x).data().data());
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_MvggInference)->ArgsProduct({{5, 9}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
