#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "negcnn/errors.hpp"
#include "negcnn/nn/architecture.hpp"
#include "negcnn/nn/network.hpp"
#include "negcnn/ops.hpp"
#include "oracles.hpp"

using namespace negcnn;
using namespace negcnn::nn;

TEST(Architecture, BundledNames) {
  const std::vector<std::string> want = {"LeNet-5", "MVGG-5", "MVGG-6", "MVGG-7", "MVGG-8", "MVGG-9"};
  EXPECT_EQ(bundled_architecture_names(), want);
  EXPECT_THROW(bundled_architecture("VGG-16"), ContractError);
}

TEST(Architecture, LeNetParameterCount) {
  const auto spec = bundled_architecture("LeNet-5").bind({1, 32, 32}, 10);
  // 156 + 2,416 + 48,120 + 10,164 + 850
  EXPECT_EQ(parameter_count(spec), 61706u);
  EXPECT_EQ(build_network(spec, 1).parameter_count(), 61706u);
}

TEST(Architecture, Mvgg5ParameterCountMatchesHandCount) {
  const auto spec = bundled_architecture("MVGG-5").bind({3, 32, 32}, 10);
  const std::size_t hand = (3 * 9 * 16 + 16) + (16 * 9 * 16 + 16) + (16 * 9 * 48 + 48) +
                           (48 * 8 * 8 * 128 + 128) + (128 * 10 + 10);
  EXPECT_EQ(hand, 404362u);
  EXPECT_EQ(parameter_count(spec), hand);
}

TEST(Architecture, EveryBundledSpecPropagatesAtDatasetSizes) {
  for (const auto& name : bundled_architecture_names()) {
    std::vector<Shape> inputs = {{1, 32, 32}};
    if (name != "LeNet-5") inputs.push_back({3, 32, 32});
    for (const auto& in : inputs) {
      for (std::size_t k : {10u, 43u}) {
        const auto shapes = propagate_shapes(bundled_architecture(name).bind(in, k));
        EXPECT_EQ(shapes.back(), (Shape{k})) << name;
      }
    }
  }
}

TEST(Architecture, ParseRoundTrip) {
  for (const auto& name : bundled_architecture_names()) {
    const auto spec = bundled_architecture(name);
    EXPECT_EQ(parse_architecture(spec.to_text()), spec) << name;
  }
}

TEST(Architecture, ParseErrorsCarryLineNumbers) {
  try {
    parse_architecture("name X\nconv 3x3x8 same\nconv 3x3\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_architecture("conv 7x7x8\n"), FormatError);
  EXPECT_THROW(parse_architecture("maxpool 3x3\n"), FormatError);
  EXPECT_THROW(parse_architecture("dropout 0.5\n"), FormatError);
}

TEST(Architecture, ShapeFailureNamesLayer) {
  const auto spec = parse_architecture(
      "name Tiny\ninput 1x8x8\nconv 5x5x4\nconv 5x5x4\nfc classes\nsoftmax\n");
  try {
    propagate_shapes(spec);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("conv 5x5x4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(propagate_shapes(parse_architecture("input 1x8x8\nconv 3x3x4\nfc 10\n")),
               DimensionError);
}

TEST(Architecture, ResolveFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "negcnn_nn_test.arch";
  std::ofstream(path) << "name FromFile\ninput 1x8x8\nconv 3x3x2 same\nmaxpool 2x2\nfc classes\nsoftmax\n";
  const auto spec = resolve_architecture(path.string());
  EXPECT_EQ(spec.name, "FromFile");
  EXPECT_EQ(parameter_count(spec), (9u * 2 + 2) + (2u * 4 * 4 * 10 + 10));
  std::filesystem::remove(path);
  EXPECT_THROW(resolve_architecture(path.string()), ConfigError);
}

TEST(Network, SameSeedGivesIdenticalParameters) {
  const auto spec = bundled_architecture("MVGG-6").bind({3, 32, 32}, 43);
  const auto a = build_network(spec, 42);
  const auto b = build_network(spec, 42);
  const auto c = build_network(spec, 43);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_NE(a.parameters(), c.parameters());
}

TEST(Network, LayoutAndInitialisation) {
  const auto spec = bundled_architecture("LeNet-5");
  const auto layout = parameter_layout(spec);
  ASSERT_EQ(layout.size(), 10u);
  EXPECT_EQ(layout[0].first, "conv1.weight");
  EXPECT_EQ(layout[0].second, (Shape{6, 1, 5, 5}));
  EXPECT_EQ(layout[6].second, (Shape{120, 84}));
  const auto net = build_network(spec, 7);
  for (const auto& p : net.parameters()) {
    if (p.name.ends_with(".bias")) {
      for (float v : p.value.data()) EXPECT_EQ(v, 0.0f);
    }
  }
  // He-normal: empirical std of the first fc weights near sqrt(2 / 120).
  const auto& w = net.parameters()[6].value.data();
  double ss = 0;
  for (float v : w) ss += double(v) * v;
  EXPECT_NEAR(std::sqrt(ss / w.size()), std::sqrt(2.0 / 120), 0.01);
}

TEST(Network, RejectsMismatchedParameters) {
  const auto spec = bundled_architecture("LeNet-5");
  auto params = build_network(spec, 1).parameters();
  params[2].value = Tensor({3});
  EXPECT_THROW(Network(spec, params, 1), DimensionError);
  params.pop_back();
  EXPECT_THROW(Network(spec, params, 1), DimensionError);
}

TEST(Network, ForwardIsFiniteAndPure) {
  std::mt19937_64 rng(3);
  const auto spec = bundled_architecture("MVGG-7").bind({3, 32, 32}, 10);
  const auto net = build_network(spec, 5);
  const auto one = oracle::random_tensor<float>({1, 3, 32, 32}, rng, 0, 1);
  std::vector<float> rep;
  for (int i = 0; i < 4; ++i) rep.insert(rep.end(), one.data().begin(), one.data().end());
  const auto logits = predict_logits(net, Tensor({4, 3, 32, 32}, rep));
  ASSERT_EQ(logits.shape(), (Shape{4, 10}));
  for (float v : logits.data()) EXPECT_TRUE(std::isfinite(v));
  for (std::size_t i = 1; i < 4; ++i) {
    // Rows land in different GEMM blocks, so equality is up to rounding.
    for (std::size_t k = 0; k < 10; ++k) {
      EXPECT_NEAR(logits.at({i, k}), logits.at({0, k}), 1e-5 * (1 + std::abs(logits.at({0, k}))));
    }
  }
}

TEST(Network, ForwardRejectsWrongBatchShape) {
  const auto net = build_network(bundled_architecture("LeNet-5"), 1);
  EXPECT_THROW(predict_logits(net, Tensor({2, 1, 28, 28})), DimensionError);
  EXPECT_THROW(predict_logits(net, Tensor({2, 3, 32, 32})), DimensionError);
}

TEST(Network, TapedForwardMatchesInference) {
  std::mt19937_64 rng(4);
  const auto net = build_network(bundled_architecture("LeNet-5"), 2);
  const auto x = oracle::random_tensor<float>({3, 1, 32, 32}, rng, 0, 1);
  Tape<float> t;
  const auto params = bind_parameters(net, t);
  EXPECT_EQ(forward(net, params, t.constant(x)).value(), predict_logits(net, x));
}
