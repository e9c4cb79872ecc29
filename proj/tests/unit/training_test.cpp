#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "negcnn/binary_io.hpp"
#include "negcnn/data/transforms.hpp"
#include "negcnn/errors.hpp"
#include "negcnn/ops.hpp"
#include "negcnn/train/trainer.hpp"

using namespace negcnn;
using namespace negcnn::train;
namespace fs = std::filesystem;

namespace {

const char* kSmallArch =
    "name Small\ninput 1x12x12\nconv 3x3x4 same\nmaxpool 2x2\nfc 16\nfc classes\nsoftmax\n";

nn::ArchitectureSpec small_spec(std::size_t classes = 4) {
  return nn::parse_architecture(kSmallArch).bind({1, 12, 12}, classes);
}

// Class c has a bright 4x4 patch in quadrant c on a noisy background.
data::LabeledDataset quadrant_dataset(std::size_t n, std::uint64_t seed, std::size_t classes = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(0.0, 0.3);
  data::DatasetBuilder b("quadrants", data::Split::kTrain, classes, {1, 12, 12});
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::int32_t>(i % classes);
    Tensor t({1, 12, 12});
    for (auto& v : t.data()) v = data::snap_pixel(noise(rng));
    const std::size_t oy = (c / 2) * 6 + 1, ox = (c % 2) * 6 + 1;
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) t.at({0, oy + y, ox + x}) = data::snap_pixel(0.9);
    b.add(data::Image(std::move(t)), c);
  }
  return std::move(b).build();
}

TrainingData quadrant_data() {
  return {quadrant_dataset(96, 1), quadrant_dataset(32, 2).renamed("q", data::Split::kValidation),
          quadrant_dataset(40, 3).renamed("q", data::Split::kTest)};
}

TrainingConfig small_config(std::uint32_t epochs) {
  TrainingConfig c;
  c.epochs = epochs;
  c.batch_size = 16;
  c.learning_rate = 0.05;
  return c;
}

double mean_loss(const nn::Network& net, const data::LabeledDataset& ds) {
  Tape<float> t;
  const auto params = nn::bind_parameters(net, t);
  return ops::softmax_cross_entropy(nn::forward(net, params, t.constant(ds.batch(0, ds.size()))),
                                    ds.labels())
      .value()
      .item();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("negcnn_training_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Sgd, ZeroLearningRateLeavesParameters) {
  auto net = nn::build_network(small_spec(), 1);
  const auto before = net.parameters();
  std::vector<Tensor> grads;
  for (const auto& p : before) grads.push_back(Tensor::ones(p.value.shape()));
  OptimizerState st;
  sgd_step(net, grads, st, {0.0, 0.9});
  EXPECT_EQ(net.parameters(), before);
}

TEST(Sgd, PlainAndMomentumSteps) {
  auto net = nn::build_network(small_spec(), 1);
  const auto p0 = net.parameters();
  std::vector<Tensor> grads;
  for (const auto& p : p0) grads.push_back(Tensor::full(p.value.shape(), 0.5f));

  OptimizerState plain;
  sgd_step(net, grads, plain, {0.1, 0.0});
  for (std::size_t i = 0; i < p0.size(); ++i)
    for (std::size_t j = 0; j < p0[i].value.size(); ++j)
      EXPECT_NEAR(net.parameters()[i].value.data()[j], p0[i].value.data()[j] - 0.05f, 1e-7);

  net.parameters() = p0;
  OptimizerState mom;
  sgd_step(net, grads, mom, {0.1, 0.9});
  sgd_step(net, grads, mom, {0.1, 0.9});
  // v1 = -lr g, v2 = 0.9 v1 - lr g  =>  p2 = p0 - 2.9 lr g
  for (std::size_t i = 0; i < p0.size(); ++i)
    for (std::size_t j = 0; j < p0[i].value.size(); ++j)
      EXPECT_NEAR(net.parameters()[i].value.data()[j], p0[i].value.data()[j] - 2.9 * 0.1 * 0.5, 1e-7);
}

TEST(Sgd, NonFiniteGradientNamesParameterAndLeavesStateUntouched) {
  auto net = nn::build_network(small_spec(), 1);
  const auto before = net.parameters();
  std::vector<Tensor> grads;
  for (const auto& p : before) grads.push_back(Tensor::ones(p.value.shape()));
  grads[2].data()[3] = std::numeric_limits<float>::quiet_NaN();
  OptimizerState st;
  try {
    sgd_step(net, grads, st, {0.1, 0.9});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find(before[2].name), std::string::npos) << e.what();
  }
  EXPECT_EQ(net.parameters(), before);
  grads.pop_back();
  EXPECT_THROW(sgd_step(net, grads, st, {0.1, 0.9}), DimensionError);
}

TEST(Config, ValidationListsEveryProblem) {
  TrainingConfig c;
  c.learning_rate = 0;
  c.batch_size = 0;
  c.epochs = 0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* key : {"learning_rate", "batch_size", "epochs"}) {
      EXPECT_NE(msg.find(key), std::string::npos) << key;
    }
  }
}

TEST(Config, ScheduleAndFingerprint) {
  auto c = default_config_for("CIFAR-10");
  EXPECT_EQ(c.epochs, 60u);
  EXPECT_DOUBLE_EQ(c.learning_rate_at(29), 0.01);
  EXPECT_DOUBLE_EQ(c.learning_rate_at(30), 0.001);
  EXPECT_NEAR(c.learning_rate_at(45), 0.0001, 1e-15);
  EXPECT_EQ(default_config_for("MNIST").epochs, 15u);
  EXPECT_TRUE(default_config_for("MNIST").lr_decay_epochs.empty());
  const auto f = c.fingerprint();
  EXPECT_EQ(f.size(), 8u);
  EXPECT_EQ(c.fingerprint(), f);
  c.seed = 2;
  EXPECT_NE(c.fingerprint(), f);
}

TEST(History, EpochsMustBeConsecutive) {
  History h;
  h.append({1, 0.1, 1, 0.5, 0.5, 0.1});
  EXPECT_THROW(h.append({3, 0.1, 1, 0.5, 0.5, 0.1}), ContractError);
  h.append({2, 0.1, 0.9, 0.6, 0.6, 0.2});
  EXPECT_EQ(h.size(), 2u);
  EXPECT_EQ(h.to_csv().substr(0, h.to_csv().find('\n')),
            "epoch,learning_rate,train_loss,validation_accuracy,test_accuracy,negative_test_accuracy");
}

TEST(Train, LearnsAndRecordsHistory) {
  const auto data = quadrant_data();
  const auto spec = small_spec();
  const double initial = mean_loss(nn::build_network(spec, 1), data.train);
  std::vector<std::uint32_t> seen;
  const auto r = train::train(spec, data, small_config(8), [&](const EpochRecord& e) { seen.push_back(e.epoch); });
  EXPECT_EQ(seen, (std::vector<std::uint32_t>{1, 2, 3, 4, 5, 6, 7, 8}));
  ASSERT_EQ(r.final.history.size(), 8u);
  EXPECT_EQ(r.final.epoch, 8u);
  EXPECT_LT(r.final.history.records()[0].train_loss, initial);
  EXPECT_LT(mean_loss(r.final.network(), data.train), initial);
  EXPECT_GT(accuracy(r.final.network(), data.test), 0.9);
  // Best checkpoint is the first epoch with the highest validation accuracy.
  double best = -1;
  std::uint32_t best_epoch = 0;
  for (const auto& e : r.final.history.records())
    if (e.validation_accuracy > best) best = e.validation_accuracy, best_epoch = e.epoch;
  EXPECT_EQ(r.best.epoch, best_epoch);
  EXPECT_EQ(r.best.history.size(), best_epoch);
}

TEST(Train, MemorisesTenImages) {
  std::mt19937_64 rng(4);
  data::DatasetBuilder b("ten", data::Split::kTrain, 10, {1, 32, 32});
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 10; ++i) {
    Tensor t({1, 32, 32});
    for (auto& v : t.data()) v = data::snap_pixel(u(rng));
    b.add(data::Image(std::move(t)), i);
  }
  const auto ds = std::move(b).build();
  const auto spec = nn::bundled_architecture("LeNet-5");
  TrainingConfig cfg;
  cfg.epochs = 200;
  const auto r = train::train(spec, {ds, data::LabeledDataset::empty_like(ds), data::LabeledDataset::empty_like(ds)}, cfg);
  EXPECT_EQ(accuracy(r.final.network(), ds), 1.0);
  EXPECT_TRUE(std::isnan(r.final.history.back().validation_accuracy));
}

TEST(Train, IsDeterministic) {
  const auto data = quadrant_data();
  const auto a = train::train(small_spec(), data, small_config(3));
  const auto b = train::train(small_spec(), data, small_config(3));
  EXPECT_EQ(a.final.history, b.final.history);
  EXPECT_EQ(serialize_checkpoint(a.final), serialize_checkpoint(b.final));
  auto other = small_config(3);
  other.seed = 9;
  EXPECT_NE(train::train(small_spec(), data, other).final.parameters, a.final.parameters);
}

TEST(Train, ResumeReproducesUninterruptedRun) {
  const auto data = quadrant_data();
  auto cfg = small_config(10);
  cfg.lr_decay_epochs = {7};
  const auto full = train::train(small_spec(), data, cfg);
  auto first = cfg;
  first.epochs = 5;
  const auto half = train::train(small_spec(), data, first);
  const auto dir = scratch("resume");
  save_checkpoint(half.final, (dir / "e5.nckp").string());
  const auto resumed = resume(load_checkpoint((dir / "e5.nckp").string()), data, cfg);
  EXPECT_EQ(resumed.final.parameters, full.final.parameters);
  EXPECT_EQ(resumed.final.history, full.final.history);
  EXPECT_EQ(resumed.final.velocity, full.final.velocity);
}

TEST(Train, RejectsMismatchedData) {
  const auto data = quadrant_data();
  EXPECT_THROW(train::train(small_spec(5), data, small_config(1)), ContractError);
  EXPECT_THROW(train::train(small_spec().bind({1, 10, 10}, 4), data, small_config(1)), DimensionError);
  auto bad = small_config(1);
  bad.batch_size = 0;
  EXPECT_THROW(train::train(small_spec(), data, bad), ConfigError);
}

TEST(Train, DivergenceKeepsLastGoodCheckpoint) {
  const auto data = quadrant_data();
  auto cfg = small_config(5);
  cfg.learning_rate = 1e12;
  try {
    train::train(small_spec(), data, cfg);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    for (const auto& p : e.last_good().parameters)
      for (float v : p.value.data()) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto r = train::train(small_spec(), quadrant_data(), small_config(2));
  const auto dir = scratch("roundtrip");
  save_checkpoint(r.final, (dir / "a.nckp").string());
  const auto loaded = load_checkpoint((dir / "a.nckp").string());
  EXPECT_EQ(loaded, r.final);
  save_checkpoint(loaded, (dir / "b.nckp").string());
  EXPECT_EQ(io::read_file((dir / "a.nckp").string()), io::read_file((dir / "b.nckp").string()));
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const auto bytes = serialize_checkpoint(initial_checkpoint(small_spec(), 3));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(std::span(bytes).first(cut), "t"), FormatError) << cut;
  }
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 1;
  EXPECT_THROW(deserialize_checkpoint(flipped, "t"), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(magic, "t"), FormatError);
  EXPECT_THROW(load_checkpoint((scratch("missing") / "none.nckp").string()), IngestionError);
}

TEST(FineTune, EmptyDataIsIdentity) {
  const auto base = train::train(small_spec(), quadrant_data(), small_config(2)).final;
  const auto empty = data::LabeledDataset::empty_like(quadrant_dataset(4, 1));
  const auto r = fine_tune(base, {empty, empty, empty}, small_config(3));
  EXPECT_EQ(r.final, base);
}

TEST(FineTune, AppendsHistoryAndLearnsNegatives) {
  const auto data = quadrant_data();
  const auto base = train::train(small_spec(), data, small_config(6)).best;
  const double neg_before = accuracy(base.network(), data::negate(data.test));
  const TrainingData neg{data::negate(data.train), data::LabeledDataset::empty_like(data.validation),
                         data.test};
  const auto r = fine_tune(base, neg, small_config(6));
  EXPECT_EQ(r.final.history.size(), base.history.size() + 6);
  EXPECT_EQ(r.final.history.records()[base.history.size()].epoch, base.epoch + 1);
  EXPECT_GT(r.final.history.back().negative_test_accuracy, neg_before);
  data::DatasetBuilder five("five", data::Split::kTrain, 5, {1, 12, 12});
  five.add(data::Image(Tensor({1, 12, 12})), 4);
  EXPECT_THROW(fine_tune(base, {std::move(five).build(), neg.validation, neg.test}, small_config(1)),
               ContractError);
}

TEST(Accuracy, EmptyDatasetIsContractError) {
  const auto net = nn::build_network(small_spec(), 1);
  EXPECT_THROW(accuracy(net, data::LabeledDataset::empty_like(quadrant_dataset(4, 1))), ContractError);
}
