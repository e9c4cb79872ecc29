#include "negcnn/exp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "negcnn/errors.hpp"
#include "negcnn/nn/inference.hpp"
#include "negcnn/train/trainer.hpp"

namespace negcnn::exp {

ConfusionMatrix ConfusionMatrix::from_predictions(std::size_t num_classes,
                                                  std::span<const std::int32_t> truth,
                                                  std::span<const std::int32_t> predicted) {
  if (num_classes == 0) throw ContractError("confusion matrix needs at least one class");
  if (truth.size() != predicted.size()) {
    throw DimensionError("confusion matrix: " + std::to_string(truth.size()) + " labels but " +
                         std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm;
  cm.k_ = num_classes;
  cm.counts_.assign(num_classes * num_classes, 0);
  cm.support_.assign(num_classes, 0);
  const auto check = [&](std::int32_t c, const char* what) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw ContractError(std::string("confusion matrix: ") + what + " class " + std::to_string(c) +
                          " outside [0, " + std::to_string(num_classes) + ")");
    }
    return static_cast<std::size_t>(c);
  };
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::size_t t = check(truth[i], "true");
    const std::size_t p = check(predicted[i], "predicted");
    ++cm.counts_[t * num_classes + p];
    ++cm.support_[t];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (cm.support_[c] == 0) {
      throw ContractError("confusion matrix: class " + std::to_string(c) + " has no images");
    }
  }
  cm.probs_.resize(cm.counts_.size());
  for (std::size_t i = 0; i < num_classes; ++i) {
    const auto s = static_cast<double>(cm.support_[i]);
    for (std::size_t j = 0; j < num_classes; ++j) {
      cm.probs_[i * num_classes + j] = static_cast<double>(cm.counts_[i * num_classes + j]) / s;
    }
  }
  return cm;
}

std::size_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(support_.begin(), support_.end(), std::size_t{0});
}

double ConfusionMatrix::accuracy() const {
  double weighted = 0.0;
  for (std::size_t i = 0; i < k_; ++i) weighted += static_cast<double>(support_[i]) * at(i, i);
  return weighted / static_cast<double>(total());
}

double ConfusionMatrix::macro_recall() const {
  double trace = 0.0;
  for (std::size_t i = 0; i < k_; ++i) trace += at(i, i);
  return trace / static_cast<double>(k_);
}

std::vector<double> ConfusionMatrix::predicted_mass() const {
  std::vector<double> mass(k_, 0.0);
  for (std::size_t i = 0; i < k_; ++i) {
    for (std::size_t j = 0; j < k_; ++j) mass[j] += at(i, j);
  }
  for (double& m : mass) m /= static_cast<double>(k_);
  return mass;
}

std::vector<std::size_t> ConfusionMatrix::top_predicted(std::size_t n) const {
  const auto mass = predicted_mass();
  std::vector<std::size_t> order(k_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
  order.resize(std::min(n, k_));
  return order;
}

double ConfusionMatrix::mass_in(std::span<const std::size_t> columns) const {
  const auto mass = predicted_mass();
  double sum = 0.0;
  for (std::size_t c : columns) sum += mass.at(c);
  return sum;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "true\\predicted";
  for (std::size_t j = 0; j < k_; ++j) os << ',' << j;
  os << '\n';
  for (std::size_t i = 0; i < k_; ++i) {
    os << i;
    for (std::size_t j = 0; j < k_; ++j) os << ',' << at(i, j);
    os << '\n';
  }
  return os.str();
}

ConfusionMatrix confusion_matrix(const nn::Network& net, const data::LabeledDataset& ds) {
  if (ds.empty()) throw ContractError("confusion matrix of an empty dataset");
  const auto predicted = nn::predict_labels(net, ds);
  return ConfusionMatrix::from_predictions(net.spec().num_classes, ds.labels(), predicted);
}

ConfusionMatrix confusion_matrix(const train::Checkpoint& ckpt, const data::LabeledDataset& ds) {
  return confusion_matrix(ckpt.network(), ds);
}

double evaluate_accuracy(const train::Checkpoint& ckpt, const data::LabeledDataset& ds) {
  if (ds.num_classes() != ckpt.arch.num_classes) {
    throw ContractError("dataset " + ds.name() + " has " + std::to_string(ds.num_classes()) +
                        " classes, model " + ckpt.arch.name + " predicts " +
                        std::to_string(ckpt.arch.num_classes));
  }
  return train::accuracy(ckpt.network(), ds);
}

RandomBaseline random_baseline(std::span<const std::size_t> train_counts,
                               std::span<const std::size_t> test_counts, std::size_t trials,
                               std::uint64_t seed) {
  if (train_counts.size() != test_counts.size() || train_counts.empty()) {
    throw DimensionError("random baseline: class count vectors differ in length");
  }
  const double n_train = std::accumulate(train_counts.begin(), train_counts.end(), 0.0);
  const double n_test = std::accumulate(test_counts.begin(), test_counts.end(), 0.0);
  if (n_train == 0.0 || n_test == 0.0) throw ContractError("random baseline of an empty split");

  RandomBaseline rb;
  rb.uniform = 1.0 / static_cast<double>(train_counts.size());
  for (std::size_t c = 0; c < train_counts.size(); ++c) {
    const double pt = static_cast<double>(test_counts[c]) / n_test;
    rb.closed_form += static_cast<double>(train_counts[c]) / n_train * pt;
    rb.test_frequency += pt * pt;
  }
  rb.trials = trials;
  if (trials == 0) return rb;

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> draw(train_counts.begin(), train_counts.end());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t correct = 0;
    for (std::size_t c = 0; c < test_counts.size(); ++c) {
      for (std::size_t i = 0; i < test_counts[c]; ++i) correct += draw(rng) == c;
    }
    const double acc = static_cast<double>(correct) / n_test;
    sum += acc;
    sum_sq += acc * acc;
  }
  const double t = static_cast<double>(trials);
  rb.monte_carlo = sum / t;
  if (trials > 1) {
    const double var = std::max(0.0, (sum_sq - t * rb.monte_carlo * rb.monte_carlo) / (t - 1.0));
    rb.standard_error = std::sqrt(var / t);
  }
  return rb;
}

RandomBaseline random_baseline(const data::LabeledDataset& train, const data::LabeledDataset& test,
                               std::size_t trials, std::uint64_t seed) {
  if (train.num_classes() != test.num_classes()) {
    throw ContractError("random baseline: train and test class counts differ");
  }
  const auto a = train.class_counts();
  const auto b = test.class_counts();
  return random_baseline(a, b, trials, seed);
}

}  // namespace negcnn::exp
