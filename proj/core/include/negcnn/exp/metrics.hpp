#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "negcnn/data/dataset.hpp"
#include "negcnn/nn/network.hpp"
#include "negcnn/train/checkpoint.hpp"

namespace negcnn::exp {

// Row-stochastic K x K matrix: entry (i, j) is the fraction of class-i images
// predicted as class j.
class ConfusionMatrix {
 public:
  // Throws ContractError naming the first class with no images.
  static ConfusionMatrix from_predictions(std::size_t num_classes,
                                          std::span<const std::int32_t> truth,
                                          std::span<const std::int32_t> predicted);

  std::size_t num_classes() const noexcept { return k_; }
  double at(std::size_t i, std::size_t j) const { return probs_.at(i * k_ + j); }
  std::size_t count(std::size_t i, std::size_t j) const { return counts_.at(i * k_ + j); }
  std::size_t support(std::size_t i) const { return support_.at(i); }
  std::size_t total() const noexcept;

  // Support-weighted recall, i.e. plain accuracy.
  double accuracy() const;
  // trace / K.
  double macro_recall() const;
  // Column sums of the row-normalized matrix divided by K.
  std::vector<double> predicted_mass() const;
  // Columns ordered by predicted_mass, largest first (ties: lower index).
  std::vector<std::size_t> top_predicted(std::size_t n) const;
  double mass_in(std::span<const std::size_t> columns) const;

  // K rows of K probabilities with a "true\predicted" header row.
  std::string to_csv() const;

 private:
  std::size_t k_ = 0;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> support_;
  std::vector<double> probs_;
};

ConfusionMatrix confusion_matrix(const nn::Network& net, const data::LabeledDataset& ds);
ConfusionMatrix confusion_matrix(const train::Checkpoint& ckpt, const data::LabeledDataset& ds);

// ContractError when the dataset is empty or its class count differs from
// the checkpoint's.
double evaluate_accuracy(const train::Checkpoint& ckpt, const data::LabeledDataset& ds);

struct RandomBaseline {
  double closed_form = 0.0;      // sum_c p_train(c) * p_test(c)
  double test_frequency = 0.0;   // sum_c p_test(c)^2
  double uniform = 0.0;          // 1 / K
  double monte_carlo = 0.0;      // mean over trials
  double standard_error = 0.0;
  std::size_t trials = 0;
};

// Accuracy of a classifier that draws each prediction independently from
// the training-split class frequencies. Monte Carlo trials each label the
// whole test split.
RandomBaseline random_baseline(const data::LabeledDataset& train, const data::LabeledDataset& test,
                               std::size_t trials, std::uint64_t seed);
// Same from class counts alone.
RandomBaseline random_baseline(std::span<const std::size_t> train_counts,
                               std::span<const std::size_t> test_counts, std::size_t trials,
                               std::uint64_t seed);

}  // namespace negcnn::exp
