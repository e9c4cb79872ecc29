#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "negcnn/data/dataset.hpp"
#include "negcnn/nn/network.hpp"
#include "negcnn/train/checkpoint.hpp"
#include "negcnn/train/config.hpp"

namespace negcnn::train {

struct OptimizerState {
  std::vector<Tensor> velocity;
};

struct SgdParams {
  double learning_rate = 0.01;
  double momentum = 0.9;
};

// v <- momentum * v - lr * g;  p <- p + v, for every parameter.
// Lazily zero-initialises velocity. Throws NumericError naming the parameter
// when a gradient is not finite; parameters are untouched in that case.
void sgd_step(nn::Network& net, std::span<const Tensor> grads, OptimizerState& state,
              const SgdParams& params);

// Splits used during a run. Validation and test may be empty; the matching
// History columns are then NaN. The negative test split is the negation of `test`.
struct TrainingData {
  data::LabeledDataset train;
  data::LabeledDataset validation;
  data::LabeledDataset test;
};

struct TrainResult {
  Checkpoint final;
  // Epoch with the highest regular-validation accuracy (first on ties);
  // equals `final` when no validation split was provided.
  Checkpoint best;
};

// Called after each epoch with the new record.
using EpochObserver = std::function<void(const EpochRecord&)>;

// Training stopped because the loss or a gradient became non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, Checkpoint last_good)
      : std::runtime_error(what), last_good_(std::make_shared<Checkpoint>(std::move(last_good))) {}
  const Checkpoint& last_good() const { return *last_good_; }

 private:
  std::shared_ptr<Checkpoint> last_good_;
};

// Freshly initialised state for `spec` at epoch 0.
Checkpoint initial_checkpoint(const nn::ArchitectureSpec& spec, std::uint64_t seed);

// Shuffled mini-batch SGD from initialisation. `spec` must already be bound
// to the dataset's image shape and class count. With config.augment the
// training split is extended by augment_translate_reflect first.
TrainResult train(const nn::ArchitectureSpec& spec, const TrainingData& data,
                  const TrainingConfig& config, const EpochObserver& observer = {});

// Continues a run started by train() from its checkpoint up to config.epochs.
// With the same data and config this reproduces the uninterrupted run.
TrainResult resume(const Checkpoint& ckpt, const TrainingData& data, const TrainingConfig& config,
                   const EpochObserver& observer = {});

// Continues training every layer on `data.train` only, for config.epochs
// more epochs, with fresh momentum. History is appended. An empty training
// split returns the checkpoint unchanged.
TrainResult fine_tune(const Checkpoint& ckpt, const TrainingData& data,
                      const TrainingConfig& config, const EpochObserver& observer = {});

// Fraction of correctly classified images; ContractError on an empty set.
double accuracy(const nn::Network& net, const data::LabeledDataset& ds);

}  // namespace negcnn::train
