#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace negcnn::train {

// Every optimisation hyperparameter of a run. Defaults are plain SGD with
// momentum 0.9, batch 64, lr 0.01.
struct TrainingConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint32_t batch_size = 64;
  std::uint32_t epochs = 15;
  double lr_decay_factor = 0.1;
  std::vector<std::uint32_t> lr_decay_epochs;  // 0-based epochs at which lr is multiplied
  std::uint64_t seed = 1;
  bool shuffle = true;
  bool augment = false;
  // Used only when augment is set.
  std::uint32_t augment_shift = 2;
  bool augment_translations = true;
  bool augment_reflection = true;

  // Throws ConfigError listing every violated constraint.
  void validate() const;
  // Learning rate in effect during 0-based epoch `epoch` of a run.
  double learning_rate_at(std::uint32_t epoch) const;
  // Canonical `key = value` lines; equal configs give equal text.
  std::string to_text() const;
  // CRC-32 of to_text(), as 8 hex digits.
  std::string fingerprint() const;

  bool operator==(const TrainingConfig&) const = default;
};

// MNIST: 15 epochs, no decay. CIFAR-10 / GTSRB: 60 epochs, x0.1 at 30 and 45.
TrainingConfig default_config_for(const std::string& dataset_card);

}  // namespace negcnn::train
