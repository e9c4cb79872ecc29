#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "negcnn/exp/drivers.hpp"
#include "negcnn/train/config.hpp"

namespace negcnn::cli {

// Every setting a command can read. Values come from defaults, then a JSON
// config file, then command-line flags.
//
// Config file keys (all optional):
//   dataset, architecture, suite, data_dir, work_dir, output_dir, cache,
//   seeds, n_grid, trials,
//   learning_rate, momentum, batch_size, epochs, lr_decay_factor,
//   lr_decay_epochs, shuffle, augment, augment_shift,
//   augment_translations, augment_reflection
// `n_grid` entries are positive integers or "full".
struct ExperimentConfig {
  std::string dataset = "MNIST";
  std::string architecture;  // empty: LeNet-5 for MNIST, MVGG-8 otherwise
  std::string suite = "mnist";
  std::string data_dir = "data";
  std::string work_dir = "work";
  std::string output_dir = "out";
  std::string cache;  // explicit dataset cache file; empty uses work_dir
  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::size_t> n_grid = exp::default_n_grid();
  std::size_t trials = 1000;
  exp::ConfigOverrides training;
  bool augment = false;
  std::optional<std::uint32_t> augment_shift;
  std::optional<bool> augment_translations;
  std::optional<bool> augment_reflection;

  std::string resolved_architecture() const;
  // Full TrainingConfig for `seed`, validated.
  train::TrainingConfig training_config(std::uint64_t seed) const;
  exp::ExperimentEnv env() const;
};

// Applies the keys of a JSON object. Unknown keys and badly typed values are
// collected and reported together in one ConfigError.
void apply_json(ExperimentConfig& config, const std::string& json_text, const std::string& origin);
void apply_json_file(ExperimentConfig& config, const std::string& path);

// Canonical JSON of the whole config (for manifests).
std::string to_json(const ExperimentConfig& config);

std::vector<std::size_t> parse_n_grid(const std::vector<std::string>& items);

}  // namespace negcnn::cli
