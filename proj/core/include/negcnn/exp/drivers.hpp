#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "negcnn/data/dataset.hpp"
#include "negcnn/data/transforms.hpp"
#include "negcnn/exp/reports.hpp"
#include "negcnn/nn/architecture.hpp"
#include "negcnn/train/trainer.hpp"

namespace negcnn::exp {

// Where corpora live and where derived artifacts are cached.
//   data_dir/mnist     IDX files
//   data_dir/cifar-10  binary batches
//   data_dir/gtsrb     Final_Training/Images, Final_Test/Images
// work_dir holds dataset caches and trained checkpoints keyed by everything
// that determines them; an empty work_dir disables caching.
struct ExperimentEnv {
  std::string data_dir;
  std::string work_dir;
  std::function<void(const std::string&)> log;
};

// Training fields set explicitly by the user; unset fields keep the
// per-dataset defaults.
struct ConfigOverrides {
  std::optional<double> learning_rate;
  std::optional<double> momentum;
  std::optional<std::uint32_t> batch_size;
  std::optional<std::uint32_t> epochs;
  std::optional<double> lr_decay_factor;
  std::optional<std::vector<std::uint32_t>> lr_decay_epochs;
  std::optional<bool> shuffle;

  train::TrainingConfig apply(train::TrainingConfig config) const;
  train::TrainingConfig for_dataset(const std::string& card, std::uint64_t seed,
                                    bool augment = false) const;
};

std::string corpus_directory(const ExperimentEnv& env, const std::string& card);
// True when every source file the corpus loader needs exists.
bool dataset_available(const ExperimentEnv& env, const std::string& card);
// Loads a corpus (GTSRB-gray is derived from GTSRB-color), reusing
// work_dir/cache/<card>.ncds when present and writing it otherwise.
data::DatasetBundle load_dataset(const ExperimentEnv& env, const std::string& card);

struct TrainedModel {
  train::Checkpoint best;
  train::Checkpoint final;
  std::string stem;  // file stem under work_dir/checkpoints
};

// Trains `arch` on the bundle's splits, or loads the identical earlier run.
TrainedModel train_cached(const ExperimentEnv& env, const std::string& experiment,
                          const nn::ArchitectureSpec& arch, const data::DatasetBundle& bundle,
                          const train::TrainingConfig& config);

AccuracyReport make_report(const TrainedModel& model, const std::string& dataset, bool augmented,
                           const train::TrainingConfig& config);

struct RunSpec {
  std::string architecture;
  std::string dataset;
  bool augment = false;
};

// Named suites: mnist, mnist-aug, cifar-depth, gtsrb, all.
std::vector<RunSpec> table2_suite(const std::string& name);

ExperimentReport run_table2(const ExperimentEnv& env, const std::vector<RunSpec>& runs,
                            const ConfigOverrides& overrides, const std::vector<std::uint64_t>& seeds);

// Regular and negative test confusion matrices of one trained model.
ExperimentReport run_confusion(const ExperimentEnv& env, const RunSpec& run,
                               const ConfigOverrides& overrides, std::uint64_t seed);

ExperimentReport run_curves(const ExperimentEnv& env, const RunSpec& run,
                            const ConfigOverrides& overrides, std::uint64_t seed);

// LeNet-5 on MNIST with and without augmentation, one report per arm and seed.
ExperimentReport run_augmentation_study(const ExperimentEnv& env, const ConfigOverrides& overrides,
                                        const std::vector<std::uint64_t>& seeds,
                                        const data::AugmentOptions& augment = {});

// Grid value standing for the whole training split.
inline constexpr std::size_t kFullTrainingSet = std::numeric_limits<std::size_t>::max();
std::vector<std::size_t> default_n_grid();

enum class Arms { kBoth, kFinetune, kScratch };

// For every n and seed: fine-tune the regular-trained model on n negated
// training images, and/or train a fresh model on them. Both arms reuse the
// regular run's hyperparameters and report their final epoch.
ExperimentReport run_finetune_vs_scratch(const ExperimentEnv& env, const RunSpec& base,
                                         const std::vector<std::size_t>& n_grid,
                                         const ConfigOverrides& overrides,
                                         const std::vector<std::uint64_t>& seeds,
                                         Arms arms = Arms::kBoth);

ExperimentReport run_baseline(const ExperimentEnv& env, const std::string& dataset,
                              std::size_t trials, std::uint64_t seed);

}  // namespace negcnn::exp
