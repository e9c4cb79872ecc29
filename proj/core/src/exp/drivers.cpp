#include "negcnn/exp/drivers.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "negcnn/binary_io.hpp"
#include "negcnn/data/cache.hpp"
#include "negcnn/data/parsers.hpp"
#include "negcnn/data/transforms.hpp"
#include "negcnn/errors.hpp"
#include "negcnn/exec_mode.hpp"
#include "negcnn/train/checkpoint.hpp"

namespace negcnn::exp {

namespace fs = std::filesystem;

namespace {

void say(const ExperimentEnv& env, const std::string& msg) {
  if (env.log) env.log(msg);
}

std::string hex8(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::string pct(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::uint32_t crc_text(std::string_view text, std::uint32_t prev) {
  return io::crc32(std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
                   prev);
}

std::uint32_t crc_dataset(const data::LabeledDataset& ds, std::uint32_t prev) {
  const auto px = ds.pixels();
  const auto lb = ds.labels();
  prev = crc_text(shape_to_string(ds.image_shape()) + "/" + std::to_string(ds.num_classes()), prev);
  prev = io::crc32(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(px.data()),
                                                 px.size_bytes()),
                   prev);
  return io::crc32(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(lb.data()),
                                                 lb.size_bytes()),
                   prev);
}

std::string file_token(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-') c = '-';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

const data::LabeledDataset& nonempty(const data::LabeledDataset& ds, const std::string& what) {
  if (ds.empty()) throw ContractError(what + " split is empty");
  return ds;
}

// Trains (or loads) a run on explicit splits. `stem` must identify
// everything except the data and config, which are hashed into the key.
struct CachedRun {
  train::Checkpoint best;
  train::Checkpoint final;
  std::string stem;
};

CachedRun run_cached(const ExperimentEnv& env, const std::string& stem_prefix,
                     const std::function<train::TrainResult()>& run,
                     const train::TrainingData& data, const std::string& identity) {
  std::uint32_t key = crc_text(identity, 0);
  key = crc_text(to_string(exec_mode()), key);
  key = crc_dataset(data.train, key);
  key = crc_dataset(data.validation, key);
  key = crc_dataset(data.test, key);
  const std::string stem = stem_prefix + "-" + hex8(key);

  fs::path dir;
  if (!env.work_dir.empty()) {
    dir = fs::path(env.work_dir) / "checkpoints";
    const fs::path best = dir / (stem + ".best.nckp");
    const fs::path final = dir / (stem + ".final.nckp");
    if (fs::exists(best) && fs::exists(final)) {
      try {
        CachedRun cached{train::load_checkpoint(best.string()),
                         train::load_checkpoint(final.string()), stem};
        say(env, "reusing " + stem);
        return cached;
      } catch (const FormatError& e) {
        say(env, std::string("ignoring unreadable cached checkpoint: ") + e.what());
      }
    }
  }
  say(env, "training " + stem);
  auto result = run();
  if (!dir.empty()) {
    train::save_checkpoint(result.best, (dir / (stem + ".best.nckp")).string());
    train::save_checkpoint(result.final, (dir / (stem + ".final.nckp")).string());
  }
  return {std::move(result.best), std::move(result.final), stem};
}

train::EpochObserver epoch_logger(const ExperimentEnv& env, const std::string& label) {
  if (!env.log) return {};
  return [&env, label](const train::EpochRecord& r) {
    std::ostringstream os;
    os << label << " epoch " << r.epoch << " lr " << r.learning_rate << " loss " << r.train_loss
       << " val " << pct(r.validation_accuracy) << " test " << pct(r.test_accuracy) << " neg "
       << pct(r.negative_test_accuracy);
    env.log(os.str());
  };
}

nn::ArchitectureSpec bound_spec(const std::string& arch, const data::DatasetBundle& bundle) {
  const auto& shape = bundle.train.image_shape();
  return nn::resolve_architecture(arch).bind(shape, bundle.train.num_classes());
}

std::string dataset_label(const RunSpec& run) {
  return run.augment ? run.dataset + " with data augmentation" : run.dataset;
}

}  // namespace

train::TrainingConfig ConfigOverrides::apply(train::TrainingConfig c) const {
  if (learning_rate) c.learning_rate = *learning_rate;
  if (momentum) c.momentum = *momentum;
  if (batch_size) c.batch_size = *batch_size;
  if (epochs) c.epochs = *epochs;
  if (lr_decay_factor) c.lr_decay_factor = *lr_decay_factor;
  if (lr_decay_epochs) c.lr_decay_epochs = *lr_decay_epochs;
  if (shuffle) c.shuffle = *shuffle;
  return c;
}

train::TrainingConfig ConfigOverrides::for_dataset(const std::string& card, std::uint64_t seed,
                                                   bool augment) const {
  auto c = apply(train::default_config_for(card));
  c.seed = seed;
  c.augment = augment;
  c.validate();
  return c;
}

std::string corpus_directory(const ExperimentEnv& env, const std::string& card) {
  const auto& name = data::dataset_card(card).name;
  const fs::path root(env.data_dir);
  if (name == "MNIST") return (root / "mnist").string();
  if (name == "CIFAR-10") return (root / "cifar-10").string();
  return (root / "gtsrb").string();
}

namespace {

fs::path cache_path(const ExperimentEnv& env, const std::string& card_name) {
  return fs::path(env.work_dir) / "cache" / (file_token(card_name) + ".ncds");
}

}  // namespace

bool dataset_available(const ExperimentEnv& env, const std::string& card) {
  const auto& name = data::dataset_card(card).name;
  if (!env.work_dir.empty() && fs::exists(cache_path(env, name))) return true;
  const fs::path dir = corpus_directory(env, name);
  if (name == "MNIST") {
    for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                          "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"}) {
      if (!fs::is_regular_file(dir / f)) return false;
    }
    return true;
  }
  if (name == "CIFAR-10") {
    for (const char* f : {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                          "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"}) {
      if (!fs::is_regular_file(dir / f)) return false;
    }
    return true;
  }
  if (!env.work_dir.empty() && fs::exists(cache_path(env, "GTSRB-color"))) return true;
  return (fs::is_directory(dir / "Final_Training" / "Images") || fs::is_directory(dir / "train")) &&
         (fs::is_directory(dir / "Final_Test" / "Images") || fs::is_directory(dir / "test"));
}

data::DatasetBundle load_dataset(const ExperimentEnv& env, const std::string& card) {
  const auto& name = data::dataset_card(card).name;
  const bool cached = !env.work_dir.empty();
  if (cached && fs::exists(cache_path(env, name))) {
    say(env, "loading cached " + name);
    return data::load_bundle(cache_path(env, name).string());
  }
  data::DatasetBundle bundle;
  if (name == "GTSRB-gray") {
    const auto color = load_dataset(env, "GTSRB-color");
    bundle = {name, data::to_grayscale(color.train).renamed(name, data::Split::kTrain),
              data::to_grayscale(color.validation).renamed(name, data::Split::kValidation),
              data::to_grayscale(color.test).renamed(name, data::Split::kTest)};
  } else {
    say(env, "ingesting " + name + " from " + corpus_directory(env, name));
    bundle = data::load_corpus(name, corpus_directory(env, name));
  }
  if (cached) data::save_bundle(bundle, cache_path(env, name).string());
  return bundle;
}

TrainedModel train_cached(const ExperimentEnv& env, const std::string& experiment,
                          const nn::ArchitectureSpec& arch, const data::DatasetBundle& bundle,
                          const train::TrainingConfig& config) {
  const train::TrainingData data{nonempty(bundle.train, "training"), bundle.validation, bundle.test};
  const std::string stem = file_token(experiment) + "-" + file_token(bundle.name) + "-" +
                           file_token(arch.name) + "-s" + std::to_string(config.seed);
  const std::string label = arch.name + "/" + bundle.name + " seed " + std::to_string(config.seed) +
                            (config.augment ? " aug" : "");
  auto run = run_cached(
      env, stem, [&] { return train::train(arch, data, config, epoch_logger(env, label)); }, data,
      "train\n" + arch.to_text() + config.to_text());
  return {std::move(run.best), std::move(run.final), std::move(run.stem)};
}

AccuracyReport make_report(const TrainedModel& model, const std::string& dataset, bool augmented,
                           const train::TrainingConfig& config) {
  const auto& best = model.best.history.back();
  const auto& last = model.final.history.back();
  AccuracyReport r;
  r.classifier = model.final.arch.name;
  r.dataset = dataset;
  r.augmented = augmented;
  r.seed = config.seed;
  r.config_fingerprint = config.fingerprint();
  r.best_epoch = best.epoch;
  r.accuracy_regular = best.test_accuracy;
  r.accuracy_negative = best.negative_test_accuracy;
  r.final_epoch = last.epoch;
  r.final_accuracy_regular = last.test_accuracy;
  r.final_accuracy_negative = last.negative_test_accuracy;
  return r;
}

std::vector<RunSpec> table2_suite(const std::string& name) {
  const std::vector<RunSpec> mnist = {{"LeNet-5", "MNIST", false}};
  const std::vector<RunSpec> mnist_aug = {{"LeNet-5", "MNIST", true}};
  std::vector<RunSpec> depth;
  for (const char* a : {"MVGG-5", "MVGG-6", "MVGG-7", "MVGG-8", "MVGG-9"}) {
    depth.push_back({a, "CIFAR-10", false});
  }
  const std::vector<RunSpec> gtsrb = {{"MVGG-8", "GTSRB-color", false},
                                      {"MVGG-8", "GTSRB-gray", false}};
  if (name == "mnist") return mnist;
  if (name == "mnist-aug") return mnist_aug;
  if (name == "cifar-depth") return depth;
  if (name == "gtsrb") return gtsrb;
  if (name == "all") {
    std::vector<RunSpec> all = mnist;
    all.insert(all.end(), mnist_aug.begin(), mnist_aug.end());
    all.insert(all.end(), depth.begin(), depth.end());
    all.insert(all.end(), gtsrb.begin(), gtsrb.end());
    return all;
  }
  throw ConfigError("unknown suite '" + name +
                    "' (expected mnist, mnist-aug, cifar-depth, gtsrb or all)");
}

ExperimentReport run_table2(const ExperimentEnv& env, const std::vector<RunSpec>& runs,
                            const ConfigOverrides& overrides,
                            const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  ExperimentReport report;
  report.kind = "table2";
  std::string loaded_name;
  data::DatasetBundle bundle;
  for (const auto& run : runs) {
    if (loaded_name != data::dataset_card(run.dataset).name) {
      bundle = load_dataset(env, run.dataset);
      loaded_name = bundle.name;
    }
    const auto spec = bound_spec(run.architecture, bundle);
    for (std::uint64_t seed : seeds) {
      const auto config = overrides.for_dataset(run.dataset, seed, run.augment);
      const auto model = train_cached(env, "table2", spec, bundle, config);
      auto r = make_report(model, dataset_label(run), run.augment, config);
      say(env, r.classifier + " " + r.dataset + " seed " + std::to_string(seed) + ": regular " +
                   pct(r.accuracy_regular) + ", negative " + pct(r.accuracy_negative));
      report.accuracies.push_back(std::move(r));
      report.curves.push_back(CurveSeries::from_history(
          spec.name + "/" + dataset_label(run) + "/seed" + std::to_string(seed),
          model.final.history));
    }
  }
  return report;
}

ExperimentReport run_confusion(const ExperimentEnv& env, const RunSpec& run,
                               const ConfigOverrides& overrides, std::uint64_t seed) {
  const auto bundle = load_dataset(env, run.dataset);
  const auto spec = bound_spec(run.architecture, bundle);
  const auto config = overrides.for_dataset(run.dataset, seed, run.augment);
  const auto model = train_cached(env, "table2", spec, bundle, config);
  const auto net = model.best.network();

  ExperimentReport report;
  report.kind = "confusion";
  report.accuracies.push_back(make_report(model, dataset_label(run), run.augment, config));
  report.confusions.push_back({"regular", confusion_matrix(net, bundle.test)});
  report.confusions.push_back({"negative", confusion_matrix(net, data::negate(bundle.test))});
  const auto top = report.confusions.back().matrix.top_predicted(3);
  std::ostringstream os;
  os << "negative-test predictions concentrate on classes";
  for (std::size_t c : top) os << ' ' << c;
  report.notes.push_back(os.str());
  return report;
}

ExperimentReport run_curves(const ExperimentEnv& env, const RunSpec& run,
                            const ConfigOverrides& overrides, std::uint64_t seed) {
  auto report = run_table2(env, {run}, overrides, {seed});
  report.kind = "curves";
  return report;
}

ExperimentReport run_augmentation_study(const ExperimentEnv& env, const ConfigOverrides& overrides,
                                        const std::vector<std::uint64_t>& seeds,
                                        const data::AugmentOptions& augment) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  const auto bundle = load_dataset(env, "MNIST");
  const auto spec = bound_spec("LeNet-5", bundle);
  ExperimentReport report;
  report.kind = "augmentation";
  for (bool aug : {false, true}) {
    for (std::uint64_t seed : seeds) {
      auto config = overrides.for_dataset("MNIST", seed, aug);
      if (aug) {
        config.augment_shift = static_cast<std::uint32_t>(augment.shift);
        config.augment_translations = augment.translations;
        config.augment_reflection = augment.reflection;
        config.validate();
      }
      const auto model = train_cached(env, "table2", spec, bundle, config);
      const RunSpec run{"LeNet-5", "MNIST", aug};
      report.accuracies.push_back(make_report(model, dataset_label(run), aug, config));
      report.curves.push_back(CurveSeries::from_history(
          spec.name + "/" + dataset_label(run) + "/seed" + std::to_string(seed),
          model.final.history));
    }
  }
  double mean[2][2] = {{0, 0}, {0, 0}};
  for (const auto& r : report.accuracies) {
    mean[r.augmented][0] += r.accuracy_regular / static_cast<double>(seeds.size());
    mean[r.augmented][1] += r.accuracy_negative / static_cast<double>(seeds.size());
  }
  report.notes.push_back("mean without augmentation: regular " + pct(mean[0][0]) + ", negative " +
                         pct(mean[0][1]));
  report.notes.push_back("mean with augmentation: regular " + pct(mean[1][0]) + ", negative " +
                         pct(mean[1][1]));
  return report;
}

std::vector<std::size_t> default_n_grid() { return {100, 500, 1000, 5000, 10000, kFullTrainingSet}; }

ExperimentReport run_finetune_vs_scratch(const ExperimentEnv& env, const RunSpec& base,
                                         const std::vector<std::size_t>& n_grid,
                                         const ConfigOverrides& overrides,
                                         const std::vector<std::uint64_t>& seeds, Arms arms) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (n_grid.empty()) throw ConfigError("n_grid must not be empty");
  const auto bundle = load_dataset(env, base.dataset);
  const auto spec = bound_spec(base.architecture, bundle);
  ExperimentReport report;
  report.kind = arms == Arms::kFinetune ? "finetune" : arms == Arms::kScratch ? "scratch"
                                                                              : "finetune-vs-scratch";

  for (std::uint64_t seed : seeds) {
    const auto config = overrides.for_dataset(base.dataset, seed, base.augment);
    std::optional<TrainedModel> regular;
    if (arms != Arms::kScratch) {
      regular = train_cached(env, "table2", spec, bundle, config);
      report.accuracies.push_back(make_report(*regular, dataset_label(base), base.augment, config));
    }
    for (std::size_t n_req : n_grid) {
      const std::size_t n = std::min(n_req, bundle.train.size());
      // No validation split: these arms report their last epoch.
      const train::TrainingData data{data::take_negative_subset(bundle.train, n, seed),
                                     data::LabeledDataset::empty_like(bundle.validation),
                                     bundle.test};
      const std::string tag = "n" + std::to_string(n) + "-s" + std::to_string(seed);
      auto record = [&](const std::string& arm, const train::Checkpoint& ckpt) {
        const auto& last = ckpt.history.back();
        report.negative_training.push_back(
            {arm, n, seed, last.test_accuracy, last.negative_test_accuracy});
        say(env, arm + " n=" + std::to_string(n) + " seed " + std::to_string(seed) + ": regular " +
                     pct(last.test_accuracy) + ", negative " + pct(last.negative_test_accuracy));
      };
      if (arms != Arms::kScratch) {
        const std::string stem = "finetune-" + file_token(bundle.name) + "-" +
                                 file_token(spec.name) + "-" + tag;
        const auto run = run_cached(
            env, stem,
            [&] {
              return train::fine_tune(regular->best, data, config,
                                      epoch_logger(env, "finetune " + tag));
            },
            data, "finetune\n" + regular->stem + "\n" + config.to_text());
        record("finetune", run.final);
      }
      if (arms != Arms::kFinetune) {
        const std::string stem = "scratch-" + file_token(bundle.name) + "-" +
                                 file_token(spec.name) + "-" + tag;
        const auto run = run_cached(
            env, stem,
            [&] { return train::train(spec, data, config, epoch_logger(env, "scratch " + tag)); },
            data, "scratch\n" + spec.to_text() + config.to_text());
        record("scratch", run.final);
      }
    }
  }
  return report;
}

ExperimentReport run_baseline(const ExperimentEnv& env, const std::string& dataset,
                              std::size_t trials, std::uint64_t seed) {
  const auto bundle = load_dataset(env, dataset);
  ExperimentReport report;
  report.kind = "baseline";
  // Train frequencies come from the full training pool, before the
  // validation hold-out, as a label-frequency classifier would see it.
  const auto pool = data::concatenate(bundle.train, bundle.validation);
  report.baseline = random_baseline(pool, bundle.test, trials, seed);
  report.notes.push_back("closed form " + pct(report.baseline->closed_form) + ", test-frequency " +
                         pct(report.baseline->test_frequency) + ", uniform " +
                         pct(report.baseline->uniform));
  return report;
}

}  // namespace negcnn::exp
