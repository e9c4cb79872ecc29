#include "cli/commands.hpp"

#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "cli/config.hpp"
#include "json.hpp"
#include "negcnn/binary_io.hpp"
#include "negcnn/data/cache.hpp"
#include "negcnn/data/parsers.hpp"
#include "negcnn/data/raster.hpp"
#include "negcnn/data/transforms.hpp"
#include "negcnn/errors.hpp"
#include "negcnn/exec_mode.hpp"
#include "negcnn/exp/drivers.hpp"
#include "negcnn/train/trainer.hpp"

#ifndef NEGCNN_VERSION
#define NEGCNN_VERSION "unknown"
#endif

namespace negcnn::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string token(std::string s) {
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-') c = '-';
  }
  return s;
}

std::string seed_token(const std::vector<std::uint64_t>& seeds) {
  std::string s = "s";
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "_" : "") + std::to_string(seeds[i]);
  return s;
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v << '%';
  return os.str();
}

void require_path(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

// Files written by one command. Each write is read back and compared;
// unless commit() is reached, everything written so far is removed.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  Outputs(const Outputs&) = delete;
  Outputs& operator=(const Outputs&) = delete;
  ~Outputs() {
    if (committed_) return;
    for (const auto& p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

  std::string write(const std::string& name, std::span<const std::uint8_t> bytes) {
    const fs::path p = dir_ / name;
    written_.push_back(p);
    io::write_file_atomic(p.string(), bytes);
    const auto back = io::read_file(p.string());
    if (!std::equal(back.begin(), back.end(), bytes.begin(), bytes.end())) {
      throw std::runtime_error("verification of " + p.string() + " failed");
    }
    return p.string();
  }
  std::string write(const std::string& name, std::string_view text) {
    return write(name, std::span<const std::uint8_t>(
                           reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& p : written_) out.push_back(p.string());
    return out;
  }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

ordered_json manifest(const std::string& command, const ExperimentConfig& cfg,
                      std::uint64_t seed, const std::vector<std::string>& outputs) {
  ordered_json j;
  j["command"] = command;
  j["config"] = ordered_json::parse(to_json(cfg));
  j["config_fingerprint"] = cfg.training_config(seed).fingerprint();
  j["seed"] = seed;
  j["versions"] = {{"negcnn", NEGCNN_VERSION},
                   {"compiler", __VERSION__},
                   {"exec_mode", to_string(exec_mode())}};
  j["outputs"] = outputs;
  return j;
}

// Flags shared by every command that reads an ExperimentConfig. Each one
// overrides the config file only when given.
class ConfigFlags {
 public:
  void attach(CLI::App& app) {
    app.add_option("-c,--config", config_path_, "JSON config file")->check(CLI::ExistingFile);
    add<std::string>(app, "--dataset", "MNIST, CIFAR-10, GTSRB-color or GTSRB-gray",
                     [](auto& c, auto& v) { c.dataset = v; });
    add<std::string>(app, "--arch", "bundled architecture name or .arch file",
                     [](auto& c, auto& v) { c.architecture = v; });
    add<std::string>(app, "--suite", "table2 suite", [](auto& c, auto& v) { c.suite = v; });
    add<std::string>(app, "--data-dir", "corpus root", [](auto& c, auto& v) { c.data_dir = v; });
    add<std::string>(app, "--work-dir", "cache and checkpoint directory",
                     [](auto& c, auto& v) { c.work_dir = v; });
    add<std::string>(app, "-o,--output-dir", "output directory",
                     [](auto& c, auto& v) { c.output_dir = v; });
    add<std::string>(app, "--cache", "dataset cache file", [](auto& c, auto& v) { c.cache = v; });
    add<std::vector<std::uint64_t>>(app, "--seed", "seed (repeatable)",
                                    [](auto& c, auto& v) { c.seeds = v; });
    add<std::vector<std::string>>(app, "--n-grid", "negative training set sizes or 'full'",
                                  [](auto& c, auto& v) { c.n_grid = parse_n_grid(v); });
    add<std::size_t>(app, "--trials", "Monte Carlo trials", [](auto& c, auto& v) { c.trials = v; });
    add<double>(app, "--lr", "learning rate", [](auto& c, auto& v) { c.training.learning_rate = v; });
    add<double>(app, "--momentum", "momentum", [](auto& c, auto& v) { c.training.momentum = v; });
    add<std::uint32_t>(app, "--batch-size", "mini-batch size",
                       [](auto& c, auto& v) { c.training.batch_size = v; });
    add<std::uint32_t>(app, "--epochs", "epochs", [](auto& c, auto& v) { c.training.epochs = v; });
    add<double>(app, "--lr-decay-factor", "learning rate decay factor",
                [](auto& c, auto& v) { c.training.lr_decay_factor = v; });
    add<std::vector<std::uint32_t>>(app, "--lr-decay-epochs", "epochs at which the rate decays",
                                    [](auto& c, auto& v) { c.training.lr_decay_epochs = v; });
    add<bool>(app, "--shuffle", "shuffle each epoch (true/false)",
              [](auto& c, auto& v) { c.training.shuffle = v; });
    add<bool>(app, "--augment", "translate/reflect augmentation (true/false)",
              [](auto& c, auto& v) { c.augment = v; });
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path_.empty()) apply_json_file(cfg, config_path_);
    for (const auto& f : appliers_) f(cfg);
    if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
    (void)data::dataset_card(cfg.dataset);
    (void)cfg.training_config(cfg.seeds.front());
    return cfg;
  }

 private:
  template <typename T>
  void add(CLI::App& app, const std::string& name, const std::string& desc,
           std::function<void(ExperimentConfig&, const T&)> set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app.add_option(name, *value, desc);
    appliers_.push_back([opt, value, set](ExperimentConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
  }

  std::string config_path_;
  std::vector<std::function<void(ExperimentConfig&)>> appliers_;
};

data::DatasetBundle load_bundle_for(const ExperimentConfig& cfg, exp::ExperimentEnv& env) {
  if (!cfg.cache.empty()) {
    require_path(cfg.cache, "dataset cache");
    return data::load_bundle(cfg.cache);
  }
  if (!exp::dataset_available(env, cfg.dataset)) {
    throw UsageError(data::dataset_card(cfg.dataset).name + " source files not found under " +
                     exp::corpus_directory(env, cfg.dataset));
  }
  return exp::load_dataset(env, cfg.dataset);
}

void print_histogram(std::ostream& out, const data::LabeledDataset& ds) {
  out << "  " << std::left << std::setw(10) << data::to_string(ds.split()) << std::right
      << std::setw(7) << ds.size() << "  classes:";
  for (std::size_t c : ds.class_counts()) out << ' ' << c;
  out << '\n';
}

int cmd_ingest(const std::string& dataset, const std::string& source, std::string cache,
               std::ostream& out, std::ostream& err) {
  const auto& card = data::dataset_card(dataset);
  require_path(source, "source directory");
  if (cache.empty()) cache = (fs::path("work") / "cache" / (token(card.name) + ".ncds")).string();
  err << "ingesting " << card.name << " from " << source << '\n';
  const auto bundle = data::load_corpus(card.name, source);
  data::save_bundle(bundle, cache);
  try {
    (void)data::load_bundle(cache);
  } catch (...) {
    std::error_code ec;
    fs::remove(cache, ec);
    throw;
  }
  out << card.name << " " << bundle.train.size() << "/" << bundle.validation.size() << "/"
      << bundle.test.size() << " train/validation/test, image "
      << shape_to_string(bundle.train.image_shape()) << '\n';
  for (auto s : {data::Split::kTrain, data::Split::kValidation, data::Split::kTest}) {
    print_histogram(out, bundle.split(s));
  }
  out << "cache " << cache << '\n';
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  auto env = cfg.env();
  env.log = [&err](const std::string& m) { err << m << '\n'; };
  const auto bundle = load_bundle_for(cfg, env);
  const auto spec = nn::resolve_architecture(cfg.resolved_architecture())
                        .bind(bundle.train.image_shape(), bundle.train.num_classes());
  Outputs outputs(cfg.output_dir);
  for (std::uint64_t seed : cfg.seeds) {
    const auto tc = cfg.training_config(seed);
    const train::TrainingData data{bundle.train, bundle.validation, bundle.test};
    const auto result = train::train(spec, data, tc, [&](const train::EpochRecord& r) {
      err << spec.name << " epoch " << r.epoch << " loss " << r.train_loss << " val "
          << pct(r.validation_accuracy) << " test " << pct(r.test_accuracy) << " neg "
          << pct(r.negative_test_accuracy) << '\n';
    });
    const std::string stem = "train-" + token(bundle.name) + "-" + token(spec.name) + "-s" +
                             std::to_string(seed);
    std::vector<std::string> files;
    files.push_back(outputs.write(stem + ".final.nckp", train::serialize_checkpoint(result.final)));
    files.push_back(outputs.write(stem + ".best.nckp", train::serialize_checkpoint(result.best)));
    files.push_back(outputs.write(stem + ".history.csv", result.final.history.to_csv()));
    auto m = manifest("train", cfg, seed, files);
    m["best_epoch"] = result.best.epoch;
    outputs.write(stem + ".manifest.json", m.dump(2) + "\n");
    const auto& best = result.best.history.back();
    out << spec.name << " " << bundle.name << " seed " << seed << ": best epoch " << best.epoch
        << " regular " << pct(best.test_accuracy) << " negative "
        << pct(best.negative_test_accuracy) << '\n';
  }
  outputs.commit();
  for (const auto& f : outputs.names()) out << "wrote " << f << '\n';
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint, const std::string& split,
             std::ostream& out) {
  require_path(checkpoint, "checkpoint");
  const auto ckpt = train::load_checkpoint(checkpoint);
  auto env = cfg.env();
  const auto bundle = load_bundle_for(cfg, env);
  const auto& ds = bundle.split(data::split_from_string(split));
  const double regular = exp::evaluate_accuracy(ckpt, ds);
  const double negative = exp::evaluate_accuracy(ckpt, data::negate(ds));

  ordered_json j = {{"checkpoint", checkpoint},
                    {"classifier", ckpt.arch.name},
                    {"dataset", bundle.name},
                    {"split", split},
                    {"images", ds.size()},
                    {"accuracy_regular", regular},
                    {"accuracy_negative", negative}};
  Outputs outputs(cfg.output_dir);
  const auto path = outputs.write("eval-" + token(bundle.name) + "-" + token(ckpt.arch.name) + "-s" +
                                      std::to_string(ckpt.init_seed) + "-" + token(split) + ".json",
                                  j.dump(2) + "\n");
  outputs.commit();
  out << ckpt.arch.name << " on " << bundle.name << " " << split << ": regular " << pct(regular)
      << ", negative " << pct(negative) << '\n'
      << "wrote " << path << '\n';
  return kExitOk;
}

int cmd_negate(const std::string& input, const std::string& output, std::ostream& out) {
  require_path(input, "input image");
  const auto img = data::read_raster(input);
  data::write_raster(output, data::negate(img));
  out << "wrote " << output << '\n';
  return kExitOk;
}

int cmd_experiment(const std::string& kind, const ExperimentConfig& cfg, std::ostream& out,
                   std::ostream& err) {
  auto env = cfg.env();
  env.log = [&err](const std::string& m) { err << m << '\n'; };
  const std::string arch = cfg.resolved_architecture();
  const exp::RunSpec run{arch, data::dataset_card(cfg.dataset).name, cfg.augment};
  auto need = [&](const std::string& ds) {
    if (!exp::dataset_available(env, ds)) {
      throw UsageError(data::dataset_card(ds).name + " source files not found under " +
                       exp::corpus_directory(env, ds));
    }
  };

  exp::ExperimentReport report;
  std::string stem;
  if (kind == "table2") {
    const auto runs = exp::table2_suite(cfg.suite);
    for (const auto& r : runs) need(r.dataset);
    report = exp::run_table2(env, runs, cfg.training, cfg.seeds);
    stem = "table2-" + token(cfg.suite) + "-suite-" + seed_token(cfg.seeds);
  } else if (kind == "augmentation") {
    need("MNIST");
    data::AugmentOptions opts;
    const auto tc = cfg.training_config(cfg.seeds.front());
    opts.shift = static_cast<int>(tc.augment_shift);
    opts.translations = tc.augment_translations;
    opts.reflection = tc.augment_reflection;
    report = exp::run_augmentation_study(env, cfg.training, cfg.seeds, opts);
    stem = "augmentation-mnist-lenet-5-" + seed_token(cfg.seeds);
  } else {
    need(run.dataset);
    stem = kind + "-" + token(run.dataset) + "-" + token(arch) + "-" + seed_token(cfg.seeds);
    if (kind == "confusion") {
      report = exp::run_confusion(env, run, cfg.training, cfg.seeds.front());
    } else if (kind == "curves") {
      report = exp::run_curves(env, run, cfg.training, cfg.seeds.front());
    } else if (kind == "finetune" || kind == "scratch") {
      report = exp::run_finetune_vs_scratch(env, run, cfg.n_grid, cfg.training, cfg.seeds,
                                            kind == "finetune" ? exp::Arms::kFinetune
                                                               : exp::Arms::kScratch);
    } else if (kind == "baseline") {
      report = exp::run_baseline(env, run.dataset, cfg.trials, cfg.seeds.front());
      stem = kind + "-" + token(run.dataset) + "-" + seed_token(cfg.seeds);
    } else {
      throw UsageError("unknown experiment '" + kind + "'");
    }
  }

  Outputs outputs(cfg.output_dir);
  outputs.write(stem + ".json", exp::to_json(report));
  if (!report.accuracies.empty()) {
    outputs.write(stem + ".accuracy.csv", exp::accuracies_csv(report.accuracies));
  }
  if (!report.curves.empty()) outputs.write(stem + ".curves.csv", exp::curves_csv(report.curves));
  if (!report.negative_training.empty()) {
    outputs.write(stem + ".points.csv", exp::negative_training_csv(report.negative_training));
  }
  for (const auto& c : report.confusions) {
    outputs.write(stem + ".confusion-" + token(c.label) + ".csv", c.matrix.to_csv());
  }
  auto m = manifest("experiment " + kind, cfg, cfg.seeds.front(), outputs.names());
  outputs.write(stem + ".manifest.json", m.dump(2) + "\n");
  outputs.commit();

  for (const auto& r : report.accuracies) {
    out << r.classifier << " | " << r.dataset << " | seed " << r.seed << " | regular "
        << pct(r.accuracy_regular) << " | negative " << pct(r.accuracy_negative) << '\n';
  }
  for (const auto& c : report.confusions) {
    out << c.label << " confusion: accuracy " << pct(c.matrix.accuracy()) << ", top predicted";
    for (auto k : c.matrix.top_predicted(3)) out << ' ' << k;
    out << '\n';
  }
  for (const auto& s : exp::summarize(report.negative_training)) {
    const std::string n = s.n == exp::kFullTrainingSet ? "full" : std::to_string(s.n);
    out << s.arm << " n=" << n << " (" << s.seeds << " seeds): regular " << pct(s.mean_regular)
        << ", negative " << pct(s.mean_negative) << '\n';
  }
  if (report.baseline) {
    out << "random baseline: " << pct(report.baseline->closed_form) << " (closed form), "
        << pct(report.baseline->monte_carlo) << " +- " << pct(report.baseline->standard_error)
        << " (" << report.baseline->trials << " trials)\n";
  }
  for (const auto& n : report.notes) out << n << '\n';
  for (const auto& f : outputs.names()) out << "wrote " << f << '\n';
  return kExitOk;
}

std::string percent_cell(const nlohmann::json& v) {
  return v.is_number() ? pct(v.get<double>()) : std::string("n/a");
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& output,
               std::ostream& out) {
  std::ostringstream md;
  md << "| Classifier | Dataset | Seed | Regular | Negative | Gap |\n"
        "|---|---|---|---|---|---|\n";
  std::ostringstream extra;
  for (const auto& path : inputs) {
    require_path(path, "report");
    const auto bytes = io::read_file(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path + ": not a JSON report: " + e.what());
    }
    if (!j.is_object() || !j.contains("kind")) throw FormatError(path + ": not a report");
    for (const auto& a : j.value("accuracies", nlohmann::json::array())) {
      const auto reg = a.at("accuracy_regular");
      const auto neg = a.at("accuracy_negative");
      md << "| " << a.at("classifier").get<std::string>() << " | "
         << a.at("dataset").get<std::string>() << " | " << a.at("seed").get<std::uint64_t>()
         << " | " << percent_cell(reg) << " | " << percent_cell(neg) << " | "
         << (reg.is_number() && neg.is_number() ? pct(reg.get<double>() - neg.get<double>())
                                                : std::string("n/a"))
         << " |\n";
    }
    for (const auto& r : j.value("reference_not_reproduced", nlohmann::json::array())) {
      extra << "reference only, not reproduced: " << r.at("classifier").get<std::string>() << " "
            << r.at("dataset").get<std::string>() << " regular "
            << pct(r.at("accuracy_regular").get<double>()) << " negative "
            << pct(r.at("accuracy_negative").get<double>()) << '\n';
    }
    if (j.contains("negative_training")) {
      for (const auto& s : j["negative_training"]["summary"]) {
        extra << s.at("arm").get<std::string>() << " n=" << s.at("n").get<std::uint64_t>()
              << ": regular " << pct(s.at("mean_regular").get<double>()) << ", negative "
              << pct(s.at("mean_negative").get<double>()) << '\n';
      }
    }
    if (j.contains("random_baseline")) {
      extra << "random baseline (" << path << "): "
            << pct(j["random_baseline"]["closed_form"].get<double>()) << '\n';
    }
  }
  const std::string text = md.str() + (extra.str().empty() ? "" : "\n" + extra.str());
  if (output.empty()) {
    out << text;
  } else {
    io::write_text_atomic(output, text);
    out << "wrote " << output << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train and evaluate CNNs on regular and negative images", "negcnn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NEGCNN_VERSION);

  std::string ingest_dataset, ingest_source, ingest_cache;
  auto* ingest = app.add_subcommand("ingest", "Parse a corpus into a dataset cache");
  ingest->add_option("dataset", ingest_dataset, "MNIST, CIFAR-10, GTSRB-color or GTSRB-gray")
      ->required();
  ingest->add_option("--source", ingest_source, "corpus directory")->required();
  ingest->add_option("--cache", ingest_cache, "cache file to write");

  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train one model per seed");
  train_flags.attach(*train_cmd);

  ConfigFlags eval_flags;
  std::string eval_ckpt, eval_split = "test";
  auto* eval = app.add_subcommand("eval", "Accuracy of a checkpoint on regular and negative images");
  eval_flags.attach(*eval);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--split", eval_split, "train, validation or test");

  std::string negate_in, negate_out;
  auto* negate = app.add_subcommand("negate", "Write the negative of an image");
  negate->add_option("input", negate_in, "PNG or netpbm image")->required();
  negate->add_option("output", negate_out, "output image (.png, .pgm or .ppm)")->required();

  ConfigFlags exp_flags;
  std::string exp_kind;
  auto* experiment = app.add_subcommand("experiment", "Run an experiment driver");
  experiment->add_option("kind", exp_kind)
      ->required()
      ->check(CLI::IsMember(
          {"table2", "confusion", "curves", "augmentation", "finetune", "scratch", "baseline"}));
  exp_flags.attach(*experiment);

  std::vector<std::string> report_inputs;
  std::string report_output;
  auto* report = app.add_subcommand("report", "Summarize experiment JSON reports as a table");
  report->add_option("reports", report_inputs, "report JSON files")->required();
  report->add_option("--output", report_output, "write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_dataset, ingest_source, ingest_cache, out, err);
    if (*train_cmd) return cmd_train(train_flags.resolve(), out, err);
    if (*eval) return cmd_eval(eval_flags.resolve(), eval_ckpt, eval_split, out);
    if (*negate) return cmd_negate(negate_in, negate_out, out);
    if (*experiment) return cmd_experiment(exp_kind, exp_flags.resolve(), out, err);
    if (*report) return cmd_report(report_inputs, report_output, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace negcnn::cli
