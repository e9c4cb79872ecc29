#include "cli/config.hpp"

#include <filesystem>
#include <set>

#include "json.hpp"
#include "negcnn/binary_io.hpp"
#include "negcnn/data/dataset.hpp"
#include "negcnn/errors.hpp"

namespace negcnn::cli {

namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "dataset",       "architecture",    "suite",          "data_dir",
      "work_dir",      "output_dir",      "cache",          "seeds",
      "n_grid",        "trials",          "learning_rate",  "momentum",
      "batch_size",    "epochs",          "lr_decay_factor", "lr_decay_epochs",
      "shuffle",       "augment",         "augment_shift",  "augment_translations",
      "augment_reflection"};
  return keys;
}

class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  void string(const json& v, const std::string& key, std::string& out) {
    if (v.is_string()) out = v.get<std::string>();
    else bad(key, "a string");
  }
  template <typename T>
  void number(const json& v, const std::string& key, T& out) {
    if (v.is_number()) out = v.get<T>();
    else bad(key, "a number");
  }
  template <typename T>
  void unsigned_int(const json& v, const std::string& key, T& out) {
    if (v.is_number_unsigned()) out = v.get<T>();
    else bad(key, "a non-negative integer");
  }
  void boolean(const json& v, const std::string& key, bool& out) {
    if (v.is_boolean()) out = v.get<bool>();
    else bad(key, "true or false");
  }
  template <typename T>
  void uint_list(const json& v, const std::string& key, std::vector<T>& out) {
    if (!v.is_array()) return bad(key, "a list of non-negative integers");
    std::vector<T> values;
    for (const auto& e : v) {
      if (!e.is_number_unsigned()) return bad(key, "a list of non-negative integers");
      values.push_back(e.get<T>());
    }
    out = std::move(values);
  }
  void bad(const std::string& key, const std::string& expected) {
    problems_.push_back("'" + key + "' must be " + expected);
  }

 private:
  std::vector<std::string>& problems_;
};

}  // namespace

std::string ExperimentConfig::resolved_architecture() const {
  if (!architecture.empty()) return architecture;
  return data::dataset_card(dataset).name == "MNIST" ? "LeNet-5" : "MVGG-8";
}

train::TrainingConfig ExperimentConfig::training_config(std::uint64_t seed) const {
  auto c = training.for_dataset(dataset, seed, augment);
  if (augment_shift) c.augment_shift = *augment_shift;
  if (augment_translations) c.augment_translations = *augment_translations;
  if (augment_reflection) c.augment_reflection = *augment_reflection;
  c.validate();
  return c;
}

exp::ExperimentEnv ExperimentConfig::env() const { return {data_dir, work_dir, {}}; }

std::vector<std::size_t> parse_n_grid(const std::vector<std::string>& items) {
  std::vector<std::size_t> grid;
  for (const auto& s : items) {
    if (s == "full") {
      grid.push_back(exp::kFullTrainingSet);
      continue;
    }
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || v == 0 || s.front() == '-') {
      throw ConfigError("n_grid entry '" + s + "' is not a positive integer or 'full'");
    }
    grid.push_back(static_cast<std::size_t>(v));
  }
  if (grid.empty()) throw ConfigError("n_grid must not be empty");
  return grid;
}

void apply_json(ExperimentConfig& config, const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": not valid JSON: " + e.what());
  }
  if (!root.is_object()) throw ConfigError(origin + ": top level must be a JSON object");

  std::vector<std::string> problems;
  for (const auto& [key, value] : root.items()) {
    if (!known_keys().count(key)) problems.push_back("unknown key '" + key + "'");
  }
  Reader r(problems);
  auto& t = config.training;
  for (const auto& [key, v] : root.items()) {
    if (key == "dataset") r.string(v, key, config.dataset);
    else if (key == "architecture") r.string(v, key, config.architecture);
    else if (key == "suite") r.string(v, key, config.suite);
    else if (key == "data_dir") r.string(v, key, config.data_dir);
    else if (key == "work_dir") r.string(v, key, config.work_dir);
    else if (key == "output_dir") r.string(v, key, config.output_dir);
    else if (key == "cache") r.string(v, key, config.cache);
    else if (key == "seeds") r.uint_list(v, key, config.seeds);
    else if (key == "trials") r.unsigned_int(v, key, config.trials);
    else if (key == "augment") r.boolean(v, key, config.augment);
    else if (key == "n_grid") {
      std::vector<std::string> items;
      bool ok = v.is_array();
      for (const auto& e : v) {
        if (e.is_number_unsigned()) items.push_back(std::to_string(e.get<std::uint64_t>()));
        else if (e.is_string()) items.push_back(e.get<std::string>());
        else ok = false;
      }
      if (!ok) {
        r.bad(key, "a list of positive integers or \"full\"");
        continue;
      }
      try {
        config.n_grid = parse_n_grid(items);
      } catch (const ConfigError& e) {
        problems.push_back(e.what());
      }
    } else if (key == "learning_rate") {
      double x = 0;
      r.number(v, key, x);
      if (v.is_number()) t.learning_rate = x;
    } else if (key == "momentum") {
      double x = 0;
      r.number(v, key, x);
      if (v.is_number()) t.momentum = x;
    } else if (key == "lr_decay_factor") {
      double x = 0;
      r.number(v, key, x);
      if (v.is_number()) t.lr_decay_factor = x;
    } else if (key == "batch_size" || key == "epochs" || key == "augment_shift") {
      std::uint32_t x = 0;
      r.unsigned_int(v, key, x);
      if (!v.is_number_unsigned()) continue;
      if (key == "batch_size") t.batch_size = x;
      else if (key == "epochs") t.epochs = x;
      else config.augment_shift = x;
    } else if (key == "lr_decay_epochs") {
      std::vector<std::uint32_t> xs;
      r.uint_list(v, key, xs);
      if (v.is_array()) t.lr_decay_epochs = xs;
    } else if (key == "shuffle" || key == "augment_translations" || key == "augment_reflection") {
      bool x = false;
      r.boolean(v, key, x);
      if (!v.is_boolean()) continue;
      if (key == "shuffle") t.shuffle = x;
      else if (key == "augment_translations") config.augment_translations = x;
      else config.augment_reflection = x;
    }
  }
  if (problems.empty()) return;
  std::string msg = origin + ": invalid config:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

void apply_json_file(ExperimentConfig& config, const std::string& path) {
  const auto bytes = io::read_file(path);
  apply_json(config, std::string(bytes.begin(), bytes.end()), path);
}

std::string to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["dataset"] = c.dataset;
  j["architecture"] = c.resolved_architecture();
  j["suite"] = c.suite;
  j["data_dir"] = c.data_dir;
  j["work_dir"] = c.work_dir;
  j["output_dir"] = c.output_dir;
  j["cache"] = c.cache;
  j["seeds"] = c.seeds;
  auto grid = nlohmann::ordered_json::array();
  for (auto n : c.n_grid) {
    if (n == exp::kFullTrainingSet) grid.push_back("full");
    else grid.push_back(n);
  }
  j["n_grid"] = grid;
  j["trials"] = c.trials;
  const auto t = c.training_config(c.seeds.empty() ? 1 : c.seeds.front());
  j["learning_rate"] = t.learning_rate;
  j["momentum"] = t.momentum;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["lr_decay_factor"] = t.lr_decay_factor;
  j["lr_decay_epochs"] = t.lr_decay_epochs;
  j["shuffle"] = t.shuffle;
  j["augment"] = t.augment;
  j["augment_shift"] = t.augment_shift;
  j["augment_translations"] = t.augment_translations;
  j["augment_reflection"] = t.augment_reflection;
  return j.dump(2);
}

}  // namespace negcnn::cli
