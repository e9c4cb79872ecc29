#include "negcnn/train/config.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "negcnn/binary_io.hpp"
#include "negcnn/data/dataset.hpp"
#include "negcnn/errors.hpp"

namespace negcnn::train {

void TrainingConfig::validate() const {
  std::vector<std::string> problems;
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    problems.push_back("learning_rate must be > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) problems.push_back("momentum must be in [0, 1)");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (epochs < 1) problems.push_back("epochs must be >= 1");
  if (!(lr_decay_factor > 0.0) || !std::isfinite(lr_decay_factor)) {
    problems.push_back("lr_decay_factor must be > 0");
  }
  if (augment && (augment_shift < 1 || augment_shift > 16)) {
    problems.push_back("augment_shift must be in [1, 16]");
  }
  if (problems.empty()) return;
  std::string msg = "invalid training config:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

double TrainingConfig::learning_rate_at(std::uint32_t epoch) const {
  double lr = learning_rate;
  for (std::uint32_t milestone : lr_decay_epochs) {
    if (epoch >= milestone) lr *= lr_decay_factor;
  }
  return lr;
}

std::string TrainingConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "learning_rate = " << learning_rate << '\n'
     << "momentum = " << momentum << '\n'
     << "batch_size = " << batch_size << '\n'
     << "epochs = " << epochs << '\n'
     << "lr_decay_factor = " << lr_decay_factor << '\n'
     << "lr_decay_epochs =";
  for (auto e : lr_decay_epochs) os << ' ' << e;
  os << '\n'
     << "seed = " << seed << '\n'
     << "shuffle = " << (shuffle ? "true" : "false") << '\n'
     << "augment = " << (augment ? "true" : "false") << '\n';
  if (augment) {
    os << "augment_shift = " << augment_shift << '\n'
       << "augment_translations = " << (augment_translations ? "true" : "false") << '\n'
       << "augment_reflection = " << (augment_reflection ? "true" : "false") << '\n';
  }
  return os.str();
}

std::string TrainingConfig::fingerprint() const {
  const std::string text = to_text();
  const auto crc = io::crc32(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08x", crc);
  return hex;
}

TrainingConfig default_config_for(const std::string& dataset_card) {
  const auto& card = data::dataset_card(dataset_card);
  TrainingConfig cfg;
  if (card.name != "MNIST") {
    cfg.epochs = 60;
    cfg.lr_decay_epochs = {30, 45};
  }
  return cfg;
}

}  // namespace negcnn::train
