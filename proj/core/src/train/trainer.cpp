#include "negcnn/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "negcnn/data/transforms.hpp"
#include "negcnn/errors.hpp"
#include "negcnn/nn/inference.hpp"
#include "negcnn/ops.hpp"

namespace negcnn::train {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_string(const std::string& state) {
  std::mt19937_64 rng;
  std::istringstream is(state);
  is >> rng;
  if (!is) throw FormatError("invalid rng state in checkpoint");
  return rng;
}

// Shuffling stream for a run, independent of the initialisation stream.
std::mt19937_64 shuffle_rng(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), 0x5eedu};
  return std::mt19937_64(seq);
}

void check_compatible(const nn::ArchitectureSpec& spec, const data::LabeledDataset& ds,
                      const char* split) {
  if (ds.empty()) return;
  if (ds.image_shape() != spec.input_shape) {
    throw DimensionError(std::string(split) + " images " + shape_to_string(ds.image_shape()) +
                         " do not match " + spec.name + " input " + shape_to_string(spec.input_shape));
  }
  if (ds.num_classes() != spec.num_classes) {
    throw ContractError(std::string(split) + " has " + std::to_string(ds.num_classes()) +
                        " classes but " + spec.name + " predicts " + std::to_string(spec.num_classes));
  }
}

double accuracy_or_nan(const nn::Network& net, const data::LabeledDataset& ds) {
  return ds.empty() ? kNaN : accuracy(net, ds);
}

// Runs local epochs [first, last) of one phase, mutating `state` and
// appending to its history. Tracks the best-validation checkpoint.
void run_epochs(Checkpoint& state, Checkpoint& best, double& best_val, const TrainingData& data,
                const data::LabeledDataset& train_set, const data::LabeledDataset& negative_test,
                const TrainingConfig& cfg, std::uint32_t first, std::uint32_t last,
                const EpochObserver& observer) {
  nn::Network net = state.network();
  OptimizerState opt{state.velocity};
  std::mt19937_64 rng = rng_from_string(state.rng_state);
  std::vector<std::size_t> order(train_set.size());
  const std::size_t batch = cfg.batch_size;

  for (std::uint32_t local = first; local < last; ++local) {
    const Checkpoint last_good = state;
    const SgdParams sgd{cfg.learning_rate_at(local), cfg.momentum};
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      std::vector<std::int32_t> labels;
      labels.reserve(idx.size());
      for (std::size_t i : idx) labels.push_back(train_set.label(i));

      Tape<float> tape;
      const auto params = nn::bind_parameters(net, tape);
      const auto x = tape.constant(train_set.batch(idx));
      const auto loss = ops::softmax_cross_entropy(nn::forward(net, params, x), labels);
      const double loss_value = loss.value().item();
      if (!std::isfinite(loss_value)) {
        throw TrainingDiverged("loss became non-finite in epoch " + std::to_string(state.epoch + 1) +
                                   " at sample " + std::to_string(begin),
                               last_good);
      }
      tape.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (const auto& p : params) grads.push_back(tape.grad(p));
      try {
        sgd_step(net, grads, opt, sgd);
      } catch (const NumericError& e) {
        throw TrainingDiverged(e.what(), last_good);
      }
      loss_sum += loss_value * static_cast<double>(idx.size());
    }

    EpochRecord rec;
    rec.epoch = state.epoch + 1;
    rec.learning_rate = sgd.learning_rate;
    rec.train_loss = train_set.empty() ? kNaN : loss_sum / static_cast<double>(train_set.size());
    rec.validation_accuracy = accuracy_or_nan(net, data.validation);
    rec.test_accuracy = accuracy_or_nan(net, data.test);
    rec.negative_test_accuracy = accuracy_or_nan(net, negative_test);

    state.parameters = net.parameters();
    state.velocity = opt.velocity;
    state.epoch = rec.epoch;
    state.rng_state = rng_to_string(rng);
    state.history.append(rec);
    if (!data.validation.empty() && rec.validation_accuracy > best_val) {
      best_val = rec.validation_accuracy;
      best = state;
    }
    if (observer) observer(rec);
  }
  if (data.validation.empty()) best = state;
}

TrainResult run_phase(Checkpoint start, const TrainingData& data, const TrainingConfig& cfg,
                      std::uint32_t first, std::uint32_t last, const EpochObserver& observer) {
  cfg.validate();
  check_compatible(start.arch, data.train, "training split");
  check_compatible(start.arch, data.validation, "validation split");
  check_compatible(start.arch, data.test, "test split");
  const data::LabeledDataset train_set =
      cfg.augment ? data::augment_translate_reflect(
                        data.train, {static_cast<int>(cfg.augment_shift), cfg.augment_translations,
                                     cfg.augment_reflection})
                  : data.train;
  const data::LabeledDataset negative_test =
      data.test.empty() ? data.test : data::negate(data.test);

  Checkpoint best = start;
  double best_val = -1.0;
  run_epochs(start, best, best_val, data, train_set, negative_test, cfg, first, last, observer);
  return {std::move(start), std::move(best)};
}

}  // namespace

void sgd_step(nn::Network& net, std::span<const Tensor> grads, OptimizerState& state,
              const SgdParams& params) {
  auto& ps = net.parameters();
  if (grads.size() != ps.size()) {
    throw DimensionError("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(ps.size()) + " parameters");
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (grads[i].shape() != ps[i].value.shape()) {
      throw DimensionError("sgd_step: gradient " + shape_to_string(grads[i].shape()) +
                           " does not match " + ps[i].name + " " +
                           shape_to_string(ps[i].value.shape()));
    }
    for (float g : grads[i].data()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in layer parameter " + ps[i].name);
    }
  }
  if (state.velocity.empty()) {
    for (const auto& p : ps) state.velocity.push_back(Tensor::zeros(p.value.shape()));
  }
  const auto lr = static_cast<float>(params.learning_rate);
  const auto mu = static_cast<float>(params.momentum);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto p = ps[i].value.data();
    auto v = state.velocity[i].data();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = mu * v[j] - lr * g[j];
      p[j] += v[j];
    }
  }
}

Checkpoint initial_checkpoint(const nn::ArchitectureSpec& spec, std::uint64_t seed) {
  Checkpoint ckpt = Checkpoint::from_network(nn::build_network(spec, seed));
  ckpt.rng_state = rng_to_string(shuffle_rng(seed, 0));
  return ckpt;
}

TrainResult train(const nn::ArchitectureSpec& spec, const TrainingData& data,
                  const TrainingConfig& config, const EpochObserver& observer) {
  if (data.train.empty()) throw ContractError("train: empty training split");
  return run_phase(initial_checkpoint(spec, config.seed), data, config, 0, config.epochs, observer);
}

TrainResult resume(const Checkpoint& ckpt, const TrainingData& data, const TrainingConfig& config,
                   const EpochObserver& observer) {
  if (ckpt.epoch > config.epochs) {
    throw ContractError("resume: checkpoint at epoch " + std::to_string(ckpt.epoch) +
                        " is past the configured " + std::to_string(config.epochs));
  }
  return run_phase(ckpt, data, config, ckpt.epoch, config.epochs, observer);
}

TrainResult fine_tune(const Checkpoint& ckpt, const TrainingData& data,
                      const TrainingConfig& config, const EpochObserver& observer) {
  for (const auto* ds : {&data.train, &data.validation, &data.test}) {
    if (!ds->empty() && ds->num_classes() != ckpt.arch.num_classes) {
      throw ContractError("fine_tune: data has " + std::to_string(ds->num_classes()) +
                          " classes, checkpoint predicts " + std::to_string(ckpt.arch.num_classes));
    }
  }
  if (data.train.empty()) return {ckpt, ckpt};
  Checkpoint start = ckpt;
  start.velocity.clear();
  start.rng_state = rng_to_string(shuffle_rng(config.seed, 1 + ckpt.epoch));
  return run_phase(std::move(start), data, config, 0, config.epochs, observer);
}

double accuracy(const nn::Network& net, const data::LabeledDataset& ds) {
  if (ds.empty()) throw ContractError("accuracy of an empty dataset is undefined");
  const auto predicted = nn::predict_labels(net, ds);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) correct += predicted[i] == ds.label(i);
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace negcnn::train
