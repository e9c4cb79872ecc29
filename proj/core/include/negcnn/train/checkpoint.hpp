#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "negcnn/nn/architecture.hpp"
#include "negcnn/nn/network.hpp"
#include "negcnn/tensor.hpp"

namespace negcnn::train {

// One completed epoch. Accuracies are NaN when the split was not provided.
struct EpochRecord {
  std::uint32_t epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
  double negative_test_accuracy = 0.0;

  bool operator==(const EpochRecord&) const;
};

class History {
 public:
  // Throws ContractError unless record.epoch is exactly one past the last.
  void append(const EpochRecord& record);
  void extend(const History& other);

  const std::vector<EpochRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const EpochRecord& back() const { return records_.back(); }

  // Header: epoch,learning_rate,train_loss,validation_accuracy,test_accuracy,negative_test_accuracy
  std::string to_csv() const;

  bool operator==(const History&) const = default;

 private:
  std::vector<EpochRecord> records_;
};

// Full training state: enough to rebuild the network and continue training
// along the same trajectory.
struct Checkpoint {
  nn::ArchitectureSpec arch;
  std::vector<nn::NamedTensor> parameters;
  std::vector<Tensor> velocity;  // one per parameter, or empty before the first step
  std::uint64_t init_seed = 0;
  std::uint32_t epoch = 0;   // completed epochs
  std::string rng_state;     // std::mt19937_64 textual state
  History history;

  nn::Network network() const;
  static Checkpoint from_network(const nn::Network& net);

  bool operator==(const Checkpoint&) const = default;
};

// Checkpoint file, little-endian:
//
//   char[4] "NCKP", u32 version (1)
//   string  architecture name, string architecture text
//   u64     init seed, u32 completed epochs, string rng state
//   u32     tensor count P, then P blocks:
//             string name, u32 rank, u32 dims[rank], f32 values[prod(dims)]
//   u32     velocity count (0 or P), then blocks as above named "<param>.velocity"
//   u32     history length H, then H records:
//             u32 epoch, f64 lr, f64 loss, f64 val, f64 test, f64 negative test
//   u32     CRC-32 of all preceding bytes
//
// Strings are a u32 length followed by the bytes.
inline constexpr char kCheckpointMagic[4] = {'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes, const std::string& origin);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
// Throws FormatError on bad magic, version, truncation or checksum; never
// returns a partially read checkpoint.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace negcnn::train
