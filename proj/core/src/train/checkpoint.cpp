#include "negcnn/train/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "negcnn/binary_io.hpp"
#include "negcnn/errors.hpp"

namespace negcnn::train {

namespace {

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_tensor(io::ByteWriter& w, const std::string& name, const Tensor& t) {
  w.string(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  w.array(t.data());
}

std::pair<std::string, Tensor> read_tensor(io::ByteReader& r) {
  std::string name = r.string(1024);
  const std::uint32_t rank = r.u32();
  if (rank == 0 || rank > 8) r.fail("tensor '" + name + "' has invalid rank " + std::to_string(rank));
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = r.u32();
    if (d == 0) r.fail("tensor '" + name + "' has a zero dimension");
    count *= d;
  }
  auto values = r.array<float>(count);
  return {std::move(name), Tensor(std::move(shape), std::move(values))};
}

}  // namespace

bool EpochRecord::operator==(const EpochRecord& o) const {
  return epoch == o.epoch && same_bits(learning_rate, o.learning_rate) &&
         same_bits(train_loss, o.train_loss) &&
         same_bits(validation_accuracy, o.validation_accuracy) &&
         same_bits(test_accuracy, o.test_accuracy) &&
         same_bits(negative_test_accuracy, o.negative_test_accuracy);
}

void History::append(const EpochRecord& record) {
  const std::uint32_t expected = records_.empty() ? record.epoch : records_.back().epoch + 1;
  if (record.epoch != expected || record.epoch == 0) {
    throw ContractError("history epochs must be consecutive and 1-based; got " +
                        std::to_string(record.epoch) + " after " +
                        (records_.empty() ? std::string("none") : std::to_string(records_.back().epoch)));
  }
  records_.push_back(record);
}

void History::extend(const History& other) {
  for (const auto& r : other.records_) append(r);
}

std::string History::to_csv() const {
  std::ostringstream os;
  os << "epoch,learning_rate,train_loss,validation_accuracy,test_accuracy,negative_test_accuracy\n";
  for (const auto& r : records_) {
    char lr[32];
    std::snprintf(lr, sizeof lr, "%.8g", r.learning_rate);
    os << r.epoch << ',' << lr << ',' << format_metric(r.train_loss) << ','
       << format_metric(r.validation_accuracy) << ',' << format_metric(r.test_accuracy) << ','
       << format_metric(r.negative_test_accuracy) << '\n';
  }
  return os.str();
}

nn::Network Checkpoint::network() const { return nn::Network(arch, parameters, init_seed); }

Checkpoint Checkpoint::from_network(const nn::Network& net) {
  Checkpoint ckpt;
  ckpt.arch = net.spec();
  ckpt.parameters = net.parameters();
  ckpt.init_seed = net.seed();
  return ckpt;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.string(ckpt.arch.name);
  w.string(ckpt.arch.to_text());
  w.u64(ckpt.init_seed);
  w.u32(ckpt.epoch);
  w.string(ckpt.rng_state);
  w.u32(static_cast<std::uint32_t>(ckpt.parameters.size()));
  for (const auto& p : ckpt.parameters) write_tensor(w, p.name, p.value);
  w.u32(static_cast<std::uint32_t>(ckpt.velocity.size()));
  for (std::size_t i = 0; i < ckpt.velocity.size(); ++i) {
    write_tensor(w, ckpt.parameters.at(i).name + ".velocity", ckpt.velocity[i]);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.history.size()));
  for (const auto& r : ckpt.history.records()) {
    w.u32(r.epoch);
    w.f64(r.learning_rate);
    w.f64(r.train_loss);
    w.f64(r.validation_accuracy);
    w.f64(r.test_accuracy);
    w.f64(r.negative_test_accuracy);
  }
  w.u32(io::crc32(w.buffer()));
  return std::move(w.buffer());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 12) throw FormatError(origin + ": too short for a checkpoint", 0);
  if (!std::equal(kCheckpointMagic, kCheckpointMagic + 4, bytes.begin())) {
    throw FormatError(origin + ": not a checkpoint (bad magic)", 0);
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (stored != io::crc32(bytes.first(body))) {
    throw FormatError(origin + ": checksum mismatch (truncated or corrupt checkpoint)", body);
  }

  io::ByteReader r(bytes.first(body), origin);
  r.bytes(4);
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(version), 4);
  }
  Checkpoint ckpt;
  const std::string name = r.string(256);
  try {
    ckpt.arch = nn::parse_architecture(r.string());
  } catch (const FormatError& e) {
    r.fail(std::string("embedded architecture: ") + e.what());
  }
  if (ckpt.arch.name != name) r.fail("architecture name mismatch");
  ckpt.init_seed = r.u64();
  ckpt.epoch = r.u32();
  ckpt.rng_state = r.string();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [tname, t] = read_tensor(r);
    ckpt.parameters.push_back({std::move(tname), std::move(t)});
  }
  const std::uint32_t vcount = r.u32();
  if (vcount != 0 && vcount != count) r.fail("velocity count does not match parameter count");
  for (std::uint32_t i = 0; i < vcount; ++i) {
    auto [vname, t] = read_tensor(r);
    if (vname != ckpt.parameters[i].name + ".velocity" ||
        t.shape() != ckpt.parameters[i].value.shape()) {
      r.fail("velocity block '" + vname + "' does not match its parameter");
    }
    ckpt.velocity.push_back(std::move(t));
  }
  const std::uint32_t records = r.u32();
  for (std::uint32_t i = 0; i < records; ++i) {
    EpochRecord rec;
    rec.epoch = r.u32();
    rec.learning_rate = r.f64();
    rec.train_loss = r.f64();
    rec.validation_accuracy = r.f64();
    rec.test_accuracy = r.f64();
    rec.negative_test_accuracy = r.f64();
    try {
      ckpt.history.append(rec);
    } catch (const ContractError& e) {
      r.fail(e.what());
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes before checksum");
  try {
    (void)ckpt.network();  // validates parameter names and shapes against the architecture
  } catch (const DimensionError& e) {
    throw FormatError(origin + ": " + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  io::write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  const auto bytes = io::read_file(path);
  return deserialize_checkpoint(bytes, path);
}

}  // namespace negcnn::train
