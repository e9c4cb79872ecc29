#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace negcnn {

// Operand shapes do not fit the operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition on values (not shapes) was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed binary or text input. offset() is the byte position at which
// parsing stopped, when known.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit FormatError(const std::string& what)
      : std::runtime_error(what), offset_(kUnknownOffset) {}

  static constexpr std::uint64_t kUnknownOffset = ~std::uint64_t{0};
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Dataset ingestion failed for a specific file.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& what, std::string file)
      : std::runtime_error(what + ": " + file), file_(std::move(file)) {}
  const std::string& file() const noexcept { return file_; }

 private:
  std::string file_;
};

// Invalid configuration; the message lists every offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace negcnn
