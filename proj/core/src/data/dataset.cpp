#include "negcnn/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "negcnn/errors.hpp"

namespace negcnn::data {

namespace {

constexpr double kPixelGrid = 16777216.0;  // 2^24

void check_pixels(std::span<const float> pixels, const char* where) {
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const float v = pixels[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ContractError(std::string(where) + ": pixel " + std::to_string(i) + " = " +
                          std::to_string(v) + " outside [0, 1]");
    }
  }
}

void check_image_shape(const Shape& shape) {
  if (shape.size() != 3) {
    throw DimensionError("image shape must be C x H x W, got " + shape_to_string(shape));
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

float snap_pixel(double value) {
  const double clamped = std::clamp(value, 0.0, 1.0);
  return static_cast<float>(std::round(clamped * kPixelGrid) / kPixelGrid);
}

Image::Image(Tensor pixels) : pixels_(std::move(pixels)) {
  check_image_shape(pixels_.shape());
  check_pixels(pixels_.data(), "image");
}

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split split_from_string(std::string_view text) {
  const std::string s = lower(text);
  if (s == "train") return Split::kTrain;
  if (s == "validation" || s == "val") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw ContractError("unknown split '" + std::string(text) + "'");
}

LabeledDataset::LabeledDataset(std::string name, Split split, std::size_t num_classes,
                               Shape image_shape, std::vector<float> pixels,
                               std::vector<std::int32_t> labels)
    : name_(std::move(name)),
      split_(split),
      num_classes_(num_classes),
      image_shape_(std::move(image_shape)),
      pixels_(std::move(pixels)),
      labels_(std::move(labels)) {
  check_image_shape(image_shape_);
  if (num_classes_ == 0) throw ContractError(name_ + ": num_classes must be positive");
  if (pixels_.size() != labels_.size() * image_size()) {
    throw DimensionError(name_ + ": " + std::to_string(pixels_.size()) + " pixel values for " +
                         std::to_string(labels_.size()) + " images of shape " +
                         shape_to_string(image_shape_));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= num_classes_) {
      throw ContractError(name_ + ": label " + std::to_string(labels_[i]) + " of image " +
                          std::to_string(i) + " outside [0, " + std::to_string(num_classes_) + ")");
    }
  }
  check_pixels(pixels_, name_.c_str());
}

LabeledDataset LabeledDataset::empty_like(const LabeledDataset& other) {
  return LabeledDataset(other.name_, other.split_, other.num_classes_, other.image_shape_, {}, {});
}

std::span<const float> LabeledDataset::image_pixels(std::size_t i) const {
  if (i >= size()) throw ContractError("image index " + std::to_string(i) + " out of range");
  return std::span<const float>(pixels_).subspan(i * image_size(), image_size());
}

Image LabeledDataset::image(std::size_t i) const {
  const auto px = image_pixels(i);
  return Image(Tensor(image_shape_, std::vector<float>(px.begin(), px.end())));
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes_, 0);
  for (std::int32_t l : labels_) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<float> px;
  px.reserve(indices.size() * image_size());
  std::vector<std::int32_t> lb;
  lb.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto src = image_pixels(i);
    px.insert(px.end(), src.begin(), src.end());
    lb.push_back(labels_[i]);
  }
  LabeledDataset out;
  out.name_ = name_;
  out.split_ = split_;
  out.num_classes_ = num_classes_;
  out.image_shape_ = image_shape_;
  out.pixels_ = std::move(px);
  out.labels_ = std::move(lb);
  return out;
}

Tensor LabeledDataset::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ContractError("batch needs at least one image");
  std::vector<float> px(indices.size() * image_size());
  auto dst = px.begin();
  for (std::size_t i : indices) {
    const auto src = image_pixels(i);
    dst = std::copy(src.begin(), src.end(), dst);
  }
  Shape shape{indices.size()};
  shape.insert(shape.end(), image_shape_.begin(), image_shape_.end());
  return Tensor(std::move(shape), std::move(px));
}

Tensor LabeledDataset::batch(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > size()) throw ContractError("batch range out of bounds");
  Shape shape{end - begin};
  shape.insert(shape.end(), image_shape_.begin(), image_shape_.end());
  return Tensor(std::move(shape), std::vector<float>(pixels_.begin() + begin * image_size(),
                                                     pixels_.begin() + end * image_size()));
}

LabeledDataset LabeledDataset::renamed(std::string name, Split split) const {
  LabeledDataset out = *this;
  out.name_ = std::move(name);
  out.split_ = split;
  return out;
}

DatasetBuilder::DatasetBuilder(std::string name, Split split, std::size_t num_classes,
                               Shape image_shape)
    : name_(std::move(name)),
      split_(split),
      num_classes_(num_classes),
      image_shape_(std::move(image_shape)) {
  check_image_shape(image_shape_);
}

void DatasetBuilder::reserve(std::size_t count) {
  pixels_.reserve(count * shape_size(image_shape_));
  labels_.reserve(count);
}

void DatasetBuilder::add(std::span<const float> pixels, std::int32_t label) {
  if (pixels.size() != shape_size(image_shape_)) {
    throw DimensionError(name_ + ": image with " + std::to_string(pixels.size()) +
                         " values, expected shape " + shape_to_string(image_shape_));
  }
  pixels_.insert(pixels_.end(), pixels.begin(), pixels.end());
  labels_.push_back(label);
}

LabeledDataset DatasetBuilder::build() && {
  return LabeledDataset(std::move(name_), split_, num_classes_, std::move(image_shape_),
                        std::move(pixels_), std::move(labels_));
}

LabeledDataset concatenate(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.image_shape() != b.image_shape() || a.num_classes() != b.num_classes()) {
    throw DimensionError("cannot concatenate " + a.name() + " " + shape_to_string(a.image_shape()) +
                         " with " + b.name() + " " + shape_to_string(b.image_shape()));
  }
  DatasetBuilder builder(a.name(), a.split(), a.num_classes(), a.image_shape());
  builder.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) builder.add(a.image_pixels(i), a.label(i));
  for (std::size_t i = 0; i < b.size(); ++i) builder.add(b.image_pixels(i), b.label(i));
  return std::move(builder).build();
}

const LabeledDataset& DatasetBundle::split(Split s) const {
  switch (s) {
    case Split::kTrain:
      return train;
    case Split::kValidation:
      return validation;
    case Split::kTest:
      return test;
  }
  return train;
}

const std::vector<DatasetCard>& dataset_cards() {
  // GTSRB validation is 20% of each class (rounded to nearest), which sums
  // to 7,842 over the 39,209 official training images.
  static const std::vector<DatasetCard> cards = {
      {"MNIST", 50000, 10000, 10000, 1, 10, {1, 32, 32}},
      {"CIFAR-10", 45000, 5000, 10000, 3, 10, {3, 32, 32}},
      {"GTSRB-color", 31367, 7842, 12630, 3, 43, {3, 32, 32}},
      {"GTSRB-gray", 31367, 7842, 12630, 1, 43, {1, 32, 32}},
  };
  return cards;
}

const DatasetCard& dataset_card(std::string_view name) {
  std::string key = lower(name);
  if (key == "cifar10") key = "cifar-10";
  if (key == "gtsrb") key = "gtsrb-color";
  for (const auto& card : dataset_cards()) {
    if (lower(card.name) == key) return card;
  }
  throw ContractError("unknown dataset '" + std::string(name) +
                      "' (expected MNIST, CIFAR-10, GTSRB-color or GTSRB-gray)");
}

}  // namespace negcnn::data
