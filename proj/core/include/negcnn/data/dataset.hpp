#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negcnn/tensor.hpp"

namespace negcnn::data {

// Pixel values are kept on a grid of multiples of 2^-24 so that 1 - x is
// exact in single precision and negation is a bit-exact involution.
float snap_pixel(double value);

// One C x H x W image with every pixel in [0, 1].
class Image {
 public:
  // Throws ContractError if a pixel lies outside [0, 1] or is not finite.
  explicit Image(Tensor pixels);

  const Tensor& pixels() const noexcept { return pixels_; }
  std::size_t channels() const { return pixels_.dim(0); }
  std::size_t height() const { return pixels_.dim(1); }
  std::size_t width() const { return pixels_.dim(2); }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels_[(c * height() + y) * width() + x];
  }

  bool operator==(const Image&) const = default;

 private:
  Tensor pixels_;
};

enum class Split { kTrain, kValidation, kTest };
const char* to_string(Split split);
Split split_from_string(std::string_view text);

// Images stored contiguously in N x C x H x W order with one label each.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  // Validates label range, pixel range and element counts.
  LabeledDataset(std::string name, Split split, std::size_t num_classes, Shape image_shape,
                 std::vector<float> pixels, std::vector<std::int32_t> labels);
  static LabeledDataset empty_like(const LabeledDataset& other);

  const std::string& name() const noexcept { return name_; }
  Split split() const noexcept { return split_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const Shape& image_shape() const noexcept { return image_shape_; }
  std::size_t image_size() const { return shape_size(image_shape_); }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const float> pixels() const noexcept { return pixels_; }
  std::span<const std::int32_t> labels() const noexcept { return labels_; }
  std::span<const float> image_pixels(std::size_t i) const;
  Image image(std::size_t i) const;
  std::int32_t label(std::size_t i) const { return labels_.at(i); }

  std::vector<std::size_t> class_counts() const;

  // Copy holding the given images, in the given order.
  LabeledDataset subset(std::span<const std::size_t> indices) const;
  // Batch tensor [n, C, H, W] of the selected images.
  Tensor batch(std::span<const std::size_t> indices) const;
  Tensor batch(std::size_t begin, std::size_t end) const;

  LabeledDataset renamed(std::string name, Split split) const;

  bool operator==(const LabeledDataset&) const = default;

 private:
  std::string name_;
  Split split_ = Split::kTrain;
  std::size_t num_classes_ = 0;
  Shape image_shape_{1, 1, 1};
  std::vector<float> pixels_;
  std::vector<std::int32_t> labels_;
};

// Builds a dataset image by image; used by parsers and transforms.
class DatasetBuilder {
 public:
  DatasetBuilder(std::string name, Split split, std::size_t num_classes, Shape image_shape);
  void reserve(std::size_t count);
  void add(std::span<const float> pixels, std::int32_t label);
  void add(const Image& image, std::int32_t label) { add(image.pixels().data(), label); }
  std::size_t size() const noexcept { return labels_.size(); }
  LabeledDataset build() &&;

 private:
  std::string name_;
  Split split_;
  std::size_t num_classes_;
  Shape image_shape_;
  std::vector<float> pixels_;
  std::vector<std::int32_t> labels_;
};

// Appends b to a; both must share image shape and class count.
LabeledDataset concatenate(const LabeledDataset& a, const LabeledDataset& b);

// Train / validation / test splits of one corpus.
struct DatasetBundle {
  std::string name;
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;

  const LabeledDataset& split(Split s) const;
  bool operator==(const DatasetBundle&) const = default;
};

// Expected layout of the corpora used in the experiments.
struct DatasetCard {
  std::string name;
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::size_t channels = 0;
  std::size_t classes = 0;
  Shape image_shape;  // after preparation (MNIST is padded to 32x32)
};

// MNIST, CIFAR-10, GTSRB-color, GTSRB-gray (case-insensitive; also mnist,
// cifar10, gtsrb-color, gtsrb-gray).
const DatasetCard& dataset_card(std::string_view name);
const std::vector<DatasetCard>& dataset_cards();

}  // namespace negcnn::data
