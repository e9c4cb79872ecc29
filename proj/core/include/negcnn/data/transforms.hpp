#pragma once

#include <cstddef>
#include <cstdint>

#include "negcnn/data/dataset.hpp"

namespace negcnn::data {

// Pixel-wise complement: every value x becomes 1 - x.
Image negate(const Image& img);
LabeledDataset negate(const LabeledDataset& ds);

// Luma 0.299 R + 0.587 G + 0.114 B, clamped to [0, 1]. Needs 3 channels.
Image to_grayscale(const Image& img);
LabeledDataset to_grayscale(const LabeledDataset& ds);

// Zero-pads every image symmetrically to size x size.
LabeledDataset pad_to(const LabeledDataset& ds, std::size_t size);

// Bilinear resampling of the full frame with half-pixel centres.
Image resize_bilinear(const Image& img, std::size_t height, std::size_t width);

// Shift by (dx, dy) pixels; vacated pixels are filled with `fill`.
Image translate(const Image& img, int dx, int dy, float fill = 0.0f);
// Mirror along the vertical axis (left-right flip).
Image reflect_horizontal(const Image& img);

struct AugmentOptions {
  int shift = 2;
  bool translations = true;  // +-shift horizontally and vertically: 4 variants
  bool reflection = true;    // 1 horizontal reflection
  std::size_t variants() const { return (translations ? 4 : 0) + (reflection ? 1 : 0); }
};

// Originals first, then for each image its variants in the order
// right, left, down, up, reflected. Labels are copied.
LabeledDataset augment_translate_reflect(const LabeledDataset& ds, const AugmentOptions& options = {});

// n images drawn without replacement, stratified by class with
// largest-remainder allocation, then negated. Deterministic per seed.
LabeledDataset take_negative_subset(const LabeledDataset& ds, std::size_t n, std::uint64_t seed);

}  // namespace negcnn::data
