#pragma once

#include <string>

#include "negcnn/data/dataset.hpp"

namespace negcnn::data {

// Cached dataset bundle, little-endian:
//
//   char[4]  magic "NCDS"
//   u32      version (1)
//   u32      bundle name length, then name bytes
//   u32      split count
//   per split:
//     u32    split (0 train, 1 validation, 2 test)
//     u32    count, C, H, W, num_classes
//     f32    pixels[count * C * H * W]
//     i32    labels[count]
//   u32      CRC-32 of every preceding byte
//
// Identical bundles serialize to identical bytes.
inline constexpr char kCacheMagic[4] = {'N', 'C', 'D', 'S'};
inline constexpr std::uint32_t kCacheVersion = 1;

void save_bundle(const DatasetBundle& bundle, const std::string& path);
// Throws FormatError on bad magic, version, truncation or checksum mismatch.
DatasetBundle load_bundle(const std::string& path);

}  // namespace negcnn::data
