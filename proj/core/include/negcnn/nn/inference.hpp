#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "negcnn/data/dataset.hpp"
#include "negcnn/nn/network.hpp"

namespace negcnn::nn {

inline constexpr std::size_t kEvalBatch = 256;

// Argmax of the logits for every image; ties go to the lowest class index.
// Batches are independent, so fast mode evaluates them concurrently.
std::vector<std::int32_t> predict_labels(const Network& net, const data::LabeledDataset& ds,
                                         std::size_t batch_size = kEvalBatch);

std::size_t argmax_row(const float* row, std::size_t k);

}  // namespace negcnn::nn
