#include "negcnn/nn/inference.hpp"

#include "negcnn/errors.hpp"
#include "negcnn/exec_mode.hpp"

namespace negcnn::nn {

std::size_t argmax_row(const float* row, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::vector<std::int32_t> predict_labels(const Network& net, const data::LabeledDataset& ds,
                                         std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("predict_labels: batch size must be positive");
  if (ds.image_shape() != net.spec().input_shape) {
    throw DimensionError("dataset images " + shape_to_string(ds.image_shape()) +
                         " do not match network input " + shape_to_string(net.spec().input_shape));
  }
  std::vector<std::int32_t> out(ds.size());
  const std::size_t batches = (ds.size() + batch_size - 1) / batch_size;
  const std::size_t k = net.spec().num_classes;
  parallel_chunks(batches, [&](std::size_t, std::size_t first, std::size_t last) {
    for (std::size_t b = first; b < last; ++b) {
      const std::size_t begin = b * batch_size;
      const std::size_t end = std::min(ds.size(), begin + batch_size);
      const Tensor logits = predict_logits(net, ds.batch(begin, end));
      for (std::size_t i = begin; i < end; ++i) {
        out[i] = static_cast<std::int32_t>(argmax_row(logits.data().data() + (i - begin) * k, k));
      }
    }
  });
  return out;
}

}  // namespace negcnn::nn
