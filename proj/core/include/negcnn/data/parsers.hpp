#pragma once

#include <string>
#include <vector>

#include "negcnn/data/dataset.hpp"

namespace negcnn::data {

// MNIST IDX pair. Big-endian headers; images magic 0x00000803 (2051),
// labels magic 0x00000801 (2049). Pixels are scaled from [0, 255] to [0, 1].
// Throws FormatError (with byte offset) on bad magic, truncation or a count
// mismatch between the two files.
LabeledDataset parse_mnist_idx(const std::string& images_path, const std::string& labels_path,
                               Split split = Split::kTrain);

// CIFAR-10 binary batches: 3,073-byte records of one label byte followed by
// 1,024 R, 1,024 G and 1,024 B bytes. Records keep file order across batches.
LabeledDataset parse_cifar10(const std::vector<std::string>& batch_paths,
                             Split split = Split::kTrain);

// GTSRB in its distribution layout. Either a per-class tree
//   <root>/<class_id>/GT-<class_id>.csv + images
// or a flat directory with one GT-*.csv carrying a ClassId column (the test
// set). CSVs are semicolon-separated with a header naming Filename and,
// for the flat layout, ClassId. Every image is decoded, resized bilinearly
// over the full frame (no ROI crop) to 3x32x32, and ordered by
// (class, filename). Throws IngestionError naming the failing file.
LabeledDataset ingest_gtsrb(const std::string& root_dir, Split split = Split::kTrain);

// Corpus loaders producing the train/validation/test splits of the matching
// DatasetCard. Directory layouts:
//   MNIST     <dir>/train-images-idx3-ubyte, train-labels-idx1-ubyte,
//             t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte
//             validation = last 10,000 training images; padded to 32x32.
//   CIFAR-10  <dir>/data_batch_{1..5}.bin, test_batch.bin
//             validation = last 5,000 training images.
//   GTSRB     <dir>/Final_Training/Images, <dir>/Final_Test/Images
//             validation = last 20% (rounded) of each class in canonical order.
DatasetBundle load_mnist(const std::string& dir);
DatasetBundle load_cifar10(const std::string& dir);
DatasetBundle load_gtsrb(const std::string& dir, bool grayscale);
// Dispatches on a DatasetCard name.
DatasetBundle load_corpus(const std::string& card_name, const std::string& dir);

// Splits off the last `count` images; returns (head, tail).
std::pair<LabeledDataset, LabeledDataset> split_tail(const LabeledDataset& ds, std::size_t count);
// Splits off the last round(fraction * n_c) images of every class c.
std::pair<LabeledDataset, LabeledDataset> split_tail_per_class(const LabeledDataset& ds,
                                                               double fraction);

}  // namespace negcnn::data
