#include "negcnn/data/parsers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "negcnn/binary_io.hpp"
#include "negcnn/data/raster.hpp"
#include "negcnn/data/transforms.hpp"
#include "negcnn/errors.hpp"

namespace negcnn::data {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;
constexpr std::size_t kCifarPlane = 1024;
constexpr std::size_t kGtsrbClasses = 43;
constexpr std::size_t kGtsrbSide = 32;

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(path + ": truncated IDX header", bytes.size() < offset ? 0 : offset);
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

// Pixel lookup table: k / 255 snapped to the pixel grid.
const std::array<float, 256>& byte_to_pixel() {
  static const std::array<float, 256> table = [] {
    std::array<float, 256> t{};
    for (std::size_t k = 0; k < 256; ++k) t[k] = snap_pixel(static_cast<double>(k) / 255.0);
    return t;
  }();
  return table;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_semicolon(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ';')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ';') out.emplace_back();
  return out;
}

struct GtsrbEntry {
  std::int32_t class_id;
  std::string filename;
  fs::path path;
};

// Reads one annotation CSV. `fallback_class` is used when the CSV has no
// ClassId column (negative: column required).
std::vector<GtsrbEntry> read_gtsrb_csv(const fs::path& csv, std::int32_t fallback_class) {
  std::ifstream in(csv);
  if (!in) throw IngestionError("cannot open annotation file", csv.string());
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("empty annotation file", csv.string());
  const auto header = split_semicolon(trim(line));
  const auto find_col = [&](const std::string& name) -> long {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<long>(it - header.begin());
  };
  const long file_col = find_col("Filename");
  const long class_col = find_col("ClassId");
  if (file_col < 0) throw IngestionError("annotation header lacks a Filename column", csv.string());
  if (class_col < 0 && fallback_class < 0) {
    throw IngestionError("annotation header lacks a ClassId column", csv.string());
  }
  std::vector<GtsrbEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split_semicolon(line);
    const auto where = csv.string() + " line " + std::to_string(line_no);
    if (fields.size() != header.size()) {
      throw IngestionError("malformed annotation row (expected " + std::to_string(header.size()) +
                               " fields, got " + std::to_string(fields.size()) + ")",
                           where);
    }
    std::int32_t cls = fallback_class;
    if (class_col >= 0) {
      try {
        std::size_t used = 0;
        const std::string& text = fields[static_cast<std::size_t>(class_col)];
        cls = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw IngestionError("malformed ClassId", where);
      }
    }
    if (cls < 0 || static_cast<std::size_t>(cls) >= kGtsrbClasses) {
      throw IngestionError("ClassId " + std::to_string(cls) + " outside [0, 43)", where);
    }
    const std::string& name = fields[static_cast<std::size_t>(file_col)];
    if (name.empty()) throw IngestionError("empty Filename", where);
    entries.push_back({cls, name, csv.parent_path() / name});
  }
  return entries;
}

std::int32_t class_from_dirname(const fs::path& dir) {
  const std::string name = dir.filename().string();
  if (name.empty() || !std::all_of(name.begin(), name.end(), ::isdigit)) return -1;
  return std::stoi(name);
}

}  // namespace

LabeledDataset parse_mnist_idx(const std::string& images_path, const std::string& labels_path,
                               Split split) {
  const auto images = io::read_file(images_path);
  const auto labels = io::read_file(labels_path);
  if (images.size() < 4) throw FormatError(images_path + ": file too short for an IDX header", 0);
  if (labels.size() < 4) throw FormatError(labels_path + ": file too short for an IDX header", 0);
  if (const auto magic = read_be32(images, 0, images_path); magic != kIdxImagesMagic) {
    throw FormatError(images_path + ": bad IDX image magic " + std::to_string(magic) +
                          " (expected 2051)", 0);
  }
  if (const auto magic = read_be32(labels, 0, labels_path); magic != kIdxLabelsMagic) {
    throw FormatError(labels_path + ": bad IDX label magic " + std::to_string(magic) +
                          " (expected 2049)", 0);
  }
  const std::size_t count = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t label_count = read_be32(labels, 4, labels_path);
  if (count != label_count) {
    throw FormatError("count mismatch: " + std::to_string(count) + " images in " + images_path +
                          " but " + std::to_string(label_count) + " labels in " + labels_path, 4);
  }
  if (rows == 0 || cols == 0) throw FormatError(images_path + ": zero image dimension", 8);
  const std::size_t plane = rows * cols;
  if (images.size() != 16 + count * plane) {
    throw FormatError(images_path + ": expected " + std::to_string(16 + count * plane) +
                          " bytes, file has " + std::to_string(images.size()),
                      std::min(images.size(), 16 + count * plane));
  }
  if (labels.size() != 8 + count) {
    throw FormatError(labels_path + ": expected " + std::to_string(8 + count) +
                          " bytes, file has " + std::to_string(labels.size()),
                      std::min(labels.size(), 8 + count));
  }
  const auto& lut = byte_to_pixel();
  std::vector<float> px(count * plane);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = lut[images[16 + i]];
  std::vector<std::int32_t> lb(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (labels[8 + i] > 9) {
      throw FormatError(labels_path + ": label " + std::to_string(labels[8 + i]) + " outside 0..9",
                        8 + i);
    }
    lb[i] = labels[8 + i];
  }
  return LabeledDataset("MNIST", split, 10, {1, rows, cols}, std::move(px), std::move(lb));
}

LabeledDataset parse_cifar10(const std::vector<std::string>& batch_paths, Split split) {
  DatasetBuilder builder("CIFAR-10", split, 10, {3, 32, 32});
  const auto& lut = byte_to_pixel();
  std::vector<float> image(3 * kCifarPlane);
  for (const auto& path : batch_paths) {
    const auto bytes = io::read_file(path);
    if (bytes.size() % kCifarRecord != 0) {
      throw FormatError(path + ": size " + std::to_string(bytes.size()) +
                            " is not a multiple of the 3,073-byte record",
                        bytes.size() - bytes.size() % kCifarRecord);
    }
    builder.reserve(builder.size() + bytes.size() / kCifarRecord);
    for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord) {
      if (bytes[off] > 9) {
        throw FormatError(path + ": label " + std::to_string(bytes[off]) + " outside 0..9", off);
      }
      for (std::size_t i = 0; i < 3 * kCifarPlane; ++i) image[i] = lut[bytes[off + 1 + i]];
      builder.add(image, bytes[off]);
    }
  }
  return std::move(builder).build();
}

LabeledDataset ingest_gtsrb(const std::string& root_dir, Split split) {
  const fs::path root(root_dir);
  if (!fs::is_directory(root)) throw IngestionError("GTSRB directory not found", root_dir);

  std::vector<GtsrbEntry> entries;
  std::vector<fs::path> class_dirs;
  std::vector<fs::path> flat_csvs;
  for (const auto& item : fs::directory_iterator(root)) {
    if (item.is_directory() && class_from_dirname(item.path()) >= 0) {
      class_dirs.push_back(item.path());
    } else if (item.is_regular_file() && item.path().extension() == ".csv" &&
               item.path().filename().string().starts_with("GT-")) {
      flat_csvs.push_back(item.path());
    }
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  std::sort(flat_csvs.begin(), flat_csvs.end());

  if (!class_dirs.empty()) {
    for (const auto& dir : class_dirs) {
      const std::int32_t cls = class_from_dirname(dir);
      if (static_cast<std::size_t>(cls) >= kGtsrbClasses) {
        throw IngestionError("class directory outside [0, 43)", dir.string());
      }
      std::vector<fs::path> csvs;
      for (const auto& item : fs::directory_iterator(dir)) {
        if (item.is_regular_file() && item.path().extension() == ".csv") csvs.push_back(item.path());
      }
      if (csvs.size() != 1) {
        throw IngestionError("expected exactly one GT-<class>.csv annotation file", dir.string());
      }
      auto rows = read_gtsrb_csv(csvs.front(), cls);
      for (auto& row : rows) {
        if (row.class_id != cls) {
          throw IngestionError("ClassId " + std::to_string(row.class_id) +
                                   " disagrees with its directory", csvs.front().string());
        }
      }
      entries.insert(entries.end(), rows.begin(), rows.end());
    }
  } else if (!flat_csvs.empty()) {
    for (const auto& csv : flat_csvs) {
      auto rows = read_gtsrb_csv(csv, -1);
      entries.insert(entries.end(), rows.begin(), rows.end());
    }
  } else {
    throw IngestionError("no class directories or GT-*.csv annotations found", root_dir);
  }

  std::sort(entries.begin(), entries.end(), [](const GtsrbEntry& a, const GtsrbEntry& b) {
    return a.class_id != b.class_id ? a.class_id < b.class_id : a.filename < b.filename;
  });

  DatasetBuilder builder("GTSRB-color", split, kGtsrbClasses, {3, kGtsrbSide, kGtsrbSide});
  builder.reserve(entries.size());
  for (const auto& entry : entries) {
    Image img = [&] {
      try {
        return read_raster_rgb(entry.path.string());
      } catch (const FormatError& e) {
        throw IngestionError(std::string("undecodable image (") + e.what() + ")", entry.path.string());
      }
    }();
    builder.add(resize_bilinear(img, kGtsrbSide, kGtsrbSide), entry.class_id);
  }
  return std::move(builder).build();
}

std::pair<LabeledDataset, LabeledDataset> split_tail(const LabeledDataset& ds, std::size_t count) {
  if (count > ds.size()) throw ContractError("split_tail: not enough images");
  std::vector<std::size_t> head(ds.size() - count), tail(count);
  std::iota(head.begin(), head.end(), std::size_t{0});
  std::iota(tail.begin(), tail.end(), ds.size() - count);
  return {ds.subset(head).renamed(ds.name(), Split::kTrain),
          ds.subset(tail).renamed(ds.name(), Split::kValidation)};
}

std::pair<LabeledDataset, LabeledDataset> split_tail_per_class(const LabeledDataset& ds,
                                                               double fraction) {
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
  std::vector<std::size_t> head, tail;
  for (const auto& members : by_class) {
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    const std::size_t cut = members.size() - std::min(take, members.size());
    head.insert(head.end(), members.begin(), members.begin() + static_cast<long>(cut));
    tail.insert(tail.end(), members.begin() + static_cast<long>(cut), members.end());
  }
  std::sort(head.begin(), head.end());
  std::sort(tail.begin(), tail.end());
  return {ds.subset(head).renamed(ds.name(), Split::kTrain),
          ds.subset(tail).renamed(ds.name(), Split::kValidation)};
}

DatasetBundle load_mnist(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IngestionError("MNIST directory not found", dir);
  const auto train_all = parse_mnist_idx((root / "train-images-idx3-ubyte").string(),
                                         (root / "train-labels-idx1-ubyte").string(), Split::kTrain);
  const auto test = parse_mnist_idx((root / "t10k-images-idx3-ubyte").string(),
                                    (root / "t10k-labels-idx1-ubyte").string(), Split::kTest);
  auto [train, validation] = split_tail(train_all, 10000);
  return {"MNIST", pad_to(train, 32), pad_to(validation, 32), pad_to(test, 32)};
}

DatasetBundle load_cifar10(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IngestionError("CIFAR-10 directory not found", dir);
  std::vector<std::string> batches;
  for (int i = 1; i <= 5; ++i) batches.push_back((root / ("data_batch_" + std::to_string(i) + ".bin")).string());
  const auto train_all = parse_cifar10(batches, Split::kTrain);
  auto test = parse_cifar10({(root / "test_batch.bin").string()}, Split::kTest);
  auto [train, validation] = split_tail(train_all, 5000);
  return {"CIFAR-10", std::move(train), std::move(validation), std::move(test)};
}

DatasetBundle load_gtsrb(const std::string& dir, bool grayscale) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IngestionError("GTSRB directory not found", dir);
  fs::path train_dir = root / "Final_Training" / "Images";
  fs::path test_dir = root / "Final_Test" / "Images";
  if (!fs::is_directory(train_dir)) train_dir = root / "train";
  if (!fs::is_directory(test_dir)) test_dir = root / "test";
  const auto train_all = ingest_gtsrb(train_dir.string(), Split::kTrain);
  auto test = ingest_gtsrb(test_dir.string(), Split::kTest);
  auto [train, validation] = split_tail_per_class(train_all, 0.2);
  const std::string name = grayscale ? "GTSRB-gray" : "GTSRB-color";
  if (grayscale) {
    return {name, to_grayscale(train).renamed(name, Split::kTrain),
            to_grayscale(validation).renamed(name, Split::kValidation),
            to_grayscale(test).renamed(name, Split::kTest)};
  }
  return {name, train.renamed(name, Split::kTrain), validation.renamed(name, Split::kValidation),
          test.renamed(name, Split::kTest)};
}

DatasetBundle load_corpus(const std::string& card_name, const std::string& dir) {
  const DatasetCard& card = dataset_card(card_name);
  if (card.name == "MNIST") return load_mnist(dir);
  if (card.name == "CIFAR-10") return load_cifar10(dir);
  return load_gtsrb(dir, card.name == "GTSRB-gray");
}

}  // namespace negcnn::data
