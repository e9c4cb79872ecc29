#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "negcnn/binary_io.hpp"
#include "negcnn/data/cache.hpp"
#include "negcnn/data/dataset.hpp"
#include "negcnn/data/parsers.hpp"
#include "negcnn/data/raster.hpp"
#include "negcnn/data/transforms.hpp"
#include "negcnn/errors.hpp"

using namespace negcnn;
using namespace negcnn::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("negcnn_datasets_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                           static_cast<std::streamsize>(bytes.size()));
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> idx_images(std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                                     std::uint8_t fill_base = 0) {
  std::vector<std::uint8_t> b;
  put_be32(b, 2051);
  put_be32(b, n);
  put_be32(b, rows);
  put_be32(b, cols);
  for (std::uint32_t i = 0; i < n * rows * cols; ++i) b.push_back(static_cast<std::uint8_t>(fill_base + i));
  return b;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> b;
  put_be32(b, 2049);
  put_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

Image random_image(std::mt19937_64& rng, std::size_t c, std::size_t h, std::size_t w) {
  std::uniform_int_distribution<int> byte(0, 255);
  Tensor t({c, h, w});
  for (auto& v : t.data()) v = snap_pixel(byte(rng) / 255.0);
  return Image(std::move(t));
}

LabeledDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t classes,
                              Shape shape = {1, 8, 8}) {
  DatasetBuilder b("synthetic", Split::kTrain, classes, shape);
  for (std::size_t i = 0; i < n; ++i) {
    b.add(random_image(rng, shape[0], shape[1], shape[2]), static_cast<std::int32_t>(i % classes));
  }
  return std::move(b).build();
}

void expect_in_unit_range(const LabeledDataset& ds) {
  for (float v : ds.pixels()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

}  // namespace

TEST(Negate, ZerosBecomeOnes) {
  EXPECT_EQ(negate(Image(Tensor({1, 4, 4}))).pixels(), Tensor::ones({1, 4, 4}));
}

TEST(Negate, IsBitExactInvolutionOnAllByteValues) {
  Tensor t({1, 16, 16});
  for (std::size_t i = 0; i < 256; ++i) t.data()[i] = snap_pixel(i / 255.0);
  const Image img(t);
  EXPECT_EQ(negate(negate(img)).pixels(), img.pixels());
}

TEST(Negate, MeanIsComplemented) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto img = random_image(rng, 3, 8, 8);
    const auto neg = negate(img);
    const auto mean = [](const Image& x) {
      const auto d = x.pixels().data();
      return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    };
    EXPECT_NEAR(mean(neg), 1.0 - mean(img), 1e-6);
  }
}

TEST(Negate, DatasetKeepsLabelsAndShape) {
  std::mt19937_64 rng(2);
  const auto ds = random_dataset(rng, 20, 4);
  const auto neg = negate(ds);
  EXPECT_EQ(neg.labels().size(), ds.labels().size());
  EXPECT_TRUE(std::equal(neg.labels().begin(), neg.labels().end(), ds.labels().begin()));
  EXPECT_EQ(negate(neg), ds);
}

TEST(Grayscale, KnownColors) {
  const auto white = to_grayscale(Image(Tensor::ones({3, 2, 2})));
  for (float v : white.pixels().data()) EXPECT_EQ(v, 1.0f);
  Tensor red({3, 1, 1});
  red.data()[0] = 1.0f;
  EXPECT_NEAR(to_grayscale(Image(red)).pixels().data()[0], 0.299, 1e-7);
}

TEST(Grayscale, MatchesScalarLoop) {
  std::mt19937_64 rng(3);
  const auto img = random_image(rng, 3, 6, 5);
  const auto g = to_grayscale(img);
  ASSERT_EQ(g.pixels().shape(), (Shape{1, 6, 5}));
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 5; ++x) {
      const double want = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
      EXPECT_NEAR(g.at(0, y, x), want, 1e-7);
    }
  EXPECT_THROW(to_grayscale(Image(Tensor({1, 2, 2}))), DimensionError);
}

TEST(Grayscale, CommutesWithNegation) {
  std::mt19937_64 rng(4);
  const auto img = random_image(rng, 3, 8, 8);
  const auto a = to_grayscale(negate(img)).pixels();
  const auto b = negate(to_grayscale(img)).pixels();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-6);
}

TEST(Image, RejectsOutOfRangePixels) {
  EXPECT_THROW(Image(Tensor::full({1, 2, 2}, 1.5f)), ContractError);
  EXPECT_THROW(Image(Tensor({2, 2})), DimensionError);
}

TEST(MnistIdx, ParsesSyntheticFiles) {
  const auto dir = scratch_dir("mnist");
  write_bytes(dir / "img", idx_images(3, 2, 2));
  write_bytes(dir / "lbl", idx_labels({7, 2, 1}));
  const auto ds = parse_mnist_idx((dir / "img").string(), (dir / "lbl").string());
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.image_shape(), (Shape{1, 2, 2}));
  EXPECT_EQ(ds.label(0), 7);
  EXPECT_EQ(ds.image(1).at(0, 0, 1), snap_pixel(5 / 255.0));
  EXPECT_EQ(parse_mnist_idx((dir / "img").string(), (dir / "lbl").string()), ds);
}

TEST(MnistIdx, EmptyFileFailsAtOffsetZero) {
  const auto dir = scratch_dir("mnist_empty");
  write_bytes(dir / "img", {});
  write_bytes(dir / "lbl", idx_labels({1}));
  try {
    parse_mnist_idx((dir / "img").string(), (dir / "lbl").string());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(MnistIdx, MagicTruncationAndCountChecks) {
  const auto dir = scratch_dir("mnist_bad");
  auto img = idx_images(2, 2, 2);
  write_bytes(dir / "lbl", idx_labels({1, 2}));

  auto swapped = img;
  swapped[3] = 0x01;  // 2049 where 2051 is expected
  write_bytes(dir / "img", swapped);
  EXPECT_THROW(parse_mnist_idx((dir / "img").string(), (dir / "lbl").string()), FormatError);
  // Labels file given as images.
  EXPECT_THROW(parse_mnist_idx((dir / "lbl").string(), (dir / "lbl").string()), FormatError);

  auto truncated = img;
  truncated.pop_back();
  write_bytes(dir / "img", truncated);
  try {
    parse_mnist_idx((dir / "img").string(), (dir / "lbl").string());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(e.offset(), FormatError::kUnknownOffset);
  }

  write_bytes(dir / "img", img);
  write_bytes(dir / "lbl", idx_labels({1, 2, 3}));
  EXPECT_THROW(parse_mnist_idx((dir / "img").string(), (dir / "lbl").string()), FormatError);
}

TEST(MnistIdx, OfficialFiles) {
  const fs::path dir = fs::path(NEGCNN_DATA_DIR) / "mnist";
  if (!fs::exists(dir / "t10k-images-idx3-ubyte")) GTEST_SKIP() << "MNIST not present in " << dir;
  const auto test = parse_mnist_idx((dir / "t10k-images-idx3-ubyte").string(),
                                    (dir / "t10k-labels-idx1-ubyte").string(), Split::kTest);
  EXPECT_EQ(test.size(), 10000u);
  EXPECT_EQ(test.image_shape(), (Shape{1, 28, 28}));
  EXPECT_EQ(test.label(0), 7);
  const std::vector<std::size_t> hist = {980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009};
  EXPECT_EQ(test.class_counts(), hist);

  const auto bundle = load_mnist(dir.string());
  const auto& card = dataset_card("MNIST");
  EXPECT_EQ(bundle.train.size(), card.train);
  EXPECT_EQ(bundle.validation.size(), card.validation);
  EXPECT_EQ(bundle.test.size(), card.test);
  EXPECT_EQ(bundle.train.image_shape(), (Shape{1, 32, 32}));
  expect_in_unit_range(bundle.train);
}

TEST(Cifar10, SingleZeroRecord) {
  const auto dir = scratch_dir("cifar_zero");
  write_bytes(dir / "b.bin", std::vector<std::uint8_t>(3073, 0));
  const auto ds = parse_cifar10({(dir / "b.bin").string()});
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.label(0), 0);
  EXPECT_EQ(ds.image(0).pixels(), Tensor({3, 32, 32}));
}

TEST(Cifar10, PlanarChannelOrderAndFileOrder) {
  const auto dir = scratch_dir("cifar_order");
  std::vector<std::uint8_t> rec(3073);
  rec[0] = 6;
  rec[1] = 255;            // R(0,0)
  rec[1 + 1024 + 33] = 51;  // G(1,1)
  rec[1 + 2048 + 1023] = 102;  // B(31,31)
  write_bytes(dir / "a.bin", rec);
  rec[0] = 9;
  write_bytes(dir / "b.bin", rec);
  const auto ds = parse_cifar10({(dir / "a.bin").string(), (dir / "b.bin").string()});
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.label(0), 6);
  EXPECT_EQ(ds.label(1), 9);
  const auto img = ds.image(0);
  EXPECT_EQ(img.at(0, 0, 0), 1.0f);
  EXPECT_EQ(img.at(1, 1, 1), snap_pixel(0.2));
  EXPECT_EQ(img.at(2, 31, 31), snap_pixel(0.4));
}

TEST(Cifar10, RecordArithmeticIsEnforced) {
  const auto dir = scratch_dir("cifar_bad");
  write_bytes(dir / "b.bin", std::vector<std::uint8_t>(3073 * 2 + 5, 0));
  EXPECT_THROW(parse_cifar10({(dir / "b.bin").string()}), FormatError);
  std::vector<std::uint8_t> rec(3073, 0);
  rec[0] = 10;
  write_bytes(dir / "c.bin", rec);
  EXPECT_THROW(parse_cifar10({(dir / "c.bin").string()}), FormatError);
  write_bytes(dir / "e.bin", {});
  EXPECT_EQ(parse_cifar10({(dir / "e.bin").string()}).size(), 0u);
}

TEST(Gtsrb, ConstantColorImageIsResizedToConstant) {
  const auto dir = scratch_dir("gtsrb_tree");
  for (int cls : {0, 2}) {
    char name[8];
    std::snprintf(name, sizeof name, "%05d", cls);
    const auto cdir = dir / name;
    fs::create_directories(cdir);
    Tensor t({3, 64, 48});
    for (std::size_t i = 0; i < 64 * 48; ++i) {
      t.data()[i] = snap_pixel(200 / 255.0);
      t.data()[64 * 48 + i] = snap_pixel(100 / 255.0);
      t.data()[2 * 64 * 48 + i] = snap_pixel(cls * 20 / 255.0);
    }
    write_raster((cdir / "b.ppm").string(), Image(t));
    write_raster((cdir / "a.png").string(), Image(t));
    std::ofstream(cdir / ("GT-" + std::string(name) + ".csv"))
        << "Filename;Width;Height;Roi.X1;Roi.Y1;Roi.X2;Roi.Y2;ClassId\n"
        << "b.ppm;48;64;5;5;40;60;" << cls << "\n"
        << "a.png;48;64;5;5;40;60;" << cls << "\n";
  }
  const auto ds = ingest_gtsrb(dir.string());
  ASSERT_EQ(ds.size(), 4u);
  EXPECT_EQ(ds.num_classes(), 43u);
  EXPECT_EQ(ds.image_shape(), (Shape{3, 32, 32}));
  EXPECT_EQ(std::vector<std::int32_t>(ds.labels().begin(), ds.labels().end()),
            (std::vector<std::int32_t>{0, 0, 2, 2}));
  for (std::size_t i = 0; i < 4; ++i) {
    const auto img = ds.image(i);
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) {
        EXPECT_NEAR(img.at(0, y, x), 200 / 255.0, 1 / 255.0);
        EXPECT_NEAR(img.at(1, y, x), 100 / 255.0, 1 / 255.0);
        EXPECT_NEAR(img.at(2, y, x), ds.label(i) * 20 / 255.0, 1 / 255.0);
      }
  }
}

TEST(Gtsrb, FlatTestLayout) {
  const auto dir = scratch_dir("gtsrb_flat");
  write_raster((dir / "00000.ppm").string(), Image(Tensor::ones({3, 40, 40})));
  write_raster((dir / "00001.ppm").string(), Image(Tensor({3, 40, 40})));
  std::ofstream(dir / "GT-final_test.csv") << "Filename;ClassId\n00001.ppm;42\n00000.ppm;5\n";
  const auto ds = ingest_gtsrb(dir.string(), Split::kTest);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.label(0), 5);
  EXPECT_EQ(ds.label(1), 42);
}

TEST(Gtsrb, MalformedRowNamesFile) {
  const auto dir = scratch_dir("gtsrb_badrow");
  fs::create_directories(dir / "00001");
  std::ofstream(dir / "00001" / "GT-00001.csv") << "Filename;ClassId\nx.ppm;abc\n";
  try {
    ingest_gtsrb(dir.string());
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(e.file().find("GT-00001.csv"), std::string::npos);
  }
}

TEST(Gtsrb, UnreadableImageNamesFile) {
  const auto dir = scratch_dir("gtsrb_badimg");
  fs::create_directories(dir / "00003");
  std::ofstream(dir / "00003" / "broken.ppm") << "P6\n4 4\n255\nxx";
  std::ofstream(dir / "00003" / "GT-00003.csv") << "Filename;ClassId\nbroken.ppm;3\n";
  try {
    ingest_gtsrb(dir.string());
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(e.file().find("broken.ppm"), std::string::npos);
  }
}

TEST(Splits, TailPerClassRoundsToNearest) {
  std::mt19937_64 rng(5);
  DatasetBuilder b("s", Split::kTrain, 3, {1, 2, 2});
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 7 + c; ++i) b.add(random_image(rng, 1, 2, 2), c);
  const auto [head, tail] = split_tail_per_class(std::move(b).build(), 0.2);
  // round(0.2 * 7) = 1, round(0.2 * 8) = 2, round(0.2 * 9) = 2
  EXPECT_EQ(tail.class_counts(), (std::vector<std::size_t>{1, 2, 2}));
  EXPECT_EQ(head.size() + tail.size(), 24u);
}

TEST(Splits, CardValues) {
  EXPECT_EQ(dataset_card("mnist").train, 50000u);
  EXPECT_EQ(dataset_card("CIFAR-10").validation, 5000u);
  EXPECT_EQ(dataset_card("gtsrb").train + dataset_card("gtsrb").validation, 39209u);
  EXPECT_EQ(dataset_card("GTSRB-gray").channels, 1u);
  EXPECT_THROW(dataset_card("imagenet"), ContractError);
}

TEST(Augment, SixVariantsPerImage) {
  std::mt19937_64 rng(6);
  const auto ds = random_dataset(rng, 100, 10);
  const auto aug = augment_translate_reflect(ds);
  EXPECT_EQ(aug.size(), 600u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(aug.image(i).pixels(), ds.image(i).pixels());
  expect_in_unit_range(aug);
  AugmentOptions none;
  none.translations = false;
  none.reflection = false;
  EXPECT_EQ(augment_translate_reflect(ds, none), ds);
}

TEST(Augment, TranslateAndReflectProperties) {
  EXPECT_EQ(translate(Image(Tensor({1, 8, 8})), 2, 0).pixels(), Tensor({1, 8, 8}));
  std::mt19937_64 rng(7);
  const auto img = random_image(rng, 3, 10, 12);
  EXPECT_EQ(reflect_horizontal(reflect_horizontal(img)).pixels(), img.pixels());
  for (auto [dx, dy] : {std::pair{2, 0}, {-2, 0}, {0, 2}, {0, -2}}) {
    const auto back = translate(translate(img, dx, dy), -dx, -dy);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 2; y < 8; ++y)
        for (std::size_t x = 2; x < 10; ++x) EXPECT_EQ(back.at(c, y, x), img.at(c, y, x));
  }
  const auto right = translate(img, 2, 0);
  EXPECT_EQ(right.at(1, 4, 5), img.at(1, 4, 3));
  EXPECT_EQ(right.at(1, 4, 0), 0.0f);
}

TEST(NegativeSubset, WholeAndEmpty) {
  std::mt19937_64 rng(8);
  const auto ds = random_dataset(rng, 50, 5);
  const auto all = take_negative_subset(ds, 50, 1);
  EXPECT_EQ(all, negate(ds));
  EXPECT_EQ(take_negative_subset(ds, 0, 1).size(), 0u);
  EXPECT_THROW(take_negative_subset(ds, 51, 1), ContractError);
}

TEST(NegativeSubset, StratifiedAndDeterministic) {
  std::mt19937_64 rng(9);
  DatasetBuilder b("s", Split::kTrain, 4, {1, 4, 4});
  const std::vector<int> per_class = {50, 30, 15, 5};
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < per_class[c]; ++i) b.add(random_image(rng, 1, 4, 4), c);
  const auto ds = std::move(b).build();
  for (std::size_t n : {1u, 7u, 33u, 64u, 99u}) {
    const auto sub = take_negative_subset(ds, n, 3);
    EXPECT_EQ(sub.size(), n);
    const auto counts = sub.class_counts();
    for (int c = 0; c < 4; ++c) {
      const double expected = static_cast<double>(n) * per_class[c] / 100.0;
      EXPECT_LE(std::abs(static_cast<double>(counts[c]) - expected), 1.0) << "n=" << n;
    }
    EXPECT_EQ(take_negative_subset(ds, n, 3), sub);
    expect_in_unit_range(sub);
  }
  EXPECT_NE(take_negative_subset(ds, 33, 3), take_negative_subset(ds, 33, 4));
}

TEST(Cache, RoundTripIsByteIdentical) {
  std::mt19937_64 rng(10);
  const DatasetBundle bundle{"demo", random_dataset(rng, 12, 3).renamed("demo", Split::kTrain),
                             random_dataset(rng, 4, 3).renamed("demo", Split::kValidation),
                             random_dataset(rng, 5, 3).renamed("demo", Split::kTest)};
  const auto dir = scratch_dir("cache");
  save_bundle(bundle, (dir / "a.ncds").string());
  const auto back = load_bundle((dir / "a.ncds").string());
  EXPECT_EQ(back.train, bundle.train);
  EXPECT_EQ(back.validation, bundle.validation);
  EXPECT_EQ(back.test, bundle.test);
  save_bundle(back, (dir / "b.ncds").string());
  EXPECT_EQ(io::read_file((dir / "a.ncds").string()), io::read_file((dir / "b.ncds").string()));

  auto bytes = io::read_file((dir / "a.ncds").string());
  bytes.resize(bytes.size() - 9);
  write_bytes(dir / "t.ncds", bytes);
  EXPECT_THROW(load_bundle((dir / "t.ncds").string()), FormatError);
  bytes = io::read_file((dir / "a.ncds").string());
  bytes[40] ^= 0x10;
  write_bytes(dir / "x.ncds", bytes);
  EXPECT_THROW(load_bundle((dir / "x.ncds").string()), FormatError);
}

TEST(Raster, PngAndNetpbmRoundTrip) {
  std::mt19937_64 rng(11);
  const auto dir = scratch_dir("raster");
  for (std::size_t c : {1u, 3u}) {
    const auto img = random_image(rng, c, 7, 9);
    for (const char* ext : {".png", ".pnm"}) {
      const auto p = (dir / (std::to_string(c) + ext)).string();
      write_raster(p, img);
      EXPECT_EQ(read_raster(p).pixels(), img.pixels()) << p;
    }
  }
  std::ofstream(dir / "junk.png") << "not an image";
  EXPECT_THROW(read_raster((dir / "junk.png").string()), FormatError);
  std::ofstream(dir / "ascii.pgm") << "P2\n2 1\n255\n0 255\n";
  const auto a = read_raster((dir / "ascii.pgm").string());
  EXPECT_EQ(a.at(0, 0, 1), 1.0f);
}
