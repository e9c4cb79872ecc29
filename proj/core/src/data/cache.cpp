#include "negcnn/data/cache.hpp"

#include "negcnn/binary_io.hpp"

namespace negcnn::data {

void save_bundle(const DatasetBundle& bundle, const std::string& path) {
  io::ByteWriter w;
  w.raw(kCacheMagic, 4);
  w.u32(kCacheVersion);
  w.string(bundle.name);
  w.u32(3);
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    const LabeledDataset& ds = bundle.split(s);
    w.u32(static_cast<std::uint32_t>(s));
    w.u32(static_cast<std::uint32_t>(ds.size()));
    for (std::size_t d : ds.image_shape()) w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(ds.num_classes()));
    w.array(ds.pixels());
    w.array(ds.labels());
  }
  w.u32(io::crc32(w.buffer()));
  io::write_file_atomic(path, w.buffer());
}

DatasetBundle load_bundle(const std::string& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes, path);
  if (r.bytes(4) != std::string(kCacheMagic, 4)) {
    throw FormatError(path + ": not a dataset cache (bad magic)", 0);
  }
  if (const auto version = r.u32(); version != kCacheVersion) {
    throw FormatError(path + ": unsupported cache version " + std::to_string(version), 4);
  }
  if (bytes.size() < 4) r.fail("missing checksum");
  DatasetBundle bundle;
  bundle.name = r.string(256);
  const std::uint32_t splits = r.u32();
  if (splits != 3) r.fail("expected 3 splits, found " + std::to_string(splits));
  for (std::uint32_t i = 0; i < splits; ++i) {
    const std::uint32_t split_id = r.u32();
    if (split_id > 2) r.fail("bad split id");
    const std::size_t count = r.u32();
    const std::size_t c = r.u32(), h = r.u32(), wd = r.u32();
    const std::size_t classes = r.u32();
    if (c == 0 || h == 0 || wd == 0 || classes == 0) r.fail("zero dimension in split header");
    auto pixels = r.array<float>(count * c * h * wd);
    auto labels = r.array<std::int32_t>(count);
    const auto split = static_cast<Split>(split_id);
    LabeledDataset ds(bundle.name, split, classes, {c, h, wd}, std::move(pixels), std::move(labels));
    switch (split) {
      case Split::kTrain:
        bundle.train = std::move(ds);
        break;
      case Split::kValidation:
        bundle.validation = std::move(ds);
        break;
      case Split::kTest:
        bundle.test = std::move(ds);
        break;
    }
  }
  const std::size_t body = r.offset();
  const std::uint32_t stored = r.u32();
  if (r.remaining() != 0) r.fail("trailing bytes after checksum");
  if (stored != io::crc32(std::span<const std::uint8_t>(bytes).first(body))) {
    throw FormatError(path + ": checksum mismatch", body);
  }
  return bundle;
}

}  // namespace negcnn::data
