#include "negcnn/data/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "negcnn/binary_io.hpp"
#include "negcnn/errors.hpp"

namespace negcnn::data {

namespace {

class NetpbmReader {
 public:
  NetpbmReader(const std::vector<std::uint8_t>& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  Image decode() {
    if (bytes_.size() < 2 || bytes_[0] != 'P') fail("not a netpbm file", 0);
    const char kind = static_cast<char>(bytes_[1]);
    pos_ = 2;
    const bool ascii = kind == '2' || kind == '3';
    const bool color = kind == '3' || kind == '6';
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') fail("unsupported netpbm type", 1);
    const std::size_t width = header_value();
    const std::size_t height = header_value();
    const std::size_t maxval = header_value();
    if (width == 0 || height == 0) fail("zero image dimension", pos_);
    if (maxval == 0 || maxval > 65535) fail("maxval outside 1..65535", pos_);
    const std::size_t channels = color ? 3 : 1;
    const std::size_t samples = width * height * channels;
    std::vector<std::uint32_t> raw(samples);
    if (ascii) {
      for (auto& v : raw) v = static_cast<std::uint32_t>(header_value());
    } else {
      ++pos_;  // single whitespace byte after maxval
      const std::size_t bps = maxval > 255 ? 2 : 1;
      if (bytes_.size() < pos_ + samples * bps) fail("truncated pixel data", bytes_.size());
      for (std::size_t i = 0; i < samples; ++i) {
        raw[i] = bps == 1 ? bytes_[pos_ + i]
                          : (std::uint32_t{bytes_[pos_ + 2 * i]} << 8) | bytes_[pos_ + 2 * i + 1];
      }
    }
    Tensor px({channels, height, width});
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t c = 0; c < channels; ++c) {
          const std::uint32_t v = std::min<std::uint32_t>(raw[(y * width + x) * channels + c],
                                                          static_cast<std::uint32_t>(maxval));
          px[(c * height + y) * width + x] =
              snap_pixel(static_cast<double>(v) / static_cast<double>(maxval));
        }
      }
    }
    return Image(std::move(px));
  }

 private:
  [[noreturn]] void fail(const std::string& why, std::size_t offset) const {
    throw FormatError(path_ + ": " + why, offset);
  }

  std::size_t header_value() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail("expected a number", pos_);
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1u << 24)) fail("header value too large", pos_);
      ++pos_;
    }
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

bool is_png(const std::vector<std::uint8_t>& bytes) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::equal(kSig, kSig + 8, bytes.begin());
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(path + ": " + image.message, 0);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw FormatError(path + ": " + message, 0);
  }
  const std::size_t channels = color ? 3 : 1;
  const std::size_t h = image.height, w = image.width;
  Tensor px({channels, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        px[(c * h + y) * w + x] = snap_pixel(buffer[(y * w + x) * channels + c] / 255.0);
      }
    }
  }
  return Image(std::move(px));
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Image read_raster(const std::string& path) {
  const auto bytes = io::read_file(path);
  if (is_png(bytes)) return decode_png(bytes, path);
  return NetpbmReader(bytes, path).decode();
}

Image read_raster_rgb(const std::string& path) {
  Image img = read_raster(path);
  if (img.channels() == 3) return img;
  const std::size_t plane = img.height() * img.width();
  Tensor rgb({3, img.height(), img.width()});
  for (std::size_t c = 0; c < 3; ++c) {
    std::copy_n(img.pixels().data().begin(), plane, rgb.data().begin() + c * plane);
  }
  return Image(std::move(rgb));
}

void write_raster(const std::string& path, const Image& image) {
  const std::size_t c = image.channels(), h = image.height(), w = image.width();
  if (c != 1 && c != 3) throw DimensionError("write_raster needs 1 or 3 channels");
  std::vector<std::uint8_t> interleaved(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) interleaved[(y * w + x) * c + ch] = to_byte(image.at(ch, y, x));
    }
  }
  const std::filesystem::path target(path);
  if (target.extension() == ".png") {
    png_image out{};
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(w);
    out.height = static_cast<png_uint_32>(h);
    out.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(out, size, 0, interleaved.data(), 0, nullptr)) {
      throw FormatError(path + ": " + out.message);
    }
    std::vector<std::uint8_t> encoded(size);
    if (!png_image_write_to_memory(&out, encoded.data(), &size, 0, interleaved.data(), 0, nullptr)) {
      throw FormatError(path + ": " + out.message);
    }
    encoded.resize(size);
    io::write_file_atomic(path, encoded);
    return;
  }
  io::ByteWriter writer;
  writer.bytes(std::string(c == 3 ? "P6\n" : "P5\n") + std::to_string(w) + " " + std::to_string(h) +
               "\n255\n");
  writer.raw(interleaved.data(), interleaved.size());
  io::write_file_atomic(path, writer.buffer());
}

}  // namespace negcnn::data
