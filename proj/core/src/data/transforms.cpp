#include "negcnn/data/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "negcnn/errors.hpp"

namespace negcnn::data {

Image negate(const Image& img) {
  Tensor out(img.pixels().shape());
  const auto src = img.pixels().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = 1.0f - src[i];
  return Image(std::move(out));
}

LabeledDataset negate(const LabeledDataset& ds) {
  std::vector<float> px(ds.pixels().begin(), ds.pixels().end());
  for (float& v : px) v = 1.0f - v;
  return LabeledDataset(ds.name(), ds.split(), ds.num_classes(), ds.image_shape(), std::move(px),
                        std::vector<std::int32_t>(ds.labels().begin(), ds.labels().end()));
}

namespace {

void gray_into(std::span<const float> rgb, std::size_t plane, std::span<float> out) {
  for (std::size_t i = 0; i < plane; ++i) {
    const double luma = 0.299 * rgb[i] + 0.587 * rgb[plane + i] + 0.114 * rgb[2 * plane + i];
    out[i] = snap_pixel(luma);
  }
}

}  // namespace

Image to_grayscale(const Image& img) {
  if (img.channels() != 3) {
    throw DimensionError("to_grayscale needs 3 channels, got " + std::to_string(img.channels()));
  }
  const std::size_t plane = img.height() * img.width();
  Tensor out({1, img.height(), img.width()});
  gray_into(img.pixels().data(), plane, out.data());
  return Image(std::move(out));
}

LabeledDataset to_grayscale(const LabeledDataset& ds) {
  if (ds.image_shape()[0] != 3) {
    throw DimensionError("to_grayscale needs 3 channels, got " +
                         shape_to_string(ds.image_shape()));
  }
  const std::size_t plane = ds.image_shape()[1] * ds.image_shape()[2];
  std::vector<float> px(ds.size() * plane);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    gray_into(ds.image_pixels(i), plane, std::span<float>(px).subspan(i * plane, plane));
  }
  return LabeledDataset(ds.name(), ds.split(), ds.num_classes(),
                        {1, ds.image_shape()[1], ds.image_shape()[2]}, std::move(px),
                        std::vector<std::int32_t>(ds.labels().begin(), ds.labels().end()));
}

LabeledDataset pad_to(const LabeledDataset& ds, std::size_t size) {
  const std::size_t c = ds.image_shape()[0], h = ds.image_shape()[1], w = ds.image_shape()[2];
  if (size < h || size < w) {
    throw DimensionError("pad_to " + std::to_string(size) + " is smaller than " +
                         shape_to_string(ds.image_shape()));
  }
  const std::size_t top = (size - h) / 2, left = (size - w) / 2;
  const std::size_t out_size = c * size * size;
  std::vector<float> px(ds.size() * out_size, 0.0f);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto src = ds.image_pixels(i);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h; ++y) {
        std::copy_n(src.begin() + (ch * h + y) * w, w,
                    px.begin() + i * out_size + (ch * size + y + top) * size + left);
      }
    }
  }
  return LabeledDataset(ds.name(), ds.split(), ds.num_classes(), {c, size, size}, std::move(px),
                        std::vector<std::int32_t>(ds.labels().begin(), ds.labels().end()));
}

Image resize_bilinear(const Image& img, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw DimensionError("resize target must be non-empty");
  const std::size_t c = img.channels(), h = img.height(), w = img.width();
  Tensor out({c, height, width});
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = img.at(ch, y0, x0) * (1.0 - wx) + img.at(ch, y0, x1) * wx;
        const double bottom = img.at(ch, y1, x0) * (1.0 - wx) + img.at(ch, y1, x1) * wx;
        out[(ch * height + y) * width + x] = snap_pixel(top * (1.0 - wy) + bottom * wy);
      }
    }
  }
  return Image(std::move(out));
}

Image translate(const Image& img, int dx, int dy, float fill) {
  const std::size_t c = img.channels(), h = img.height(), w = img.width();
  Tensor out = Tensor::full({c, h, w}, snap_pixel(fill));
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const long sy = static_cast<long>(y) - dy;
      if (sy < 0 || sy >= static_cast<long>(h)) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const long sx = static_cast<long>(x) - dx;
        if (sx < 0 || sx >= static_cast<long>(w)) continue;
        out[(ch * h + y) * w + x] =
            img.at(ch, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
      }
    }
  }
  return Image(std::move(out));
}

Image reflect_horizontal(const Image& img) {
  const std::size_t c = img.channels(), h = img.height(), w = img.width();
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out[(ch * h + y) * w + x] = img.at(ch, y, w - 1 - x);
    }
  }
  return Image(std::move(out));
}

LabeledDataset augment_translate_reflect(const LabeledDataset& ds, const AugmentOptions& options) {
  DatasetBuilder builder(ds.name(), ds.split(), ds.num_classes(), ds.image_shape());
  builder.reserve(ds.size() * (1 + options.variants()));
  for (std::size_t i = 0; i < ds.size(); ++i) builder.add(ds.image_pixels(i), ds.label(i));
  const int s = options.shift;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Image img = ds.image(i);
    if (options.translations) {
      builder.add(translate(img, s, 0), ds.label(i));
      builder.add(translate(img, -s, 0), ds.label(i));
      builder.add(translate(img, 0, s), ds.label(i));
      builder.add(translate(img, 0, -s), ds.label(i));
    }
    if (options.reflection) builder.add(reflect_horizontal(img), ds.label(i));
  }
  return std::move(builder).build();
}

LabeledDataset take_negative_subset(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size()) {
    throw ContractError("take_negative_subset: requested " + std::to_string(n) + " of " +
                        std::to_string(ds.size()) + " images");
  }
  const std::size_t k = ds.num_classes();
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
  }

  // Largest-remainder apportionment of n over the class sizes.
  std::vector<std::size_t> quota(k, 0);
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder, class)
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t scaled = n * by_class[c].size();
    quota[c] = ds.empty() ? 0 : scaled / ds.size();
    assigned += quota[c];
    if (!ds.empty()) remainders.emplace_back(scaled % ds.size(), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < n; ++j, ++assigned) ++quota[remainders[j].second];

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  for (std::size_t c = 0; c < k; ++c) {
    auto& members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<long>(quota[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  return negate(ds.subset(chosen));
}

}  // namespace negcnn::data
