#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "negcnn/tensor.hpp"

namespace negcnn::nn {

enum class LayerKind { kConv, kMaxPool, kFullyConnected, kSoftmax };

enum class Padding { kValid, kSame };

// One line of an architecture file.
//   conv 5x5x6 [valid|same]   kernel 3 or 5, default padding valid
//   maxpool 2x2               window 2 or 4
//   fc 84 | fc classes        "classes" binds to the dataset's class count
//   softmax
struct LayerSpec {
  LayerKind kind = LayerKind::kSoftmax;
  std::size_t kernel = 0;
  std::size_t filters = 0;
  Padding padding = Padding::kValid;
  std::size_t window = 0;
  std::size_t units = 0;  // 0 on an fc layer means "num_classes"

  std::size_t pad_amount() const { return padding == Padding::kSame ? kernel / 2 : 0; }
  std::string to_text() const;
  bool operator==(const LayerSpec&) const = default;
};

struct ArchitectureSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  Shape input_shape{1, 32, 32};  // C x H x W
  std::size_t num_classes = 10;

  // Copy with the input shape and class count replaced.
  ArchitectureSpec bind(Shape input, std::size_t classes) const;
  std::string to_text() const;
  bool operator==(const ArchitectureSpec&) const = default;
};

// Parses the text form. Blank lines and '#' comments are ignored; optional
// header directives `name <text>`, `input CxHxW`, `classes K`.
// Throws FormatError with the line number on malformed input.
ArchitectureSpec parse_architecture(std::string_view text);
ArchitectureSpec load_architecture_file(const std::string& path);

// Architecture names shipped with the library:
// LeNet-5, MVGG-5, MVGG-6, MVGG-7, MVGG-8, MVGG-9.
const std::vector<std::string>& bundled_architecture_names();
std::string bundled_architecture_text(std::string_view name);
ArchitectureSpec bundled_architecture(std::string_view name);

// Accepts a bundled name or a path to an architecture file.
ArchitectureSpec resolve_architecture(const std::string& name_or_path);

// Per-layer output shapes (C x H x W for spatial layers, {units} after the
// first fc). Throws DimensionError naming the offending layer when a layer
// does not fit its input, or when the final layers are not `fc classes`
// followed by softmax.
std::vector<Shape> propagate_shapes(const ArchitectureSpec& spec);

// Total weights + biases implied by the spec.
std::size_t parameter_count(const ArchitectureSpec& spec);

}  // namespace negcnn::nn
