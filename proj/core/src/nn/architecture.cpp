#include "negcnn/nn/architecture.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "negcnn/errors.hpp"

namespace negcnn::nn {

namespace {

struct BundledArchitecture {
  const char* name;
  const char* text;
};

constexpr BundledArchitecture kBundled[] = {
#include "bundled_architectures.inc"
};

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::size_t> parse_dims(const std::string& token, std::size_t line_no) {
  std::vector<std::size_t> dims;
  std::size_t start = 0;
  while (start <= token.size()) {
    const std::size_t end = std::min(token.find('x', start), token.size());
    std::size_t value = 0;
    const char* first = token.data() + start;
    const char* last = token.data() + end;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || value == 0) {
      throw FormatError("architecture line " + std::to_string(line_no) + ": bad dimension list '" +
                        token + "'");
    }
    dims.push_back(value);
    start = end + 1;
  }
  return dims;
}

[[noreturn]] void bad_line(std::size_t line_no, const std::string& why) {
  throw FormatError("architecture line " + std::to_string(line_no) + ": " + why);
}

LayerSpec parse_layer(const std::vector<std::string>& tok, std::size_t line_no) {
  LayerSpec layer;
  const std::string& kind = tok[0];
  if (kind == "conv") {
    if (tok.size() < 2 || tok.size() > 3) bad_line(line_no, "expected 'conv KxKxF [valid|same]'");
    const auto dims = parse_dims(tok[1], line_no);
    if (dims.size() != 3 || dims[0] != dims[1]) bad_line(line_no, "conv needs a square KxKxF shape");
    if (dims[0] != 3 && dims[0] != 5) bad_line(line_no, "conv kernel must be 3x3 or 5x5");
    layer.kind = LayerKind::kConv;
    layer.kernel = dims[0];
    layer.filters = dims[2];
    if (tok.size() == 3) {
      if (tok[2] == "same") {
        layer.padding = Padding::kSame;
      } else if (tok[2] != "valid") {
        bad_line(line_no, "padding must be 'valid' or 'same'");
      }
    }
  } else if (kind == "maxpool") {
    if (tok.size() != 2) bad_line(line_no, "expected 'maxpool SxS'");
    const auto dims = parse_dims(tok[1], line_no);
    if (dims.size() != 2 || dims[0] != dims[1]) bad_line(line_no, "maxpool needs a square SxS window");
    if (dims[0] != 2 && dims[0] != 4) bad_line(line_no, "maxpool window must be 2x2 or 4x4");
    layer.kind = LayerKind::kMaxPool;
    layer.window = dims[0];
  } else if (kind == "fc") {
    if (tok.size() != 2) bad_line(line_no, "expected 'fc UNITS' or 'fc classes'");
    layer.kind = LayerKind::kFullyConnected;
    if (tok[1] != "classes") {
      const auto dims = parse_dims(tok[1], line_no);
      if (dims.size() != 1) bad_line(line_no, "fc takes a single unit count");
      layer.units = dims[0];
    }
  } else if (kind == "softmax") {
    if (tok.size() != 1) bad_line(line_no, "softmax takes no arguments");
    layer.kind = LayerKind::kSoftmax;
  } else {
    bad_line(line_no, "unknown layer '" + kind + "'");
  }
  return layer;
}

}  // namespace

std::string LayerSpec::to_text() const {
  switch (kind) {
    case LayerKind::kConv:
      return "conv " + std::to_string(kernel) + "x" + std::to_string(kernel) + "x" +
             std::to_string(filters) + (padding == Padding::kSame ? " same" : " valid");
    case LayerKind::kMaxPool:
      return "maxpool " + std::to_string(window) + "x" + std::to_string(window);
    case LayerKind::kFullyConnected:
      return units == 0 ? std::string("fc classes") : "fc " + std::to_string(units);
    case LayerKind::kSoftmax:
      return "softmax";
  }
  return {};
}

ArchitectureSpec ArchitectureSpec::bind(Shape input, std::size_t classes) const {
  ArchitectureSpec out = *this;
  out.input_shape = std::move(input);
  out.num_classes = classes;
  return out;
}

std::string ArchitectureSpec::to_text() const {
  std::ostringstream os;
  os << "name " << name << '\n';
  os << "input " << input_shape.at(0) << 'x' << input_shape.at(1) << 'x' << input_shape.at(2)
     << '\n';
  os << "classes " << num_classes << '\n';
  for (const auto& layer : layers) os << layer.to_text() << '\n';
  return os.str();
}

ArchitectureSpec parse_architecture(std::string_view text) {
  ArchitectureSpec spec;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "name") {
      if (tok.size() < 2) bad_line(line_no, "name needs a value");
      const auto pos = line.find("name") + 4;
      const auto first = line.find_first_not_of(" \t", pos);
      const auto last = line.find_last_not_of(" \t\r");
      spec.name = line.substr(first, last - first + 1);
    } else if (tok[0] == "input") {
      if (tok.size() != 2) bad_line(line_no, "expected 'input CxHxW'");
      const auto dims = parse_dims(tok[1], line_no);
      if (dims.size() != 3) bad_line(line_no, "input needs CxHxW");
      spec.input_shape = Shape(dims.begin(), dims.end());
    } else if (tok[0] == "classes") {
      if (tok.size() != 2) bad_line(line_no, "expected 'classes K'");
      const auto dims = parse_dims(tok[1], line_no);
      if (dims.size() != 1) bad_line(line_no, "classes takes one value");
      spec.num_classes = dims[0];
    } else {
      spec.layers.push_back(parse_layer(tok, line_no));
    }
  }
  if (spec.layers.empty()) throw FormatError("architecture has no layers");
  if (spec.name.empty()) spec.name = "custom";
  return spec;
}

ArchitectureSpec load_architecture_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open architecture file", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_architecture(buf.str());
}

const std::vector<std::string>& bundled_architecture_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& b : kBundled) out.emplace_back(b.name);
    return out;
  }();
  return names;
}

std::string bundled_architecture_text(std::string_view name) {
  for (const auto& b : kBundled) {
    if (name == b.name) return b.text;
  }
  throw ContractError("unknown architecture '" + std::string(name) + "'");
}

ArchitectureSpec bundled_architecture(std::string_view name) {
  return parse_architecture(bundled_architecture_text(name));
}

ArchitectureSpec resolve_architecture(const std::string& name_or_path) {
  for (const auto& b : kBundled) {
    if (name_or_path == b.name) return parse_architecture(b.text);
  }
  if (std::filesystem::exists(name_or_path)) return load_architecture_file(name_or_path);
  throw ConfigError("'" + name_or_path +
                      "' is neither a bundled architecture nor an existing file");
}

std::vector<Shape> propagate_shapes(const ArchitectureSpec& spec) {
  if (spec.input_shape.size() != 3) {
    throw DimensionError(spec.name + ": input shape must be CxHxW, got " +
                         shape_to_string(spec.input_shape));
  }
  if (spec.num_classes == 0) throw DimensionError(spec.name + ": num_classes must be positive");
  std::vector<Shape> shapes;
  Shape current = spec.input_shape;
  auto fail = [&](std::size_t i, const std::string& why) {
    throw DimensionError(spec.name + " layer " + std::to_string(i + 1) + " (" +
                         spec.layers[i].to_text() + "): " + why + "; input " +
                         shape_to_string(current));
  };
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    switch (layer.kind) {
      case LayerKind::kConv: {
        if (current.size() != 3) fail(i, "convolution after a fully-connected layer");
        const std::size_t p = layer.pad_amount();
        if (current[1] + 2 * p < layer.kernel || current[2] + 2 * p < layer.kernel) {
          fail(i, "spatial size smaller than the kernel");
        }
        current = {layer.filters, current[1] + 2 * p - layer.kernel + 1,
                   current[2] + 2 * p - layer.kernel + 1};
        break;
      }
      case LayerKind::kMaxPool:
        if (current.size() != 3) fail(i, "pooling after a fully-connected layer");
        if (current[1] % layer.window != 0 || current[2] % layer.window != 0) {
          fail(i, "spatial size not divisible by the pooling window");
        }
        current = {current[0], current[1] / layer.window, current[2] / layer.window};
        break;
      case LayerKind::kFullyConnected: {
        const bool is_output = i + 2 == spec.layers.size();
        const std::size_t units = layer.units == 0 ? spec.num_classes : layer.units;
        if (layer.units == 0 && !is_output) fail(i, "'fc classes' must directly precede softmax");
        if (is_output && units != spec.num_classes) {
          fail(i, "output layer has " + std::to_string(units) + " units but the dataset has " +
                      std::to_string(spec.num_classes) + " classes");
        }
        current = {units};
        break;
      }
      case LayerKind::kSoftmax:
        if (i + 1 != spec.layers.size()) fail(i, "softmax must be the final layer");
        if (current.size() != 1 || current[0] != spec.num_classes) {
          fail(i, "softmax must follow an fc layer with num_classes units");
        }
        break;
    }
    shapes.push_back(current);
  }
  if (spec.layers.back().kind != LayerKind::kSoftmax) {
    throw DimensionError(spec.name + ": final layer must be softmax");
  }
  return shapes;
}

std::size_t parameter_count(const ArchitectureSpec& spec) {
  const auto shapes = propagate_shapes(spec);
  std::size_t total = 0;
  Shape in = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind == LayerKind::kConv) {
      total += layer.filters * in[0] * layer.kernel * layer.kernel + layer.filters;
    } else if (layer.kind == LayerKind::kFullyConnected) {
      total += shape_size(in) * shapes[i][0] + shapes[i][0];
    }
    in = shapes[i];
  }
  return total;
}

}  // namespace negcnn::nn
