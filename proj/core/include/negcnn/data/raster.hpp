#pragma once

#include <string>

#include "negcnn/data/dataset.hpp"

namespace negcnn::data {

// Decodes PNG or binary/ASCII netpbm (P2, P3, P5, P6) into an Image with 1
// (gray) or 3 (RGB) channels; alpha is dropped. Throws FormatError for
// undecodable input and IngestionError for unreadable files.
Image read_raster(const std::string& path);
// Converts gray to RGB when needed.
Image read_raster_rgb(const std::string& path);

// 8-bit output; PNG for a .png extension, otherwise PGM (1 channel) or PPM.
void write_raster(const std::string& path, const Image& image);

}  // namespace negcnn::data
