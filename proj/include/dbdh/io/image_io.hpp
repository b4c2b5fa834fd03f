#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbdh/core/tensor.hpp"

namespace dbdh {

/// Load a PNG or JPEG file as a 3 x H x W float image in [0, 1].
/// 8- and 16-bit PNG depths are supported; grayscale is replicated to RGB.
Tensor<float> load_image(const std::string& path);

/// Write an RGB image as PNG. bit_depth 8 or 16; 16 keeps embedding
/// residuals well below the quantization floor.
void save_png(const std::string& path, const Tensor<float>& image,
              int bit_depth = 8);

/// In-memory JPEG encode/decode round trip at the given quality (1-100).
Tensor<float> jpeg_roundtrip(const Tensor<float>& image, int quality);

/// Codec identification strings, recorded in run metadata.
std::string jpeg_codec_version();
std::string png_codec_version();

}  // namespace dbdh
