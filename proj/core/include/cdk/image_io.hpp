#pragma once

#include <string>

#include "cdk/tensor.hpp"

namespace cdk {

/// Writes a [-1,1] image as binary PGM (1 channel, P5) or PPM (3 channels,
/// P6) with maxval 255. Pixel mapping: floor((clamp(x,-1,1)+1)/2 * 255 + 0.5),
/// so 0.0 maps to 128. Values outside [-1,1] are clamped, never an error.
/// The write is atomic (temp file + rename).
void save_image_pnm(const TensorF& image, const std::string& path);

}  // namespace cdk
