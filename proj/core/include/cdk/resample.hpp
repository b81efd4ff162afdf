#pragma once

#include "cdk/tensor.hpp"

namespace cdk {

/// Area-average pooling by an integer factor; H and W must be divisible.
TensorF downsample(const TensorF& image, int factor);

/// Bilinear upsampling by an integer factor (half-pixel centers, edges
/// clamped). Output magnitudes never exceed the input's.
TensorF upsample_bilinear(const TensorF& image, int factor);

}  // namespace cdk
