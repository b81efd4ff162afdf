#pragma once

#include <vector>

#include "cdk/prompt.hpp"
#include "cdk/tensor.hpp"

namespace cdk {

/// Frozen toy feature map: per-channel means (C), per-channel left-right and
/// top-bottom half-plane mass differences (2C), and kProjDims seed-derived
/// random projections of the flattened image. d = 3C + kProjDims; 17 for RGB.
inline constexpr int kProjDims = 8;

int feature_dim(int channels);
std::vector<double> image_features(const TensorF& image);

/// Cosine similarity between the prompt's pooled embedding pushed through a
/// frozen linear map into feature space and image_features(image). The map
/// is built from the vocabulary's rendering semantics, so it is fixed and
/// deterministic. Zero-norm inputs score 0. Range [-1, 1].
double alignment_score(const TensorF& image, const PromptSeq& prompt,
                       const PromptEncoder& encoder);

}  // namespace cdk
