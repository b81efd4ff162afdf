#include "cdk/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdk {

TensorF downsample(const TensorF& image, int factor) {
    if (image.rank() != 3) throw std::invalid_argument("downsample: want [C,H,W]");
    if (factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
    if (factor == 1) return image;
    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    if (H % factor != 0 || W % factor != 0)
        throw std::invalid_argument("downsample: dims not divisible by factor");
    const int Ho = H / factor, Wo = W / factor;
    const float inv = 1.0f / static_cast<float>(factor * factor);
    TensorF out({C, Ho, Wo});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < Ho; ++y)
            for (int x = 0; x < Wo; ++x) {
                float acc = 0.0f;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += image.at(c, y * factor + dy, x * factor + dx);
                out.at(c, y, x) = acc * inv;
            }
    return out;
}

TensorF upsample_bilinear(const TensorF& image, int factor) {
    if (image.rank() != 3) throw std::invalid_argument("upsample: want [C,H,W]");
    if (factor < 1) throw std::invalid_argument("upsample: factor must be >= 1");
    if (factor == 1) return image;
    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const int Ho = H * factor, Wo = W * factor;
    TensorF out({C, Ho, Wo});
    const float inv_f = 1.0f / static_cast<float>(factor);
    for (int y = 0; y < Ho; ++y) {
        const float sy = (static_cast<float>(y) + 0.5f) * inv_f - 0.5f;
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, H - 1);
        const int y1 = std::min(y0 + 1, H - 1);
        const float wy = std::clamp(sy - static_cast<float>(y0), 0.0f, 1.0f);
        for (int x = 0; x < Wo; ++x) {
            const float sx = (static_cast<float>(x) + 0.5f) * inv_f - 0.5f;
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, W - 1);
            const int x1 = std::min(x0 + 1, W - 1);
            const float wx = std::clamp(sx - static_cast<float>(x0), 0.0f, 1.0f);
            for (int c = 0; c < C; ++c) {
                const float top =
                    image.at(c, y0, x0) * (1.0f - wx) + image.at(c, y0, x1) * wx;
                const float bot =
                    image.at(c, y1, x0) * (1.0f - wx) + image.at(c, y1, x1) * wx;
                out.at(c, y, x) = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

}  // namespace cdk
