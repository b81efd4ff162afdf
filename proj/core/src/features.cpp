#include "cdk/features.hpp"

#include <cmath>
#include <stdexcept>

#include "cdk/rng.hpp"

namespace cdk {

namespace {
constexpr std::uint64_t kFeatureSeed = 0x1A2B3C4D5E6F7788ull;
}

int feature_dim(int channels) { return 3 * channels + kProjDims; }

std::vector<double> image_features(const TensorF& image) {
    if (image.rank() != 3) throw std::invalid_argument("image_features: want [C,H,W]");
    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    std::vector<double> f(static_cast<std::size_t>(feature_dim(C)), 0.0);

    const double inv_hw = 1.0 / (static_cast<double>(H) * W);
    for (int c = 0; c < C; ++c) {
        double mean = 0.0, lr = 0.0, tb = 0.0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double v = image.at(c, y, x);
                mean += v;
                lr += (x < W / 2 ? v : -v);
                tb += (y < H / 2 ? v : -v);
            }
        f[static_cast<std::size_t>(c)] = mean * inv_hw;
        f[static_cast<std::size_t>(C + c)] = lr * inv_hw;
        f[static_cast<std::size_t>(2 * C + c)] = tb * inv_hw;
    }

    // Fixed random projection; rows depend only on the image geometry.
    RngStream proj_rng(kFeatureSeed, static_cast<std::uint64_t>(C) * 1000003u +
                                         static_cast<std::uint64_t>(H) * 1009u +
                                         static_cast<std::uint64_t>(W));
    const double scale = 1.0 / std::sqrt(static_cast<double>(image.size()));
    for (int p = 0; p < kProjDims; ++p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < image.size(); ++i)
            acc += proj_rng.normal() * static_cast<double>(image[i]);
        f[static_cast<std::size_t>(3 * C + p)] = acc * scale;
    }
    return f;
}

namespace {

// Feature-space direction a token pushes rendered images toward. Channel-mean
// components are centered so the uniform background cancels in the dot
// product; projection components are left at zero.
std::vector<double> token_feature_direction(const TokenInfo& info) {
    std::vector<double> dir(static_cast<std::size_t>(feature_dim(3)), 0.0);
    switch (info.kind) {
        case TokenKind::Color: {
            const double m = (info.r + info.g + info.b) / 3.0;
            dir[0] = info.r - m;
            dir[1] = info.g - m;
            dir[2] = info.b - m;
            break;
        }
        case TokenKind::Position: {
            const double lr = info.cx < 0.5 ? 1.0 : (info.cx > 0.5 ? -1.0 : 0.0);
            const double tb = info.cy < 0.5 ? 1.0 : (info.cy > 0.5 ? -1.0 : 0.0);
            for (int c = 0; c < 3; ++c) {
                dir[static_cast<std::size_t>(3 + c)] = lr / 3.0;
                dir[static_cast<std::size_t>(6 + c)] = tb / 3.0;
            }
            break;
        }
        case TokenKind::Size: {
            const double s = info.radius > 0.2f ? 1.0 : -1.0;
            for (int c = 0; c < 3; ++c) dir[static_cast<std::size_t>(c)] = 0.1 * s;
            break;
        }
    }
    return dir;
}

}  // namespace

double alignment_score(const TensorF& image, const PromptSeq& prompt,
                       const PromptEncoder& encoder) {
    const PromptEmbedding emb = encoder.encode(prompt, PoolMode::Mean);
    const int d_feat = feature_dim(3);
    const int d_text = PromptEncoder::kEmbedDim;

    // Frozen map W = sum_v dir(v) * e_v^T over the vocabulary, applied to the
    // pooled embedding: W p = sum_v dir(v) * (e_v . p).
    std::vector<double> mapped(static_cast<std::size_t>(d_feat), 0.0);
    for (const auto& info : vocab_info()) {
        const std::vector<float> ev = encoder.token_direction(info.name);
        double overlap = 0.0;
        for (int i = 0; i < d_text; ++i)
            overlap += static_cast<double>(ev[static_cast<std::size_t>(i)]) *
                       emb.pooled[static_cast<std::size_t>(i)];
        const std::vector<double> dir = token_feature_direction(info);
        for (int i = 0; i < d_feat; ++i) mapped[static_cast<std::size_t>(i)] += overlap * dir[static_cast<std::size_t>(i)];
    }

    const std::vector<double> feat = image_features(image);
    double num = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < d_feat; ++i) {
        num += mapped[static_cast<std::size_t>(i)] * feat[static_cast<std::size_t>(i)];
        na += mapped[static_cast<std::size_t>(i)] * mapped[static_cast<std::size_t>(i)];
        nb += feat[static_cast<std::size_t>(i)] * feat[static_cast<std::size_t>(i)];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return num / std::sqrt(na * nb);
}

}  // namespace cdk
