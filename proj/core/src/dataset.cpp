#include "cdk/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cdk/errors.hpp"
#include "cdk/resample.hpp"
#include "cdk/tsr.hpp"

namespace cdk {

namespace {
constexpr float kPixelNoise = 0.02f;

struct BlobParams {
    float r = 1, g = 0, b = 0;
    float cy = 0.5f, cx = 0.5f;
    float radius = 0.2f;
};

BlobParams blob_params(const PromptSeq& prompt) {
    BlobParams bp;
    bool have_color = false;
    for (const auto& tok : prompt.tokens) {
        const TokenInfo* info = find_token(tok);
        if (!info) throw std::invalid_argument("render_blob: unknown token '" + tok + "'");
        switch (info->kind) {
            case TokenKind::Color:
                if (!have_color) {
                    bp.r = info->r; bp.g = info->g; bp.b = info->b;
                    have_color = true;
                }
                break;
            case TokenKind::Position:
                bp.cy = info->cy; bp.cx = info->cx;
                break;
            case TokenKind::Size:
                bp.radius = info->radius;
                break;
        }
    }
    return bp;
}
}  // namespace

TensorF render_blob(const PromptSeq& prompt, int resolution, RngStream* noise_rng) {
    const BlobParams bp = blob_params(prompt);
    TensorF img({3, resolution, resolution});
    const float color[3] = {bp.r, bp.g, bp.b};
    const float two_r2 = 2.0f * bp.radius * bp.radius;
    for (int y = 0; y < resolution; ++y) {
        const float fy = (static_cast<float>(y) + 0.5f) / resolution;
        for (int x = 0; x < resolution; ++x) {
            const float fx = (static_cast<float>(x) + 0.5f) / resolution;
            const float d2 = (fy - bp.cy) * (fy - bp.cy) + (fx - bp.cx) * (fx - bp.cx);
            const float g = std::exp(-d2 / two_r2);
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = -1.0f + 2.0f * color[c] * g;
        }
    }
    if (noise_rng)
        for (std::size_t i = 0; i < img.size(); ++i)
            img[i] = std::clamp(img[i] + kPixelNoise * noise_rng->normal_f(), -1.0f, 1.0f);
    return img;
}

BlobDataset gen_blob_dataset(int n, int resolution, RngStream& rng) {
    if (resolution != 8 && resolution != 16 && resolution != 32)
        throw std::invalid_argument("gen_blob_dataset: resolution must be 8, 16 or 32");
    if (n < 1) throw std::invalid_argument("gen_blob_dataset: n must be >= 1");

    std::vector<std::string> colors, positions, sizes;
    for (const auto& t : vocab_info()) {
        switch (t.kind) {
            case TokenKind::Color: colors.push_back(t.name); break;
            case TokenKind::Position: positions.push_back(t.name); break;
            case TokenKind::Size: sizes.push_back(t.name); break;
        }
    }

    BlobDataset ds;
    ds.resolution = resolution;
    ds.items.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        PromptSeq prompt;
        prompt.tokens.push_back(colors[rng.uniform_index(colors.size())]);
        prompt.tokens.push_back(positions[rng.uniform_index(positions.size())]);
        if (rng.uniform() < 0.5)  // size token optional, renderer default otherwise
            prompt.tokens.push_back(sizes[rng.uniform_index(sizes.size())]);
        BlobExample ex;
        ex.image = render_blob(prompt, resolution, &rng);
        ex.low_res = downsample(ex.image, 2);
        ex.prompt = std::move(prompt);
        ds.items.push_back(std::move(ex));
    }
    return ds;
}

void save_blob_dataset(const BlobDataset& ds, const std::string& tsr_path,
                       const std::string& prompts_path) {
    const int n = static_cast<int>(ds.items.size());
    if (n == 0) throw std::invalid_argument("save_blob_dataset: empty dataset");
    const int R = ds.resolution;
    TensorF images({n, 3, R, R});
    TensorF low({n, 3, R / 2, R / 2});
    std::size_t oi = 0, ol = 0;
    for (const auto& ex : ds.items) {
        for (std::size_t i = 0; i < ex.image.size(); ++i) images[oi++] = ex.image[i];
        for (std::size_t i = 0; i < ex.low_res.size(); ++i) low[ol++] = ex.low_res[i];
    }
    save_tsr(tsr_path, {{"images", images}, {"low_res", low}});

    std::ofstream out(prompts_path, std::ios::trunc);
    if (!out) throw NumericError("save_blob_dataset: cannot write " + prompts_path);
    for (const auto& ex : ds.items) out << ex.prompt.text() << "\n";
}

BlobDataset load_blob_dataset(const std::string& tsr_path, const std::string& prompts_path) {
    const auto tensors = load_tsr(tsr_path);
    const TensorF* images = nullptr;
    const TensorF* low = nullptr;
    for (const auto& [name, t] : tensors) {
        if (name == "images") images = &t;
        if (name == "low_res") low = &t;
    }
    if (!images || !low || images->rank() != 4 || low->rank() != 4)
        throw NumericError("load_blob_dataset: missing images/low_res tensors");

    std::ifstream in(prompts_path);
    if (!in) throw NumericError("load_blob_dataset: cannot read " + prompts_path);
    std::vector<PromptSeq> prompts;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) prompts.push_back(parse_prompt(line));

    const int n = images->dim(0);
    if (static_cast<int>(prompts.size()) != n)
        throw NumericError("load_blob_dataset: prompt count does not match image count");
    const int R = images->dim(2);
    BlobDataset ds;
    ds.resolution = R;
    ds.items.resize(static_cast<std::size_t>(n));
    const std::size_t img_sz = static_cast<std::size_t>(3) * R * R;
    const std::size_t low_sz = img_sz / 4;
    for (int i = 0; i < n; ++i) {
        auto& ex = ds.items[static_cast<std::size_t>(i)];
        ex.image = TensorF({3, R, R});
        ex.low_res = TensorF({3, R / 2, R / 2});
        for (std::size_t j = 0; j < img_sz; ++j) ex.image[j] = (*images)[i * img_sz + j];
        for (std::size_t j = 0; j < low_sz; ++j) ex.low_res[j] = (*low)[i * low_sz + j];
        ex.prompt = prompts[static_cast<std::size_t>(i)];
    }
    return ds;
}

}  // namespace cdk
