#include "cdk/prompt.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cdk/rng.hpp"

namespace cdk {

namespace {
constexpr std::uint64_t kEncoderSeed = 0x7F4A7C15u;  // frozen, independent of run seed
}

std::string PromptSeq::text() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < tokens.size(); ++i) os << (i ? " " : "") << tokens[i];
    return os.str();
}

PromptSeq parse_prompt(const std::string& text) {
    PromptSeq p;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) p.tokens.push_back(tok);
    return p;
}

const std::vector<TokenInfo>& vocab_info() {
    static const std::vector<TokenInfo> vocab = {
        {"red", TokenKind::Color, 1, 0, 0, 0.5f, 0.5f, 0.2f},
        {"green", TokenKind::Color, 0, 1, 0, 0.5f, 0.5f, 0.2f},
        {"blue", TokenKind::Color, 0, 0, 1, 0.5f, 0.5f, 0.2f},
        {"yellow", TokenKind::Color, 1, 1, 0, 0.5f, 0.5f, 0.2f},
        {"white", TokenKind::Color, 1, 1, 1, 0.5f, 0.5f, 0.2f},
        {"left", TokenKind::Position, 0, 0, 0, 0.5f, 0.25f, 0.2f},
        {"right", TokenKind::Position, 0, 0, 0, 0.5f, 0.75f, 0.2f},
        {"top", TokenKind::Position, 0, 0, 0, 0.25f, 0.5f, 0.2f},
        {"bottom", TokenKind::Position, 0, 0, 0, 0.75f, 0.5f, 0.2f},
        {"center", TokenKind::Position, 0, 0, 0, 0.5f, 0.5f, 0.2f},
        {"small", TokenKind::Size, 0, 0, 0, 0.5f, 0.5f, 0.12f},
        {"large", TokenKind::Size, 0, 0, 0, 0.5f, 0.5f, 0.28f},
    };
    return vocab;
}

const TokenInfo* find_token(const std::string& name) {
    for (const auto& t : vocab_info())
        if (t.name == name) return &t;
    return nullptr;
}

PromptEmbedding PromptEmbedding::null_embedding() {
    PromptEmbedding e;
    e.seq = TensorF::zeros({PromptEncoder::kMaxLen, PromptEncoder::kEmbedDim});
    e.pooled = TensorF::zeros({PromptEncoder::kEmbedDim});
    e.n_tokens = 0;
    e.null_flag = true;
    return e;
}

PromptEncoder::PromptEncoder() {
    const int V = static_cast<int>(vocab_info().size());
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(kEmbedDim));
    RngStream table_rng(kEncoderSeed, 0);
    table_ = TensorF({V, kEmbedDim});
    for (std::size_t i = 0; i < table_.size(); ++i) table_[i] = table_rng.normal_f() * inv_sqrt_d;
    RngStream pos_rng(kEncoderSeed, 1);
    positional_ = TensorF({kMaxLen, kEmbedDim});
    for (std::size_t i = 0; i < positional_.size(); ++i)
        positional_[i] = pos_rng.normal_f() * inv_sqrt_d * 0.3f;
    RngStream q_rng(kEncoderSeed, 2);
    attn_query_ = TensorF({kEmbedDim});
    for (std::size_t i = 0; i < attn_query_.size(); ++i) attn_query_[i] = q_rng.normal_f();
}

PromptEmbedding PromptEncoder::encode(const PromptSeq& prompt, PoolMode mode) const {
    if (prompt.empty()) return PromptEmbedding::null_embedding();
    const int n = static_cast<int>(prompt.tokens.size());
    if (n > kMaxLen)
        throw std::invalid_argument("prompt: too many tokens (max " +
                                    std::to_string(kMaxLen) + ")");

    PromptEmbedding out;
    out.seq = TensorF::zeros({kMaxLen, kEmbedDim});
    out.pooled = TensorF::zeros({kEmbedDim});
    out.n_tokens = n;

    for (int i = 0; i < n; ++i) {
        const auto& name = prompt.tokens[static_cast<std::size_t>(i)];
        int row = -1;
        const auto& vocab = vocab_info();
        for (std::size_t v = 0; v < vocab.size(); ++v)
            if (vocab[v].name == name) { row = static_cast<int>(v); break; }
        if (row < 0) throw std::invalid_argument("prompt: unknown token '" + name + "'");

        double norm_sq = 0.0;
        for (int d = 0; d < kEmbedDim; ++d) {
            const float v = table_[static_cast<std::size_t>(row) * kEmbedDim + d] +
                            positional_[static_cast<std::size_t>(i) * kEmbedDim + d];
            out.seq[static_cast<std::size_t>(i) * kEmbedDim + d] = v;
            norm_sq += static_cast<double>(v) * v;
        }
        const float inv = norm_sq > 0 ? static_cast<float>(1.0 / std::sqrt(norm_sq)) : 0.0f;
        for (int d = 0; d < kEmbedDim; ++d)
            out.seq[static_cast<std::size_t>(i) * kEmbedDim + d] *= inv;
    }

    if (mode == PoolMode::Mean) {
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < kEmbedDim; ++d)
                out.pooled[static_cast<std::size_t>(d)] +=
                    out.seq[static_cast<std::size_t>(i) * kEmbedDim + d] / n;
    } else {
        // Softmax attention pool with the frozen query.
        std::vector<double> logits(static_cast<std::size_t>(n));
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(kEmbedDim));
        double m = -1e300;
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int d = 0; d < kEmbedDim; ++d)
                s += static_cast<double>(attn_query_[static_cast<std::size_t>(d)]) *
                     out.seq[static_cast<std::size_t>(i) * kEmbedDim + d];
            logits[static_cast<std::size_t>(i)] = s * inv_sqrt_d;
            m = std::max(m, logits[static_cast<std::size_t>(i)]);
        }
        double z = 0.0;
        for (auto& l : logits) { l = std::exp(l - m); z += l; }
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < kEmbedDim; ++d)
                out.pooled[static_cast<std::size_t>(d)] += static_cast<float>(
                    logits[static_cast<std::size_t>(i)] / z *
                    out.seq[static_cast<std::size_t>(i) * kEmbedDim + d]);
    }
    return out;
}

std::vector<float> PromptEncoder::token_direction(const std::string& token) const {
    const auto* info = find_token(token);
    if (!info) throw std::invalid_argument("prompt: unknown token '" + token + "'");
    std::vector<float> dir(kEmbedDim, 0.0f);
    // Average the normalized (token + positional) vector over all positions,
    // matching how the token can appear inside encoded sequences.
    for (int i = 0; i < kMaxLen; ++i) {
        PromptSeq p;
        p.tokens.assign(static_cast<std::size_t>(i) + 1, token);
        const PromptEmbedding e = encode(p, PoolMode::Mean);
        for (int d = 0; d < kEmbedDim; ++d)
            dir[static_cast<std::size_t>(d)] +=
                e.seq[static_cast<std::size_t>(i) * kEmbedDim + d] / kMaxLen;
    }
    return dir;
}

}  // namespace cdk
