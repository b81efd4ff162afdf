#pragma once

#include <string>
#include <vector>

#include "cdk/tensor.hpp"

namespace cdk {

/// Symbolic token sequence drawn from the fixed prompt vocabulary.
struct PromptSeq {
    std::vector<std::string> tokens;

    bool empty() const { return tokens.empty(); }
    std::string text() const;
};

PromptSeq parse_prompt(const std::string& text);  // whitespace-separated tokens

enum class TokenKind { Color, Position, Size };

/// Rendering semantics of one vocabulary token. Shared by the blob renderer
/// and the alignment-score feature map so both agree on what a token means.
struct TokenInfo {
    std::string name;
    TokenKind kind;
    float r = 0, g = 0, b = 0;    // Color
    float cy = 0.5f, cx = 0.5f;   // Position (fractions of height/width)
    float radius = 0.2f;          // Size (fraction of resolution)
};

const std::vector<TokenInfo>& vocab_info();
const TokenInfo* find_token(const std::string& name);  // nullptr if unknown

enum class PoolMode { Mean, Attention };

/// Frozen embedding of a prompt: per-position vectors (zero padded to kMaxLen)
/// plus one pooled vector. Null conditioning is the all-zero embedding.
struct PromptEmbedding {
    TensorF seq;     // [kMaxLen, kEmbedDim]
    TensorF pooled;  // [kEmbedDim]
    int n_tokens = 0;
    bool null_flag = false;

    static PromptEmbedding null_embedding();
};

/// Frozen prompt encoder. Token and positional tables are derived from a
/// fixed internal seed, never trained, so the same prompt always maps to the
/// same embedding. Each position vector is L2-normalized after the positional
/// addition; pooling is either the mean over non-pad positions or a softmax
/// attention pool with a fixed query vector.
class PromptEncoder {
public:
    static constexpr int kMaxLen = 4;
    static constexpr int kEmbedDim = 32;

    PromptEncoder();

    PromptEmbedding encode(const PromptSeq& prompt, PoolMode mode = PoolMode::Mean) const;

    /// Frozen per-token direction averaged over positions; used by the
    /// alignment feature map.
    std::vector<float> token_direction(const std::string& token) const;

private:
    TensorF table_;       // [vocab, kEmbedDim]
    TensorF positional_;  // [kMaxLen, kEmbedDim]
    TensorF attn_query_;  // [kEmbedDim]
};

}  // namespace cdk
