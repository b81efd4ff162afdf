#pragma once

#include <cstdint>

#include "cdk/tensor.hpp"

namespace cdk {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

/// Counter-based deterministic random stream. Fully specified so that an
/// implementation in any language reproduces the uniform stream bit for bit:
///
///   base     = mix64(seed) ^ mix64(stream_id ^ 0xDA942042E4DD58B5)
///   raw(n)   = mix64(base + (n + 1) * 0x9E3779B97F4A7C15)      n = 0,1,2,...
///   uniform  = (raw >> 11) * 2^-53                              in [0, 1)
///
/// where mix64 is the splitmix64 finalizer. Normal variates are produced from
/// consecutive uniforms by the Box-Muller transform (pairs cached).
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();
    std::uint64_t raw(std::uint64_t counter) const;  // random access, does not advance

    double uniform();  // [0, 1)
    double normal();   // N(0, 1)
    float normal_f() { return static_cast<float>(normal()); }

    /// Uniform integer in [0, n), n >= 1. Modulo of a 64-bit draw; the bias is
    /// negligible for the small n used here.
    std::uint64_t uniform_index(std::uint64_t n);

    void fill_normal(TensorF& t);
    TensorF normal_tensor(std::vector<int> shape);

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t base_ = 0;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cdk
