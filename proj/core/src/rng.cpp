#include "cdk/rng.hpp"

#include <cmath>

namespace cdk {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kStreamTweak = 0xDA942042E4DD58B5ull;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : base_(mix64(seed) ^ mix64(stream_id ^ kStreamTweak)) {}

std::uint64_t RngStream::raw(std::uint64_t counter) const {
    return mix64(base_ + (counter + 1) * kGolden);
}

std::uint64_t RngStream::next_u64() { return raw(counter_++); }

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));  // 1-u1 in (0,1]
    const double theta = kTwoPi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) { return next_u64() % n; }

void RngStream::fill_normal(TensorF& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal_f();
}

TensorF RngStream::normal_tensor(std::vector<int> shape) {
    TensorF t(std::move(shape));
    fill_normal(t);
    return t;
}

}  // namespace cdk
