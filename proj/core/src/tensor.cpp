#include "cdk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cdk {

namespace {
std::size_t checked_count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor: dims must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}
}  // namespace

TensorF::TensorF(std::vector<int> shape)
    : shape_(std::move(shape)), data_(checked_count(shape_), 0.0f) {}

TensorF::TensorF(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_count(shape_) != data_.size())
        throw std::invalid_argument("tensor: data length does not match shape");
}

TensorF TensorF::full(std::vector<int> shape, float value) {
    TensorF t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

float& TensorF::at(int c, int y, int x) {
    const int H = shape_[1], W = shape_[2];
    return data_[(static_cast<std::size_t>(c) * H + y) * W + x];
}

float TensorF::at(int c, int y, int x) const {
    const int H = shape_[1], W = shape_[2];
    return data_[(static_cast<std::size_t>(c) * H + y) * W + x];
}

bool TensorF::all_finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

TensorF TensorF::reshaped(std::vector<int> new_shape) const {
    if (checked_count(new_shape) != data_.size())
        throw std::invalid_argument("tensor: reshape element count mismatch");
    return TensorF(std::move(new_shape), data_);
}

std::string TensorF::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << "]";
    return os.str();
}

void require_same_shape(const TensorF& a, const TensorF& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

TensorF add(const TensorF& a, const TensorF& b) {
    require_same_shape(a, b, "add");
    TensorF out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

TensorF sub(const TensorF& a, const TensorF& b) {
    require_same_shape(a, b, "sub");
    TensorF out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

TensorF mul(const TensorF& a, const TensorF& b) {
    require_same_shape(a, b, "mul");
    TensorF out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

TensorF scale(const TensorF& a, float s) {
    TensorF out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

TensorF clamp(const TensorF& a, float lo, float hi) {
    TensorF out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::clamp(a[i], lo, hi);
    return out;
}

void add_scaled_inplace(TensorF& dst, const TensorF& src, float s) {
    require_same_shape(dst, src, "add_scaled");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] * s;
}

double sum(const TensorF& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
    return acc;
}

double mean(const TensorF& a) {
    if (a.empty()) return 0.0;
    return sum(a) / static_cast<double>(a.size());
}

double dot(const TensorF& a, const TensorF& b) {
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

float max_abs(const TensorF& a) {
    float m = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i]));
    return m;
}

double max_abs_diff(const TensorF& a, const TensorF& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

}  // namespace cdk
