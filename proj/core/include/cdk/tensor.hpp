#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cdk {

/// Dense n-dimensional float32 array with explicit shape, row-major layout.
/// The universal carrier for images, latents and parameters.
class TensorF {
public:
    TensorF() = default;
    explicit TensorF(std::vector<int> shape);
    TensorF(std::vector<int> shape, std::vector<float> data);

    static TensorF zeros(std::vector<int> shape) { return TensorF(std::move(shape)); }
    static TensorF full(std::vector<int> shape, float value);

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    // CHW convenience accessors for image tensors.
    float& at(int c, int y, int x);
    float at(int c, int y, int x) const;

    bool same_shape(const TensorF& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    /// Same data, new shape; element count must match.
    TensorF reshaped(std::vector<int> new_shape) const;

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

// Elementwise helpers. Shape mismatches throw std::invalid_argument.
TensorF add(const TensorF& a, const TensorF& b);
TensorF sub(const TensorF& a, const TensorF& b);
TensorF mul(const TensorF& a, const TensorF& b);
TensorF scale(const TensorF& a, float s);
TensorF clamp(const TensorF& a, float lo, float hi);
void add_scaled_inplace(TensorF& dst, const TensorF& src, float s);

double sum(const TensorF& a);
double mean(const TensorF& a);
double dot(const TensorF& a, const TensorF& b);
float max_abs(const TensorF& a);
double max_abs_diff(const TensorF& a, const TensorF& b);

void require_same_shape(const TensorF& a, const TensorF& b, const char* op);

}  // namespace cdk
