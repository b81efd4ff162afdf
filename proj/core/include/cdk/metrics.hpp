#pragma once

#include <vector>

namespace cdk {

/// Moment fit of a feature cloud: sample mean, biased (1/N) covariance.
struct GaussianFit {
    std::vector<double> mean;
    std::vector<double> cov;  // d x d row-major, symmetric
    int dim = 0;
};

GaussianFit fit_gaussian(const std::vector<std::vector<double>>& features);

/// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}); the matrix square root
/// uses the eigendecomposition of sqrt(Sb) Sa sqrt(Sb), with negative
/// eigenvalues clamped to zero.
double frechet_distance(const GaussianFit& a, const GaussianFit& b);

}  // namespace cdk
