#include "cdk/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace cdk {

namespace {

Eigen::MatrixXd to_matrix(const GaussianFit& f) {
    Eigen::MatrixXd m(f.dim, f.dim);
    for (int i = 0; i < f.dim; ++i)
        for (int j = 0; j < f.dim; ++j)
            m(i, j) = f.cov[static_cast<std::size_t>(i * f.dim + j)];
    return m;
}

// Symmetric PSD square root with negative eigenvalues clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) ev(i) = ev(i) > 0.0 ? std::sqrt(ev(i)) : 0.0;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

GaussianFit fit_gaussian(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2)
        throw std::invalid_argument("fit_gaussian: need at least 2 vectors");
    const int d = static_cast<int>(features[0].size());
    const double n = static_cast<double>(features.size());
    GaussianFit fit;
    fit.dim = d;
    fit.mean.assign(static_cast<std::size_t>(d), 0.0);
    fit.cov.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (const auto& v : features) {
        if (static_cast<int>(v.size()) != d)
            throw std::invalid_argument("fit_gaussian: inconsistent dimensions");
        for (int i = 0; i < d; ++i) fit.mean[static_cast<std::size_t>(i)] += v[static_cast<std::size_t>(i)] / n;
    }
    for (const auto& v : features)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                fit.cov[static_cast<std::size_t>(i * d + j)] +=
                    (v[static_cast<std::size_t>(i)] - fit.mean[static_cast<std::size_t>(i)]) *
                    (v[static_cast<std::size_t>(j)] - fit.mean[static_cast<std::size_t>(j)]) / n;
    return fit;
}

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
    if (a.dim != b.dim) throw std::invalid_argument("frechet_distance: dimension mismatch");
    double mean_term = 0.0;
    for (int i = 0; i < a.dim; ++i) {
        const double d = a.mean[static_cast<std::size_t>(i)] - b.mean[static_cast<std::size_t>(i)];
        mean_term += d * d;
    }
    const Eigen::MatrixXd Sa = to_matrix(a);
    const Eigen::MatrixXd Sb = to_matrix(b);
    const Eigen::MatrixXd rb = psd_sqrt(Sb);
    const Eigen::MatrixXd inner = rb * Sa * rb;  // symmetric, same spectrum as Sa Sb
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
    double trace_sqrt = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()(i);
        if (ev > 0.0) trace_sqrt += std::sqrt(ev);
    }
    const double value = mean_term + Sa.trace() + Sb.trace() - 2.0 * trace_sqrt;
    return value > 0.0 ? value : 0.0;
}

}  // namespace cdk
