#include "cdk/gmm.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "cdk/errors.hpp"

namespace cdk {

namespace {

Eigen::MatrixXd cov_matrix(const GmmSpec& gmm, int k) {
    const int d = gmm.dim();
    Eigen::MatrixXd S(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            S(i, j) = gmm.covs[static_cast<std::size_t>(k)][static_cast<std::size_t>(i * d + j)];
    return S;
}

Eigen::VectorXd mean_vector(const GmmSpec& gmm, int k) {
    const int d = gmm.dim();
    Eigen::VectorXd m(d);
    for (int i = 0; i < d; ++i) m(i) = gmm.means[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    return m;
}

}  // namespace

void GmmSpec::validate() const {
    const int K = components();
    if (K == 0) throw std::invalid_argument("gmm: no components");
    if (static_cast<int>(means.size()) != K || static_cast<int>(covs.size()) != K)
        throw std::invalid_argument("gmm: weights/means/covs size mismatch");
    const int d = dim();
    double wsum = 0.0;
    for (int k = 0; k < K; ++k) {
        if (weights[static_cast<std::size_t>(k)] < 0.0)
            throw std::invalid_argument("gmm: negative weight");
        wsum += weights[static_cast<std::size_t>(k)];
        if (static_cast<int>(means[static_cast<std::size_t>(k)].size()) != d ||
            static_cast<int>(covs[static_cast<std::size_t>(k)].size()) != d * d)
            throw std::invalid_argument("gmm: inconsistent dimensions");
        Eigen::LLT<Eigen::MatrixXd> llt(cov_matrix(*this, k));
        if (llt.info() != Eigen::Success) throw NumericError("gmm: covariance not SPD");
    }
    if (std::fabs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("gmm: weights must sum to 1");
}

GmmSpec GmmSpec::single(std::vector<double> mean, double iso_var) {
    GmmSpec g;
    const int d = static_cast<int>(mean.size());
    g.weights = {1.0};
    g.means = {std::move(mean)};
    std::vector<double> cov(static_cast<std::size_t>(d * d), 0.0);
    for (int i = 0; i < d; ++i) cov[static_cast<std::size_t>(i * d + i)] = iso_var;
    g.covs = {std::move(cov)};
    return g;
}

std::vector<double> gmm_posterior_mean(const TensorF& z_t, const NoiseLevel& level,
                                       const GmmSpec& gmm) {
    const int d = gmm.dim();
    if (static_cast<int>(z_t.size()) != d)
        throw std::invalid_argument("gmm: z_t dimension mismatch");
    if (level.sigma <= 0.0) throw NumericError("gmm: sigma must be positive");
    const double a = level.alpha;
    const double s2 = level.sigma * level.sigma;
    const int K = gmm.components();

    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z(i) = z_t[static_cast<std::size_t>(i)];

    // Responsibilities r_k ~ w_k N(z; a m_k, a^2 S_k + s^2 I) in log domain,
    // posterior component means via the conjugate-Gaussian update.
    std::vector<double> log_r(static_cast<std::size_t>(K));
    std::vector<Eigen::VectorXd> post_mean(static_cast<std::size_t>(K));
    double max_log = -1e300;
    for (int k = 0; k < K; ++k) {
        const Eigen::MatrixXd S = cov_matrix(gmm, k);
        const Eigen::VectorXd m = mean_vector(gmm, k);
        Eigen::MatrixXd C = (a * a) * S;
        for (int i = 0; i < d; ++i) C(i, i) += s2;
        Eigen::LLT<Eigen::MatrixXd> llt(C);
        if (llt.info() != Eigen::Success) throw NumericError("gmm: singular marginal covariance");
        const Eigen::VectorXd diff = z - a * m;
        const Eigen::VectorXd sol = llt.solve(diff);
        double log_det = 0.0;
        for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
        const double w = gmm.weights[static_cast<std::size_t>(k)];
        log_r[static_cast<std::size_t>(k)] =
            (w > 0.0 ? std::log(w) : -1e300) - 0.5 * (log_det + diff.dot(sol));
        post_mean[static_cast<std::size_t>(k)] = m + a * S * sol;
        max_log = std::max(max_log, log_r[static_cast<std::size_t>(k)]);
    }
    double norm = 0.0;
    for (int k = 0; k < K; ++k) {
        log_r[static_cast<std::size_t>(k)] = std::exp(log_r[static_cast<std::size_t>(k)] - max_log);
        norm += log_r[static_cast<std::size_t>(k)];
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
    for (int k = 0; k < K; ++k)
        out += (log_r[static_cast<std::size_t>(k)] / norm) * post_mean[static_cast<std::size_t>(k)];

    std::vector<double> result(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) result[static_cast<std::size_t>(i)] = out(i);
    return result;
}

TensorF gmm_oracle_eps(const TensorF& z_t, const NoiseLevel& level, const GmmSpec& gmm) {
    const std::vector<double> ex = gmm_posterior_mean(z_t, level, gmm);
    TensorF out(z_t.shape());
    const double a = level.alpha;
    const double inv_s = 1.0 / level.sigma;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>((static_cast<double>(z_t[i]) - a * ex[i]) * inv_s);
    return out;
}

std::vector<double> sample_gmm(const GmmSpec& gmm, RngStream& rng) {
    const int d = gmm.dim();
    const double u = rng.uniform();
    int k = 0;
    double acc = 0.0;
    for (int i = 0; i < gmm.components(); ++i) {
        acc += gmm.weights[static_cast<std::size_t>(i)];
        if (u < acc) { k = i; break; }
        k = i;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov_matrix(gmm, k));
    if (llt.info() != Eigen::Success) throw NumericError("gmm: covariance not SPD");
    Eigen::VectorXd n(d);
    for (int i = 0; i < d; ++i) n(i) = rng.normal();
    const Eigen::VectorXd x = mean_vector(gmm, k) + Eigen::MatrixXd(llt.matrixL()) * n;
    std::vector<double> out(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] = x(i);
    return out;
}

GmmDenoiser::GmmDenoiser(GmmSpec mixture, int cond_component)
    : mixture_(std::move(mixture)), cond_component_(cond_component) {
    mixture_.validate();
    if (cond_component_ >= 0) {
        if (cond_component_ >= mixture_.components())
            throw std::invalid_argument("gmm denoiser: component index out of range");
        const std::size_t k = static_cast<std::size_t>(cond_component_);
        component_.weights = {1.0};
        component_.means = {mixture_.means[k]};
        component_.covs = {mixture_.covs[k]};
    }
}

TensorF GmmDenoiser::eps_hat(const TensorF& z_t, const NoiseLevel& level,
                             const PromptEmbedding& cond) const {
    if (!cond.null_flag && cond_component_ >= 0)
        return gmm_oracle_eps(z_t, level, component_);
    return gmm_oracle_eps(z_t, level, mixture_);
}

}  // namespace cdk
