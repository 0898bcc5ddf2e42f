// glm.cpp

#include "gelc/glm.hpp"

#include <Eigen/QR>
#include <cmath>

#include "gelc/errors.hpp"

namespace gelc {

namespace {

double initial_intercept(Family family, const Eigen::VectorXd& y) {
    const double mean = y.mean();
    switch (family) {
        case Family::gamma_log: {
            if (mean <= 0.0) throw DomainError("gamma response mean must be positive");
            return std::log(mean);
        }
        case Family::bernoulli_logit: {
            const double p = std::min(std::max(mean, 1e-6), 1.0 - 1e-6);
            return std::log(p / (1.0 - p));
        }
        case Family::gaussian_identity:
            return mean;
    }
    throw DomainError("unknown family");
}

}  // namespace

GlmFit fit_glm(Family family, const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
               int max_iterations, double tolerance) {
    const auto n = X.rows();
    const auto q = X.cols();
    if (y.size() != n) throw DimensionError("response and design row counts differ");
    if (n <= q) throw DimensionError("need more observations than design columns");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!y_in_support(family, y[i]))
            throw DomainError("response outside family support in GLM fit");
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(X);
    rank_check.setThreshold(1e-10);
    if (rank_check.rank() < q) throw RankError("design matrix is column rank deficient");

    GlmFit out;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
    beta[0] = initial_intercept(family, y);

    Eigen::VectorXd eta(n), mu(n), wts(n), z(n);
    for (int iter = 1; iter <= max_iterations; ++iter) {
        eta = X * beta;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = std::min(std::max(eta[i], -30.0), 30.0);
            mu[i] = family_mean(family, e);
            const double dmu = mean_derivative(family, e);
            const double var = variance_function(family, mu[i]);
            wts[i] = dmu * dmu / var;
            z[i] = e + (y[i] - mu[i]) / dmu;
        }
        Eigen::VectorXd sw = wts.cwiseSqrt();
        Eigen::MatrixXd Xw = sw.asDiagonal() * X;
        Eigen::VectorXd zw = sw.cwiseProduct(z);
        Eigen::VectorXd beta_new = Xw.colPivHouseholderQr().solve(zw);

        const double step = (beta_new - beta).norm();
        const double scale = std::max(beta.norm(), 1.0);
        beta = beta_new;
        out.iterations = iter;
        if (step <= tolerance * scale) {
            out.converged = true;
            break;
        }
    }
    out.coefficients = beta;

    // Pearson dispersion and the complete-data log-likelihood at the estimate.
    eta = X * beta;
    double pearson = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = family_mean(family, std::min(std::max(eta[i], -30.0), 30.0));
        pearson += (y[i] - m) * (y[i] - m) / variance_function(family, m);
    }
    if (has_dispersion(family)) {
        out.dispersion = pearson / static_cast<double>(n - q);
        if (!(out.dispersion > 0.0) || !std::isfinite(out.dispersion)) out.dispersion = 1.0;
    }
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        ll += log_density(family, y[i], eta[i], out.dispersion);
    out.deviance_loglik = ll;
    return out;
}

}  // namespace gelc
