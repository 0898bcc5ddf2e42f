#include "gelc/npmle.hpp"

#include <cmath>

namespace gelc {

namespace {
constexpr double kWeightFloor = 1e-14;
}

Eigen::VectorXd turnbull_update(
    const Eigen::VectorXd& weights,
    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& membership) {
    const int n = static_cast<int>(membership.rows());
    const int m = static_cast<int>(membership.cols());
    if (weights.size() != m) throw DimensionError("turnbull_update: weight length != columns");
    Eigen::VectorXd next = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
        double denom = 0.0;
        for (int j = 0; j < m; ++j)
            if (membership(i, j)) denom += weights[j];
        if (denom <= 0.0)
            throw DegenerateLikelihoodError(
                "turnbull_update: observation " + std::to_string(i + 1) +
                    " has zero mass on its candidate cells",
                i);
        for (int j = 0; j < m; ++j)
            if (membership(i, j)) next[j] += weights[j] / denom;
    }
    return next / static_cast<double>(n);
}

Eigen::VectorXd gelc_weight_update(const Eigen::VectorXd& weights, const Partition& part,
                                   const CellDensityMatrix& C) {
    const int n = part.n();
    const int m = part.m();
    if (weights.size() != m) throw DimensionError("gelc_weight_update: weight length != cells");
    Eigen::VectorXd next = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
        double denom = 0.0;
        for (int j : part.row_cells[i]) denom += weights[j] * C.values(i, j);
        if (!(denom > 0.0))
            throw DegenerateLikelihoodError(
                "gelc_weight_update: observation " + std::to_string(i + 1) +
                    " has zero conditional likelihood",
                i);
        for (int j : part.row_cells[i]) next[j] += weights[j] * C.values(i, j) / denom;
    }
    return next / static_cast<double>(n);
}

Eigen::VectorXd uniform_weights(const Partition& part) {
    const int m = part.m();
    Eigen::VectorXd covered = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < part.n(); ++i)
        for (int j : part.row_cells[i]) covered[j] = 1.0;
    const double total = covered.sum();
    if (total <= 0.0) throw DomainError("uniform_weights: no covered cells");
    return covered / total;
}

double conditional_loglik(const Eigen::VectorXd& w, const Partition& part,
                          const CellDensityMatrix& C) {
    double ll = 0.0;
    for (int i = 0; i < part.n(); ++i) {
        double mass = 0.0;
        for (int j : part.row_cells[i]) mass += w[j] * C.values(i, j);
        if (!(mass > 0.0))
            throw DegenerateLikelihoodError(
                "loglikelihood: observation " + std::to_string(i + 1) +
                    " has zero conditional likelihood",
                i);
        ll += std::log(mass) + C.row_log_shift[i];
    }
    return ll;
}

WeightSolveResult solve_classic_weights(const Partition& part, double eps_p, int max_iter) {
    if (eps_p <= 0.0) throw DomainError("solve_classic_weights: eps_p must be positive");
    const auto& alpha = part.kappa;
    auto loglik_of = [&](const Eigen::VectorXd& v) {
        double ll = 0.0;
        for (int i = 0; i < part.n(); ++i) {
            double mass = 0.0;
            for (int j : part.row_cells[i]) mass += v[j];
            if (!(mass > 0.0))
                throw DegenerateLikelihoodError(
                    "loglikelihood: observation " + std::to_string(i + 1) +
                        " has zero candidate mass",
                    i);
            ll += std::log(mass);
        }
        return ll;
    };

    WeightSolveResult res;
    Eigen::VectorXd w = uniform_weights(part);
    double prev_ll = loglik_of(w);
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd next = turnbull_update(w, alpha);
        const double base = w.norm();
        res.last_delta = (next - w).norm() / (base > 0.0 ? base : 1.0);
        w = std::move(next);
        const double ll = loglik_of(w);
        res.min_loglik_delta = std::min(res.min_loglik_delta, ll - prev_ll);
        prev_ll = ll;
        res.iterations = it + 1;
        if (res.last_delta < eps_p) {
            res.converged = true;
            break;
        }
    }
    for (int j = 0; j < w.size(); ++j)
        if (w[j] < kWeightFloor) w[j] = 0.0;
    const double total = w.sum();
    if (total <= 0.0) throw DomainError("solve_classic_weights: all weights collapsed to zero");
    w /= total;

    const Eigen::VectorXd refreshed = turnbull_update(w, alpha);
    res.residual = (refreshed - w).cwiseAbs().maxCoeff();
    res.loglik = loglik_of(w);
    res.w = std::move(w);
    return res;
}

WeightSolveResult solve_weights(const Eigen::VectorXd& start, const Partition& part,
                                const CellDensityMatrix& C, double eps_p, int max_iter) {
    if (eps_p <= 0.0) throw DomainError("solve_weights: eps_p must be positive");
    WeightSolveResult res;
    Eigen::VectorXd w = start;
    double prev_ll = conditional_loglik(w, part, C);
    res.min_loglik_delta = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd next = gelc_weight_update(w, part, C);
        const double base = w.norm();
        res.last_delta = (next - w).norm() / (base > 0.0 ? base : 1.0);
        w = std::move(next);
        const double ll = conditional_loglik(w, part, C);
        res.min_loglik_delta = std::min(res.min_loglik_delta, ll - prev_ll);
        prev_ll = ll;
        res.iterations = it + 1;
        if (res.last_delta < eps_p) {
            res.converged = true;
            break;
        }
    }

    // Floor-and-renormalize once, at convergence only, to drop spurious
    // support without disturbing EM monotonicity mid-iteration.
    for (int j = 0; j < w.size(); ++j)
        if (w[j] < kWeightFloor) w[j] = 0.0;
    const double total = w.sum();
    if (total <= 0.0) throw DomainError("solve_weights: all weights collapsed to zero");
    w /= total;

    const Eigen::VectorXd refreshed = gelc_weight_update(w, part, C);
    res.residual = (refreshed - w).cwiseAbs().maxCoeff();
    res.loglik = conditional_loglik(w, part, C);
    res.w = std::move(w);
    return res;
}

}  // namespace gelc
