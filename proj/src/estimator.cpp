// estimator.cpp

#include "gelc/estimator.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "gelc/errors.hpp"
#include "gelc/glm.hpp"
#include "gelc/lbfgs.hpp"

namespace gelc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Best log-density over probe points of the row's positive-weight cells; used
// as the row shift when linear-domain accumulation under- or overflows.
double row_max_log_density(const Observation& o, const Partition& part, int i,
                           const Eigen::VectorXd& w, Family family,
                           const ParameterVector& theta) {
    double best = -kInf;
    for (int j : part.row_cells[i]) {
        if (w[j] == 0.0) continue;
        const ObservedInterval& cell = part.cells[j];
        best = std::max(best, log_density(family, o.y,
                                          linear_predictor(theta, o.x, cell.left), theta.phi));
        if (!cell.is_point()) {
            const double mid = 0.5 * (cell.left + cell.right);
            best = std::max(best,
                            log_density(family, o.y, linear_predictor(theta, o.x, mid), theta.phi));
            best = std::max(best, log_density(family, o.y,
                                              linear_predictor(theta, o.x, cell.right), theta.phi));
        }
    }
    return best;
}

struct RowTerms {
    double mix = 0.0;  // sum_j w_j C_ij, in the shifted domain
    double s1 = 0.0;   // numerators for (alpha, beta) via s_eta, gamma via s_eta u, phi
    double su = 0.0;
    double sphi = 0.0;
    double shift = 0.0;
};

RowTerms assemble_row(const Observation& o, const Partition& part, int i,
                      const Eigen::VectorXd& w, Family family, const ParameterVector& theta,
                      double quad_tol, bool want_grad, double shift) {
    RowTerms t;
    t.shift = shift;
    for (int j : part.row_cells[i]) {
        if (w[j] == 0.0) continue;
        const ObservedInterval& cell = part.cells[j];
        const double inv_len = cell.is_point() ? 1.0 : 1.0 / part.lengths[j];
        if (want_grad) {
            const auto ci =
                detail::score_cell_integrals(family, o.y, o.x, theta, cell, quad_tol, shift);
            t.mix += w[j] * ci.fbar * inv_len;
            t.s1 += w[j] * ci.s1 * inv_len;
            t.su += w[j] * ci.su * inv_len;
            t.sphi += w[j] * ci.sphi * inv_len;
        } else {
            const double v = detail::integrate_density_shifted(family, o.y, o.x, theta, cell,
                                                               quad_tol, shift, nullptr);
            t.mix += w[j] * v * inv_len;
        }
    }
    return t;
}

LoglikGradient assemble(const Dataset& data, const Partition& part, const Eigen::VectorXd& w,
                        Family family, const ParameterVector& theta, double quad_tol,
                        bool want_grad) {
    const int n = part.n();
    if (static_cast<int>(data.size()) != n)
        throw DimensionError("dataset size does not match partition");
    if (w.size() != part.m()) throw DimensionError("weight length does not match partition");
    const int p = theta.p();
    if (!data.empty() && data.front().x.size() != p)
        throw DimensionError("covariate length does not match parameter vector");
    if (has_dispersion(family) && !(theta.phi > 0.0)) throw DomainError("phi must be positive");

    LoglikGradient out;
    const int dim = free_parameter_count(family, p);
    if (want_grad) out.gradient = Eigen::VectorXd::Zero(dim);

    for (int i = 0; i < n; ++i) {
        const Observation& o = data[i];
        RowTerms t = assemble_row(o, part, i, w, family, theta, quad_tol, want_grad, 0.0);
        if (!(t.mix > 0.0) || !std::isfinite(t.mix)) {
            const double s = row_max_log_density(o, part, i, w, family, theta);
            if (!std::isfinite(s))
                throw DegenerateLikelihoodError(
                    "observation " + std::to_string(i + 1) + " has zero conditional likelihood",
                    i);
            t = assemble_row(o, part, i, w, family, theta, quad_tol, want_grad, s);
            if (!(t.mix > 0.0) || !std::isfinite(t.mix))
                throw DegenerateLikelihoodError(
                    "observation " + std::to_string(i + 1) + " has zero conditional likelihood",
                    i);
        }
        out.loglik += std::log(t.mix) + t.shift;
        if (want_grad) {
            const double ga = t.s1 / t.mix;
            out.gradient[0] += ga;
            for (int j = 0; j < p; ++j) out.gradient[1 + j] += ga * o.x[j];
            out.gradient[p + 1] += t.su / t.mix;
            if (has_dispersion(family)) out.gradient[p + 2] += t.sphi / t.mix;
        }
    }
    return out;
}

// Mapping between the natural parameters and the optimizer coordinates
// (alpha, beta..., gamma when free, log phi when the family has dispersion).
struct PsiMap {
    Family family;
    int p;
    std::optional<double> fix_gamma;

    bool disp() const { return has_dispersion(family); }
    int dim() const { return p + 1 + (fix_gamma ? 0 : 1) + (disp() ? 1 : 0); }
    int gamma_index() const { return p + 1; }
    int logphi_index() const { return dim() - 1; }

    Eigen::VectorXd from_theta(const ParameterVector& th) const {
        Eigen::VectorXd psi(dim());
        psi[0] = th.alpha;
        psi.segment(1, p) = th.beta;
        if (!fix_gamma) psi[gamma_index()] = th.gamma;
        if (disp()) psi[logphi_index()] = std::log(th.phi);
        return psi;
    }

    ParameterVector to_theta(const Eigen::VectorXd& psi) const {
        ParameterVector th;
        th.alpha = psi[0];
        th.beta = psi.segment(1, p);
        th.gamma = fix_gamma ? *fix_gamma : psi[gamma_index()];
        th.phi = disp() ? std::exp(psi[logphi_index()]) : 1.0;
        return th;
    }
};

}  // namespace

double loglikelihood(const Dataset& data, const Partition& partition,
                     const Eigen::VectorXd& weights, Family family, const ParameterVector& theta,
                     double quad_tol) {
    return assemble(data, partition, weights, family, theta, quad_tol, false).loglik;
}

LoglikGradient loglik_gradient(const Dataset& data, const Partition& partition,
                               const Eigen::VectorXd& weights, Family family,
                               const ParameterVector& theta, double quad_tol) {
    return assemble(data, partition, weights, family, theta, quad_tol, true);
}

std::pair<ParameterVector, double> maximize_theta(const Dataset& data, const Partition& partition,
                                                  const Eigen::VectorXd& weights, Family family,
                                                  const ParameterVector& theta_start,
                                                  double quad_tol,
                                                  std::optional<double> fix_gamma,
                                                  double grad_tol) {
    const int p = theta_start.p();
    const PsiMap map{family, p, fix_gamma};
    const double n = static_cast<double>(data.size());

    const double ll_start =
        assemble(data, partition, weights, family, theta_start, quad_tol, false).loglik;

    auto objective = [&](const Eigen::VectorXd& psi, Eigen::VectorXd& grad) -> double {
        grad = Eigen::VectorXd::Zero(map.dim());
        try {
            const ParameterVector th = map.to_theta(psi);
            const LoglikGradient lg = assemble(data, partition, weights, family, th, quad_tol,
                                               true);
            grad[0] = -lg.gradient[0] / n;
            for (int j = 0; j < p; ++j) grad[1 + j] = -lg.gradient[1 + j] / n;
            if (!fix_gamma) grad[map.gamma_index()] = -lg.gradient[p + 1] / n;
            if (map.disp()) {
                // Chain rule for the log-dispersion coordinate: d/d(log phi) = phi d/dphi.
                grad[map.logphi_index()] = -lg.gradient[p + 2] * th.phi / n;
            }
            return -lg.loglik / n;
        } catch (const Error&) {
            return kInf;
        }
    };

    LbfgsOptions opts;
    opts.history = 10;
    opts.max_iterations = 200;
    opts.gradient_tolerance = grad_tol;   // on the mean-score scale
    opts.f_change_tolerance = 1e-13;
    const LbfgsReport rep = lbfgs_minimize(objective, map.from_theta(theta_start), opts);

    const double ll_end = -rep.f * n;
    if (!std::isfinite(ll_end) || ll_end < ll_start - 1e-10) return {theta_start, ll_start};
    return {map.to_theta(rep.x), ll_end};
}

Eigen::MatrixXd observed_information(const Dataset& data, const Partition& partition,
                                     const Eigen::VectorXd& weights, Family family,
                                     const ParameterVector& theta, double quad_tol) {
    const int p = theta.p();
    const int dim = free_parameter_count(family, p);
    const Eigen::VectorXd t0 = pack_parameters(family, theta);
    Eigen::MatrixXd jac(dim, dim);
    for (int k = 0; k < dim; ++k) {
        double h = 1e-5 * (1.0 + std::fabs(t0[k]));
        if (has_dispersion(family) && k == dim - 1) h = std::min(h, 0.5 * theta.phi);
        Eigen::VectorXd up = t0, dn = t0;
        up[k] += h;
        dn[k] -= h;
        const Eigen::VectorXd gp =
            assemble(data, partition, weights, family, unpack_parameters(family, up, p), quad_tol,
                     true)
                .gradient;
        const Eigen::VectorXd gm =
            assemble(data, partition, weights, family, unpack_parameters(family, dn, p), quad_tol,
                     true)
                .gradient;
        jac.col(k) = (gp - gm) / (2.0 * h);
    }
    return -0.5 * (jac + jac.transpose());
}

FitResult fit(const Dataset& data, Family family, const FitConfig& config) {
    if (config.eps_parameter <= 0.0 || config.eps_loglik <= 0.0)
        throw DomainError("convergence thresholds must be positive");
    if (config.quad_tol <= 0.0) throw DomainError("quadrature tolerance must be positive");
    if (config.max_outer < 1) throw DomainError("max_outer must be at least 1");
    validate_dataset(family, data);

    const int n = static_cast<int>(data.size());
    const int p = static_cast<int>(data.front().x.size());
    const int dim = free_parameter_count(family, p);

    std::vector<ObservedInterval> intervals;
    intervals.reserve(data.size());
    for (const auto& o : data) intervals.push_back(o.interval);

    FitResult res;
    res.partition = build_partition(intervals, config.endpoint_round_digits);
    const Partition& part = res.partition;

    // Identifiability check on the midpoint design (1, x, z-mid).
    Eigen::MatrixXd X(n, p + 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X.row(i).segment(1, p) = data[i].x.transpose();
        X(i, p + 1) = 0.5 * (data[i].interval.left + data[i].interval.right);
        y[i] = data[i].y;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p + 2)
        throw RankError("design (intercept, x, interval midpoints) is rank deficient");

    // Starting point: user-supplied, or a GLM on the interval midpoints.
    ParameterVector theta;
    if (config.theta_start) {
        theta = *config.theta_start;
        if (theta.p() != p) throw DimensionError("theta_start has wrong beta length");
    } else {
        const GlmFit init = fit_glm(family, y, X);
        theta.alpha = init.coefficients[0];
        theta.beta = init.coefficients.segment(1, p);
        theta.gamma = init.coefficients[p + 1];
        theta.phi = has_dispersion(family)
                        ? std::min(std::max(init.dispersion, 1e-3), 1e3)
                        : 1.0;
    }
    if (config.fix_gamma) theta.gamma = *config.fix_gamma;

    Eigen::VectorXd w = uniform_weights(part);

    double ll_old = 0.0;
    res.min_w_stage_delta = 0.0;
    for (int it = 1; it <= config.max_outer; ++it) {
        const CellDensityMatrix C = cell_density_matrix(data, part, family, theta,
                                                        config.quad_tol);
        if (it == 1) ll_old = conditional_loglik(w, part, C);

        WeightSolveResult ws = solve_weights(w, part, C, config.eps_parameter, config.max_inner);
        res.min_w_stage_delta = std::min(res.min_w_stage_delta, ws.min_loglik_delta);
        const double delta_w = ws.last_delta;
        w = std::move(ws.w);

        const Eigen::VectorXd packed_old = pack_parameters(family, theta);
        const double stage_gtol = std::min(1e-6, config.eps_parameter);
        auto [theta_new, ll_new] = maximize_theta(data, part, w, family, theta, config.quad_tol,
                                                  config.fix_gamma, stage_gtol);
        const double base = packed_old.norm();
        const double delta_theta =
            (pack_parameters(family, theta_new) - packed_old).norm() / (base > 0.0 ? base : 1.0);
        const double delta_ll = std::fabs(ll_new - ll_old) / std::max(1.0, std::fabs(ll_old));

        theta = theta_new;
        ll_old = ll_new;
        res.outer_logliks.push_back(ll_new);
        res.outer_iterations = it;

        if (delta_theta + delta_w < config.eps_parameter) {
            res.converged = true;
            res.stop_rule = StopRule::parameter_change;
            break;
        }
        if (delta_ll < config.eps_loglik) {
            res.converged = true;
            res.stop_rule = StopRule::loglik_change;
            break;
        }
    }
    if (!res.converged) {
        res.stop_rule = StopRule::iteration_limit;
        res.message = "stopped at the outer iteration limit without meeting either threshold";
    }

    // Final polish of the masses at theta-hat, so the reported weights satisfy
    // the self-consistency equation at the reported parameters.
    {
        const CellDensityMatrix C = cell_density_matrix(data, part, family, theta,
                                                        config.quad_tol);
        WeightSolveResult ws = solve_weights(w, part, C, config.eps_parameter, config.max_inner);
        res.min_w_stage_delta = std::min(res.min_w_stage_delta, ws.min_loglik_delta);
        w = std::move(ws.w);
        res.self_consistency_residual = ws.residual;
        res.loglik = ws.loglik;
        res.outer_logliks.push_back(ws.loglik);
    }

    res.theta_hat = theta;
    res.weights = w;

    // Estimating-equation residual over the coordinates that were actually
    // free; a fixed gamma is a constraint, not a stationarity failure.
    const LoglikGradient lg = loglik_gradient(data, part, w, family, theta, config.quad_tol);
    res.score_residual = 0.0;
    for (int k = 0; k < lg.gradient.size(); ++k) {
        if (config.fix_gamma && k == p + 1) continue;
        res.score_residual = std::max(res.score_residual,
                                      std::fabs(lg.gradient[k]) / static_cast<double>(n));
    }

    if (config.compute_covariance) {
        Eigen::MatrixXd info = observed_information(data, part, w, family, theta,
                                                    config.quad_tol);
        // With gamma held fixed, invert the free block only and leave zero
        // rows/columns in the reported covariance at the gamma position.
        std::vector<int> keep;
        for (int k = 0; k < dim; ++k)
            if (!(config.fix_gamma && k == p + 1)) keep.push_back(k);
        const int r = static_cast<int>(keep.size());
        Eigen::MatrixXd sub(r, r);
        for (int a = 0; a < r; ++a)
            for (int b = 0; b < r; ++b) sub(a, b) = info(keep[a], keep[b]);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
        const double max_eig = es.eigenvalues().maxCoeff();
        if (es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, max_eig)) {
            const Eigen::MatrixXd sub_inv = es.eigenvectors() *
                                            es.eigenvalues().cwiseInverse().asDiagonal() *
                                            es.eigenvectors().transpose();
            res.covariance = Eigen::MatrixXd::Zero(dim, dim);
            for (int a = 0; a < r; ++a)
                for (int b = 0; b < r; ++b) res.covariance(keep[a], keep[b]) = sub_inv(a, b);
            res.std_errors = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
            res.covariance_ok = true;
        } else {
            res.covariance_ok = false;
            if (!res.message.empty()) res.message += "; ";
            res.message += "observed information is not positive definite, standard errors omitted";
        }
    }
    return res;
}

std::vector<std::string> parameter_names(Family family, int p,
                                         const std::vector<std::string>& x_names) {
    std::vector<std::string> out;
    out.reserve(free_parameter_count(family, p));
    out.emplace_back("(intercept)");
    for (int j = 0; j < p; ++j) {
        if (j < static_cast<int>(x_names.size()) && !x_names[j].empty())
            out.push_back(x_names[j]);
        else
            out.push_back("x" + std::to_string(j + 1));
    }
    out.emplace_back("z");
    if (has_dispersion(family)) out.emplace_back("phi");
    return out;
}

}  // namespace gelc
