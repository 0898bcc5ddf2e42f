// estimator.hpp
//
// Joint maximum-likelihood estimation of the regression parameters and the
// nonparametric distribution of an interval-censored covariate. The fit
// alternates two stages until the combined parameter movement or the relative
// log-likelihood change is small:
//   w-stage:     self-consistency iterations for the support-cell masses at
//                the current theta (see npmle.hpp),
//   theta-stage: quasi-Newton maximization of the profile objective at the
//                current masses, with analytic gradients for the regression
//                block and a finite-difference direction for log dispersion.
// Standard errors come from inverting a central-difference observed
// information matrix built on the analytic score.

#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gelc/model.hpp"
#include "gelc/npmle.hpp"
#include "gelc/partition.hpp"
#include "gelc/quadrature.hpp"

namespace gelc {

enum class StopRule { parameter_change, loglik_change, iteration_limit };

struct FitConfig {
    double eps_parameter = 1e-6;   // threshold on delta_theta + delta_w
    double eps_loglik = 1e-8;      // threshold on relative log-likelihood change
    int max_outer = 200;
    int max_inner = 10000;         // cap on w-stage self-consistency sweeps
    double quad_tol = 1e-8;
    int endpoint_round_digits = 12;
    bool compute_covariance = true;
    std::optional<ParameterVector> theta_start;  // default: GLM on interval midpoints
    // Hold gamma at this value throughout. The reported covariance then keeps
    // zero rows/columns at the gamma position.
    std::optional<double> fix_gamma;
};

struct FitResult {
    ParameterVector theta_hat;
    Eigen::VectorXd weights;        // cell masses, sum to one
    Partition partition;
    double loglik = 0.0;
    bool converged = false;
    StopRule stop_rule = StopRule::iteration_limit;
    int outer_iterations = 0;
    std::vector<double> outer_logliks;   // profile log-likelihood after each outer step
    double min_w_stage_delta = 0.0;      // most negative loglik change seen inside w-stages
    double self_consistency_residual = 0.0;  // sup-norm fixed-point residual of the masses
    double score_residual = 0.0;             // sup-norm of the mean score at the estimate
    Eigen::MatrixXd covariance;          // empty when the information was singular
    Eigen::VectorXd std_errors;          // empty when the information was singular
    bool covariance_ok = false;
    std::string message;
};

// Marginal log-likelihood of theta given fixed cell masses. Row-wise log
// shifts from the density matrix are folded back in, so this matches the
// unshifted likelihood.
double loglikelihood(const Dataset& data, const Partition& partition,
                     const Eigen::VectorXd& weights, Family family,
                     const ParameterVector& theta, double quad_tol = 1e-8);

// Log-likelihood together with its gradient in the natural parameters
// (alpha, beta..., gamma[, phi]). The regression block uses the analytic
// score kernels; the dispersion coordinate is also analytic here.
struct LoglikGradient {
    double loglik = 0.0;
    Eigen::VectorXd gradient;  // length free_parameter_count(family, p)
};
LoglikGradient loglik_gradient(const Dataset& data, const Partition& partition,
                               const Eigen::VectorXd& weights, Family family,
                               const ParameterVector& theta, double quad_tol = 1e-8);

// One theta-stage: quasi-Newton ascent from theta_start at fixed masses.
// Never returns a worse objective than the starting point (up to 1e-10).
// When fix_gamma is set the gamma coordinate is excluded from the search.
// grad_tol bounds the sup-norm of the mean score at exit.
std::pair<ParameterVector, double> maximize_theta(
    const Dataset& data, const Partition& partition, const Eigen::VectorXd& weights,
    Family family, const ParameterVector& theta_start, double quad_tol = 1e-8,
    std::optional<double> fix_gamma = std::nullopt, double grad_tol = 1e-6);

// Central-difference Jacobian of the analytic score in the natural
// parameters, symmetrized; this is the negated Hessian of the log-likelihood
// at fixed masses.
Eigen::MatrixXd observed_information(const Dataset& data, const Partition& partition,
                                     const Eigen::VectorXd& weights, Family family,
                                     const ParameterVector& theta, double quad_tol = 1e-8);

FitResult fit(const Dataset& data, Family family, const FitConfig& config = {});

// Names for the free parameters in pack order: intercept, x1..xp (or supplied
// names), z, and dispersion when the family has one.
std::vector<std::string> parameter_names(Family family, int p,
                                         const std::vector<std::string>& x_names = {});

}  // namespace gelc
