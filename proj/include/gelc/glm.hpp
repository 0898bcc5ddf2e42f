// glm.hpp
//
// Small internal GLM fitter (iteratively reweighted least squares) used to
// initialize the interval-censored estimator from interval midpoints. Supports
// the same response families as the main estimator. Dispersion for the gamma
// and gaussian families is the Pearson estimate, which is accurate enough for
// a starting value.

#pragma once

#include <Eigen/Core>

#include "gelc/model.hpp"

namespace gelc {

struct GlmFit {
    Eigen::VectorXd coefficients;  // one per design column
    double dispersion = 1.0;
    bool converged = false;
    int iterations = 0;
    double deviance_loglik = 0.0;  // complete-data log-likelihood at the fit
};

// X carries the intercept column explicitly. Throws RankError when the design
// is column rank deficient and DomainError on responses outside the family
// support.
GlmFit fit_glm(Family family, const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
               int max_iterations = 100, double tolerance = 1e-12);

}  // namespace gelc
