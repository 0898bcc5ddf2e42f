// quadrature.hpp
//
// Numerical integration of the conditional outcome density over partition
// cells: the C_ij(theta) matrix coupling the outcome model to the weight
// updates, and the score-weighted integrals behind the analytic gradient.
// The workhorse is adaptive 15-point Gauss-Kronrod with bisection; a
// doubling composite-Simpson rule serves as the fallback when the adaptive
// scheme fails to settle.

#pragma once

#include <Eigen/Core>
#include <utility>

#include "gelc/model.hpp"
#include "gelc/partition.hpp"

namespace gelc {

struct IntegralEstimate {
    double value = 0.0;
    double error = 0.0;  // estimated absolute error
};

// C_ij(theta) for every covered (i, j): the cell-averaged density
// (integral of f(y_i | x_i, u; theta) du over I_j) / |I_j|, or the density at
// the point for degenerate cells. Entries where kappa = 0 are unspecified.
//
// Rows whose densities underflow in linear arithmetic are stored shifted:
// stored(i,j) = C_ij * exp(-row_log_shift[i]). Ratios within a row are
// unaffected; log-likelihood accumulation adds the shift back.
struct CellDensityMatrix {
    Eigen::MatrixXd values;
    Eigen::VectorXd row_log_shift;
};

// Integral of the conditional density over one cell, with estimated absolute
// error <= tol * (1 + |result|). Degenerate cells return the density value at
// the point (the caller owns the point-mass convention).
double integrate_density(Family family, double y, const Eigen::VectorXd& x,
                         const ParameterVector& theta, const ObservedInterval& cell, double tol);

// Same, but exposing the error estimate (used by nested-tolerance checks).
IntegralEstimate integrate_density_est(Family family, double y, const Eigen::VectorXd& x,
                                       const ParameterVector& theta, const ObservedInterval& cell,
                                       double tol);

// The pair (integral of score * density, integral of density) over a cell, so
// callers can form the per-observation score ratio. Degenerate cells return
// the point evaluations.
std::pair<Eigen::VectorXd, double> integrate_score_weighted(Family family, double y,
                                                            const Eigen::VectorXd& x,
                                                            const ParameterVector& theta,
                                                            const ObservedInterval& cell,
                                                            double tol);

CellDensityMatrix cell_density_matrix(const Dataset& data, const Partition& part, Family family,
                                      const ParameterVector& theta, double tol);

namespace detail {
// Score-weighted cell integrals reduced to their scalar kernels:
//   fbar   = integral of f du                  (shifted by exp(-log_shift))
//   s1     = integral of s_eta f du
//   su     = integral of s_eta u f du
//   sphi   = integral of s_phi f du            (dispersion families only)
// The full score integral is then (s1, s1*x, su, sphi) against the parameter
// layout (alpha, beta, gamma, phi).
struct ScoreCellIntegrals {
    double fbar = 0.0;
    double s1 = 0.0;
    double su = 0.0;
    double sphi = 0.0;
};

ScoreCellIntegrals score_cell_integrals(Family family, double y, const Eigen::VectorXd& x,
                                        const ParameterVector& theta, const ObservedInterval& cell,
                                        double tol, double log_shift);

double integrate_density_shifted(Family family, double y, const Eigen::VectorXd& x,
                                 const ParameterVector& theta, const ObservedInterval& cell,
                                 double tol, double log_shift, double* error_out);
}  // namespace detail

}  // namespace gelc
