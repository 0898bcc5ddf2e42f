// npmle.hpp
//
// Self-consistent weight updates for the covariate-distribution masses:
// the classic Turnbull step (membership only) and the outcome-informed step
// that reweights membership by the cell-averaged conditional density C_ij.
// Both are EM steps, so the matching conditional loglikelihood never
// decreases along the iteration.

#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "gelc/partition.hpp"
#include "gelc/quadrature.hpp"

namespace gelc {

// One EM step of w_j <- n^-1 sum_i alpha_ij w_j / sum_k alpha_ik w_k.
// `membership` is any n x m 0/1 matrix (classic alpha or augmented kappa).
Eigen::VectorXd turnbull_update(
    const Eigen::VectorXd& weights,
    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& membership);

// One EM step of w_j <- n^-1 sum_i kappa_ij w_j C_ij / sum_k kappa_ik w_k C_ik.
Eigen::VectorXd gelc_weight_update(const Eigen::VectorXd& weights, const Partition& part,
                                   const CellDensityMatrix& C);

// Uniform mass over cells covered by at least one observation (all cells of a
// built Partition qualify), zero elsewhere.
Eigen::VectorXd uniform_weights(const Partition& part);

struct WeightSolveResult {
    Eigen::VectorXd w;
    int iterations = 0;
    double last_delta = 0.0;   // final ||w - w_old||_2 / ||w_old||_2
    double residual = 0.0;     // max_j |w_j - update(w)_j| at the returned w
    bool converged = false;
    double loglik = 0.0;       // conditional loglik sum_i log sum_j kappa w_j C_ij at return
    double min_loglik_delta = 0.0;  // most negative per-iteration loglik change observed
};

// Iterate gelc_weight_update until the relative L2 change drops below eps_p
// (or max_iter). Weights below 1e-14 are zeroed and the vector renormalized
// once, at convergence.
WeightSolveResult solve_weights(const Eigen::VectorXd& start, const Partition& part,
                                const CellDensityMatrix& C, double eps_p = 1e-6,
                                int max_iter = 10000);

// sum_i (log sum_j kappa_ij w_j C_ij + row_log_shift_i); throws
// DegenerateLikelihoodError when a row has zero conditional mass.
double conditional_loglik(const Eigen::VectorXd& w, const Partition& part,
                          const CellDensityMatrix& C);

// Iterate the outcome-free turnbull_update from uniform masses on the given
// partition (classic NPMLE of the covariate distribution). Same flooring and
// diagnostics as solve_weights.
WeightSolveResult solve_classic_weights(const Partition& part, double eps_p = 1e-8,
                                        int max_iter = 100000);

}  // namespace gelc
