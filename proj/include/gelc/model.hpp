// model.hpp
//
// Domain types for interval-censored-covariate GLM fitting: observation
// intervals, parameter vectors, and the three supported exponential-dispersion
// families (Gamma with log link, Bernoulli with logit link, Gaussian with
// identity link). Densities and per-point scores here are the building blocks
// every other module integrates, sums, or differentiates.

#pragma once

#include <Eigen/Core>
#include <string_view>
#include <vector>

#include "gelc/errors.hpp"

namespace gelc {

enum class Family { gamma_log, bernoulli_logit, gaussian_identity };

constexpr bool has_dispersion(Family f) { return f != Family::bernoulli_logit; }

const char* family_name(Family f);
Family family_from_name(std::string_view name);  // throws DomainError on unknown names

// A censoring interval for the covariate Z. Exact observations are the
// degenerate case left == right (both endpoints closed). Censored intervals
// ingested from data follow the half-open convention [left, right), but the
// type supports arbitrary openness so partition cells can be represented too.
struct ObservedInterval {
    double left = 0.0;
    double right = 0.0;
    bool left_closed = true;
    bool right_closed = true;

    bool is_point() const { return left == right; }
    double length() const { return right - left; }

    bool contains(double v) const {
        if (v < left || v > right) return false;
        if (v == left && !left_closed) return false;
        if (v == right && !right_closed) return false;
        return true;
    }

    // Is `inner` a subset of *this? `inner` must itself be nonempty.
    bool contains_interval(const ObservedInterval& inner) const {
        if (inner.left < left) return false;
        if (inner.left == left && inner.left_closed && !left_closed) return false;
        if (inner.right > right) return false;
        if (inner.right == right && inner.right_closed && !right_closed) return false;
        return true;
    }

    bool intersects(const ObservedInterval& o) const {
        if (right < o.left || o.right < left) return false;
        if (right == o.left && !(right_closed && o.left_closed)) return false;
        if (o.right == left && !(o.right_closed && left_closed)) return false;
        return true;
    }

    bool operator==(const ObservedInterval& o) const {
        return left == o.left && right == o.right && left_closed == o.left_closed &&
               right_closed == o.right_closed;
    }
};

// Canonical form for an ingested interval: [l, r) when censored, [z, z] exact.
ObservedInterval make_interval(double left, double right);

// Throws DomainError unless the interval is nonempty with finite endpoints.
void validate_interval(const ObservedInterval& iv);

struct Observation {
    double y = 0.0;
    Eigen::VectorXd x;  // fully observed covariates, length p (possibly 0)
    ObservedInterval interval;
};

using Dataset = std::vector<Observation>;

// theta = (alpha, beta', gamma, phi). Bernoulli fixes phi == 1, leaving p + 2
// free parameters; the dispersion families expose p + 3.
struct ParameterVector {
    double alpha = 0.0;
    Eigen::VectorXd beta;
    double gamma = 0.0;
    double phi = 1.0;

    int p() const { return static_cast<int>(beta.size()); }
};

inline int free_parameter_count(Family f, int p) { return has_dispersion(f) ? p + 3 : p + 2; }

// Flat layout (alpha, beta_1..beta_p, gamma[, phi]) used by optimizers,
// covariance matrices, and reports.
Eigen::VectorXd pack_parameters(Family f, const ParameterVector& theta);
ParameterVector unpack_parameters(Family f, const Eigen::VectorXd& v, int p);

double linear_predictor(const ParameterVector& theta, const Eigen::VectorXd& x, double z);

// Inverse link, its derivative, and the variance function.
double family_mean(Family f, double eta);
double mean_derivative(Family f, double eta);
double variance_function(Family f, double mu);

bool y_in_support(Family f, double y);

// log f(y | eta; phi). Throws DomainError for y outside the family support or
// phi <= 0 (phi is ignored for Bernoulli).
double log_density(Family f, double y, double eta, double phi);

// d/dtheta log f at (y, x, z). Layout matches pack_parameters: the regression
// block is ((y - mu)/(phi V(mu))) * dmu/deta * (1, x, z), followed by the
// dispersion partial for families that have one.
Eigen::VectorXd score_point(Family f, double y, const Eigen::VectorXd& x, double z,
                            const ParameterVector& theta);

// Checks y support, finite covariates, and interval validity for every row.
void validate_dataset(Family f, const Dataset& data);

double digamma(double x);

namespace diagnostics {
// The linear predictor is clamped to +-700 before exponentiation. The counter
// lets tests assert the guard never engaged on a given run.
long eta_clamp_count();
void reset_eta_clamp_count();
}  // namespace diagnostics

namespace detail {
// Clamp with counting; hot paths may branch on |eta| <= 700 first and only
// call this on the rare out-of-range values.
double clamp_eta_counted(double eta);
}  // namespace detail

}  // namespace gelc
