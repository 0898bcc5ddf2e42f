// simulation.hpp
//
// Monte Carlo study harness: data generation with a gap-based interval
// censoring process, replication orchestration with shared underlying draws
// across scenarios (so scenario contrasts are not polluted by generation
// noise), and the standard performance metrics with Monte Carlo standard
// errors.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "gelc/estimator.hpp"
#include "gelc/model.hpp"
#include "gelc/rng.hpp"

namespace gelc {

struct Scenario {
    std::string name;
    Family family = Family::gamma_log;
    ParameterVector true_theta;       // beta empty in the bundled designs
    int n = 100;
    int replications = 500;
    double z_mean = 12.0;             // exponential mean of the latent covariate
    double censor_mean_width = 0.0;   // mu; 0 generates fully observed [z, z]
    std::uint64_t seed = 1;
};

// Per-parameter performance. `relative` distinguishes relative bias (truth
// nonzero) from plain bias (truth zero); both are stored unscaled, display
// layers multiply by 100 where a percentage is wanted.
struct ParameterMetrics {
    std::string parameter;
    double truth = 0.0;
    bool relative = true;
    double bias = 0.0;          // mean (est - truth)/truth, or mean (est - truth)
    double bias_mcse = 0.0;
    double emp_se = 0.0;        // divisor R - 1
    double emp_se_mcse = 0.0;
    double rmse = 0.0;          // divisor R
    double rmse_mcse = 0.0;
    double coverage = 0.0;      // Wald intervals at the requested level
    double coverage_mcse = 0.0;
};

struct MetricsReport {
    std::string scenario;
    int replications_requested = 0;
    int replications_used = 0;      // fits contributing to the metrics
    int non_converged = 0;          // hit the iteration limit (excluded)
    int failed = 0;                 // fit threw (excluded)
    std::vector<ParameterMetrics> parameters;
    double total_seconds = 0.0;
    double mean_fit_seconds = 0.0;
    double max_fit_seconds = 0.0;
    std::vector<std::string> rng_log;  // one stream-address line per repetition
};

// n iid exponential draws with the given mean.
std::vector<double> generate_z(int n, double mean, RandomStream& rng);

// Outcomes y_i given z_i under eta_i = alpha + gamma z_i (beta is unused by
// the bundled designs; covariates enter only through the linear predictor
// when x columns are present, which the generator does not produce).
std::vector<double> generate_y(const std::vector<double>& z, Family family,
                               const ParameterVector& theta, RandomStream& rng);

// Gap-process censoring: an initial U(0, mu) gap followed by N(mu, sigma)
// gaps accumulated until the running total passes z_i; the bracketing pair of
// totals is the observed half-open interval. Nonpositive normal draws are
// redrawn (gaps are waiting times). mu = 0 returns exact intervals [z, z].
std::vector<ObservedInterval> censor(const std::vector<double>& z, double mu, double sigma,
                                     RandomStream& rng);

// The dataset a scenario induces for one repetition: draws are taken from
// purpose-tagged substreams of the scenario seed, so scenarios sharing a seed
// share the latent z (always), the outcomes (when the outcome model matches),
// and the intervals (when the censoring width matches). A pool of
// max(n, 500) observations is generated and the first n kept, which makes
// datasets nested across sample sizes.
Dataset scenario_dataset(const Scenario& sc, int repetition);

// Metrics over an R x K matrix of estimates. ses carries the Wald standard
// errors (same shape); rows with a nonfinite entry should be filtered by the
// caller. Throws DimensionError unless R >= 2.
MetricsReport compute_metrics(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& ses,
                              const Eigen::VectorXd& truths,
                              const std::vector<std::string>& names, double ci_level = 0.95);

// Run every scenario: generate, fit, aggregate in repetition order. `jobs`
// caps the number of worker threads (1 = serial); results are identical for
// any job count.
std::vector<MetricsReport> run_study(const std::vector<Scenario>& scenarios,
                                     const FitConfig& fit_config = {}, int jobs = 1);

// As run_study, but also exposing the per-replication estimates for one
// scenario (columns follow pack_parameters order). Used by the CLI to write
// estimate files next to the metrics.
struct StudyDetail {
    MetricsReport report;
    Eigen::MatrixXd estimates;  // used replicates only, in repetition order
    Eigen::MatrixXd std_errors;
    std::vector<int> repetition_index;
};
StudyDetail run_scenario(const Scenario& sc, const FitConfig& fit_config = {}, int jobs = 1);

}  // namespace gelc
