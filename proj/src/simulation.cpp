// simulation.cpp

#include "gelc/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "gelc/errors.hpp"

namespace gelc {

namespace {

// Stream purposes. The y stream is tagged with the full outcome model and the
// censor stream with the width, so "same model" or "same width" implies
// "same draws" across scenarios with a common seed.
std::uint64_t z_purpose() { return stream_tag("covariate-z"); }

std::uint64_t y_purpose(const Scenario& sc) {
    return stream_tag("outcome-y", {static_cast<double>(static_cast<int>(sc.family)),
                                    sc.true_theta.alpha, sc.true_theta.gamma, sc.true_theta.phi});
}

std::uint64_t censor_purpose(const Scenario& sc) {
    return stream_tag("censor-intervals", {sc.censor_mean_width});
}

int pool_size(const Scenario& sc) { return std::max(sc.n, 500); }

}  // namespace

std::vector<double> generate_z(int n, double mean, RandomStream& rng) {
    if (mean <= 0.0) throw DomainError("generate_z: mean must be positive");
    std::vector<double> z(n);
    for (double& v : z) v = rng.next_exponential(mean);
    return z;
}

std::vector<double> generate_y(const std::vector<double>& z, Family family,
                               const ParameterVector& theta, RandomStream& rng) {
    std::vector<double> y(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double eta = theta.alpha + theta.gamma * z[i];
        const double mu = family_mean(family, eta);
        switch (family) {
            case Family::gamma_log: {
                const double shape = 1.0 / theta.phi;
                y[i] = rng.next_gamma(shape) * theta.phi * mu;  // scale = phi * mu
                break;
            }
            case Family::bernoulli_logit:
                y[i] = rng.next_bernoulli(mu) ? 1.0 : 0.0;
                break;
            case Family::gaussian_identity:
                y[i] = rng.next_normal(mu, std::sqrt(theta.phi));
                break;
        }
    }
    return y;
}

std::vector<ObservedInterval> censor(const std::vector<double>& z, double mu, double sigma,
                                     RandomStream& rng) {
    std::vector<ObservedInterval> out(z.size());
    if (mu == 0.0) {
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = make_interval(z[i], z[i]);
        return out;
    }
    if (mu < 0.0) throw DomainError("censor: mean width must be nonnegative");
    for (std::size_t i = 0; i < z.size(); ++i) {
        double prev = 0.0;
        double tau = rng.next_uniform(0.0, mu);
        while (z[i] >= tau) {
            double gap = rng.next_normal(mu, sigma);
            while (gap <= 0.0) gap = rng.next_normal(mu, sigma);
            prev = tau;
            tau += gap;
        }
        out[i] = make_interval(prev, tau);
    }
    return out;
}

Dataset scenario_dataset(const Scenario& sc, int repetition) {
    const int pool = pool_size(sc);
    RandomStream zs(sc.seed, z_purpose(), static_cast<std::uint64_t>(repetition));
    const std::vector<double> z = generate_z(pool, sc.z_mean, zs);

    RandomStream ys(sc.seed, y_purpose(sc), static_cast<std::uint64_t>(repetition));
    const std::vector<double> y = generate_y(z, sc.family, sc.true_theta, ys);

    RandomStream cs(sc.seed, censor_purpose(sc), static_cast<std::uint64_t>(repetition));
    const std::vector<ObservedInterval> intervals =
        censor(z, sc.censor_mean_width, 0.75 * sc.censor_mean_width, cs);

    Dataset data(sc.n);
    for (int i = 0; i < sc.n; ++i) {
        data[i].y = y[i];
        data[i].x = Eigen::VectorXd(0);
        data[i].interval = intervals[i];
    }
    return data;
}

MetricsReport compute_metrics(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& ses,
                              const Eigen::VectorXd& truths,
                              const std::vector<std::string>& names, double ci_level) {
    const int R = static_cast<int>(estimates.rows());
    const int K = static_cast<int>(estimates.cols());
    if (R < 2) throw DimensionError("compute_metrics: need at least 2 replicates");
    if (ses.rows() != R || ses.cols() != K || truths.size() != K ||
        static_cast<int>(names.size()) != K)
        throw DimensionError("compute_metrics: inconsistent input shapes");
    if (!(ci_level > 0.0 && ci_level < 1.0))
        throw DomainError("compute_metrics: ci_level must be in (0, 1)");

    const double zq = inverse_normal_cdf(0.5 + 0.5 * ci_level);
    MetricsReport rep;
    rep.replications_requested = R;
    rep.replications_used = R;

    for (int k = 0; k < K; ++k) {
        ParameterMetrics pm;
        pm.parameter = names[k];
        pm.truth = truths[k];
        pm.relative = truths[k] != 0.0;

        const Eigen::VectorXd est = estimates.col(k);
        const double mean = est.mean();
        const Eigen::VectorXd err = est.array() - truths[k];

        // Bias and its MCSE, on the relative scale when the truth is nonzero.
        const Eigen::VectorXd bias_terms = pm.relative ? (err / truths[k]).eval() : err;
        pm.bias = bias_terms.mean();
        pm.bias_mcse = std::sqrt((bias_terms.array() - pm.bias).square().sum() /
                                 (static_cast<double>(R) * (R - 1)));

        pm.emp_se = std::sqrt((est.array() - mean).square().sum() / (R - 1));
        pm.emp_se_mcse = pm.emp_se / std::sqrt(2.0 * (R - 1));

        const Eigen::ArrayXd mse_terms = err.array().square();
        pm.rmse = std::sqrt(mse_terms.sum() / R);
        if (pm.rmse > 0.0) {
            const double mse_mean = mse_terms.mean();
            pm.rmse_mcse = std::sqrt((mse_terms - mse_mean).square().sum() /
                                     (static_cast<double>(R) * (R - 1))) /
                           (2.0 * pm.rmse);
        }

        int covered = 0;
        for (int r = 0; r < R; ++r) {
            const double lb = estimates(r, k) - zq * ses(r, k);
            const double ub = estimates(r, k) + zq * ses(r, k);
            if (lb <= truths[k] && truths[k] <= ub) ++covered;
        }
        pm.coverage = static_cast<double>(covered) / R;
        pm.coverage_mcse = std::sqrt(pm.coverage * (1.0 - pm.coverage) / R);

        rep.parameters.push_back(std::move(pm));
    }
    return rep;
}

StudyDetail run_scenario(const Scenario& sc, const FitConfig& fit_config, int jobs) {
    if (sc.replications < 2) throw DomainError("scenario needs at least 2 replications");
    if (sc.n < 3) throw DomainError("scenario sample size too small");

    const int R = sc.replications;
    const int p = sc.true_theta.p();
    const int dim = free_parameter_count(sc.family, p);

    struct RepOutcome {
        Eigen::VectorXd est;
        Eigen::VectorXd se;
        bool usable = false;
        bool non_converged = false;
        bool failed = false;
        double seconds = 0.0;
    };
    std::vector<RepOutcome> outcomes(R);

    const auto t_start = std::chrono::steady_clock::now();
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= R) return;
            RepOutcome& oc = outcomes[r];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const Dataset data = scenario_dataset(sc, r);
                const FitResult fr = fit(data, sc.family, fit_config);
                if (fr.converged && fr.covariance_ok) {
                    oc.est = pack_parameters(sc.family, fr.theta_hat);
                    oc.se = fr.std_errors;
                    oc.usable = true;
                } else {
                    oc.non_converged = true;
                }
            } catch (const Error&) {
                oc.failed = true;
            }
            oc.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                             .count();
        }
    };

    const int nthreads = std::max(1, std::min(jobs, R));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    StudyDetail detail;
    std::vector<int> used;
    for (int r = 0; r < R; ++r)
        if (outcomes[r].usable) used.push_back(r);

    const int U = static_cast<int>(used.size());
    if (U < 2)
        throw DomainError("scenario '" + sc.name + "': fewer than 2 usable replications");

    detail.estimates.resize(U, dim);
    detail.std_errors.resize(U, dim);
    for (int u = 0; u < U; ++u) {
        detail.estimates.row(u) = outcomes[used[u]].est.transpose();
        detail.std_errors.row(u) = outcomes[used[u]].se.transpose();
        detail.repetition_index.push_back(used[u]);
    }

    detail.report = compute_metrics(detail.estimates, detail.std_errors,
                                    pack_parameters(sc.family, sc.true_theta),
                                    parameter_names(sc.family, p));
    detail.report.scenario = sc.name;
    detail.report.replications_requested = R;
    detail.report.replications_used = U;

    double total_fit = 0.0, max_fit = 0.0;
    for (const auto& oc : outcomes) {
        detail.report.non_converged += oc.non_converged ? 1 : 0;
        detail.report.failed += oc.failed ? 1 : 0;
        total_fit += oc.seconds;
        max_fit = std::max(max_fit, oc.seconds);
    }
    detail.report.mean_fit_seconds = total_fit / R;
    detail.report.max_fit_seconds = max_fit;
    detail.report.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    char line[160];
    for (int r = 0; r < R; ++r) {
        std::snprintf(line, sizeof(line),
                      "rep=%d seed=%llu z=%016llx y=%016llx censor=%016llx", r,
                      static_cast<unsigned long long>(sc.seed),
                      static_cast<unsigned long long>(z_purpose()),
                      static_cast<unsigned long long>(y_purpose(sc)),
                      static_cast<unsigned long long>(censor_purpose(sc)));
        detail.report.rng_log.emplace_back(line);
    }
    return detail;
}

std::vector<MetricsReport> run_study(const std::vector<Scenario>& scenarios,
                                     const FitConfig& fit_config, int jobs) {
    std::vector<MetricsReport> reports;
    reports.reserve(scenarios.size());
    for (const Scenario& sc : scenarios)
        reports.push_back(run_scenario(sc, fit_config, jobs).report);
    return reports;
}

}  // namespace gelc
