// pybind_module.cpp
//
// Python bindings for the main operations: model fitting, standalone
// nonparametric mass estimation, simulation studies, and the metric
// calculations. Results cross the boundary as plain dicts and numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "gelc/data_io.hpp"
#include "gelc/estimator.hpp"
#include "gelc/model.hpp"
#include "gelc/npmle.hpp"
#include "gelc/simulation.hpp"

namespace py = pybind11;

namespace {

gelc::Dataset build_dataset(const Eigen::VectorXd& y, const Eigen::VectorXd& zl,
                            const Eigen::VectorXd& zr,
                            const std::optional<Eigen::MatrixXd>& x) {
    const auto n = y.size();
    if (zl.size() != n || zr.size() != n)
        throw gelc::DimensionError("y, zl, zr must have equal length");
    if (x && x->rows() != n) throw gelc::DimensionError("x must have one row per observation");
    gelc::Dataset data(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        data[i].y = y[i];
        data[i].x = x ? Eigen::VectorXd(x->row(i)) : Eigen::VectorXd(0);
        if (zl[i] > zr[i])
            throw gelc::DomainError("zl > zr at index " + std::to_string(i));
        data[i].interval = gelc::make_interval(zl[i], zr[i]);
    }
    return data;
}

py::dict cells_to_dict(const gelc::Partition& part, const Eigen::VectorXd& mass) {
    std::vector<double> left, right;
    std::vector<bool> lc, rc;
    for (const auto& c : part.cells) {
        left.push_back(c.left);
        right.push_back(c.right);
        lc.push_back(c.left_closed);
        rc.push_back(c.right_closed);
    }
    py::dict d;
    d["left"] = left;
    d["right"] = right;
    d["left_closed"] = lc;
    d["right_closed"] = rc;
    d["mass"] = Eigen::VectorXd(mass);
    return d;
}

const char* stop_rule_name(gelc::StopRule r) {
    switch (r) {
        case gelc::StopRule::parameter_change: return "parameter_change";
        case gelc::StopRule::loglik_change: return "loglik_change";
        case gelc::StopRule::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

py::dict fit_to_dict(const gelc::FitResult& res, gelc::Family family,
                     const std::vector<std::string>& x_names) {
    py::dict out;
    out["converged"] = res.converged;
    out["stop_rule"] = stop_rule_name(res.stop_rule);
    out["outer_iterations"] = res.outer_iterations;
    out["loglik"] = res.loglik;
    out["score_residual"] = res.score_residual;
    out["self_consistency_residual"] = res.self_consistency_residual;
    out["outer_logliks"] = res.outer_logliks;
    out["message"] = res.message;

    py::dict theta;
    theta["alpha"] = res.theta_hat.alpha;
    theta["beta"] = Eigen::VectorXd(res.theta_hat.beta);
    theta["gamma"] = res.theta_hat.gamma;
    theta["phi"] = res.theta_hat.phi;
    out["theta"] = theta;

    out["estimates"] = pack_parameters(family, res.theta_hat);
    out["parameter_names"] = gelc::parameter_names(family, res.theta_hat.p(), x_names);
    if (res.covariance_ok) {
        out["std_errors"] = Eigen::VectorXd(res.std_errors);
        out["covariance"] = Eigen::MatrixXd(res.covariance);
    } else {
        out["std_errors"] = py::none();
        out["covariance"] = py::none();
    }
    out["support"] = cells_to_dict(res.partition, res.weights);
    return out;
}

py::dict metrics_to_dict(const gelc::MetricsReport& rep) {
    py::dict out;
    out["scenario"] = rep.scenario;
    out["replications_requested"] = rep.replications_requested;
    out["replications_used"] = rep.replications_used;
    out["non_converged"] = rep.non_converged;
    out["failed"] = rep.failed;
    out["total_seconds"] = rep.total_seconds;
    py::list params;
    for (const auto& pm : rep.parameters) {
        py::dict d;
        d["parameter"] = pm.parameter;
        d["truth"] = pm.truth;
        d["relative"] = pm.relative;
        d["bias"] = pm.bias;
        d["bias_mcse"] = pm.bias_mcse;
        d["emp_se"] = pm.emp_se;
        d["emp_se_mcse"] = pm.emp_se_mcse;
        d["rmse"] = pm.rmse;
        d["rmse_mcse"] = pm.rmse_mcse;
        d["coverage"] = pm.coverage;
        d["coverage_mcse"] = pm.coverage_mcse;
        params.append(d);
    }
    out["parameters"] = params;
    return out;
}

gelc::FitConfig make_config(double eps_p, double eps_l, double quad_tol, int max_outer,
                            std::optional<double> fix_gamma) {
    gelc::FitConfig config;
    config.eps_parameter = eps_p;
    config.eps_loglik = eps_l;
    config.quad_tol = quad_tol;
    config.max_outer = max_outer;
    config.fix_gamma = fix_gamma;
    return config;
}

}  // namespace

PYBIND11_MODULE(_gelc, m) {
    m.doc() = "GLM fitting with an interval-censored covariate";

    // Translators run most-recent-first, so the base type goes first and the
    // derived types shadow it.
    py::register_exception<gelc::Error>(m, "GelcError", PyExc_RuntimeError);
    py::register_exception<gelc::ParseError>(m, "GelcParseError", PyExc_ValueError);
    py::register_exception<gelc::RankError>(m, "GelcRankError", PyExc_ValueError);

    m.def(
        "fit",
        [](const Eigen::VectorXd& y, const Eigen::VectorXd& zl, const Eigen::VectorXd& zr,
           const std::string& family, const std::optional<Eigen::MatrixXd>& x,
           const std::vector<std::string>& x_names, double eps_p, double eps_l, double quad_tol,
           int max_outer, std::optional<double> fix_gamma) {
            const gelc::Family fam = gelc::family_from_name(family);
            const gelc::Dataset data = build_dataset(y, zl, zr, x);
            const gelc::FitResult res =
                gelc::fit(data, fam, make_config(eps_p, eps_l, quad_tol, max_outer, fix_gamma));
            return fit_to_dict(res, fam, x_names);
        },
        py::arg("y"), py::arg("zl"), py::arg("zr"), py::arg("family"),
        py::arg("x") = std::nullopt, py::arg("x_names") = std::vector<std::string>{},
        py::arg("eps_p") = 1e-6, py::arg("eps_l") = 1e-8, py::arg("quad_tol") = 1e-8,
        py::arg("max_outer") = 200, py::arg("fix_gamma") = std::nullopt,
        "Fit a GLM whose z covariate is observed as intervals [zl, zr) (exact when zl == zr).");

    m.def(
        "npmle",
        [](const Eigen::VectorXd& zl, const Eigen::VectorXd& zr, double eps_p) {
            std::vector<gelc::ObservedInterval> intervals;
            intervals.reserve(zl.size());
            if (zl.size() != zr.size())
                throw gelc::DimensionError("zl and zr must have equal length");
            for (Eigen::Index i = 0; i < zl.size(); ++i)
                intervals.push_back(gelc::make_interval(zl[i], zr[i]));
            const gelc::Partition part = gelc::classic_turnbull_intervals(intervals);
            const gelc::WeightSolveResult ws = gelc::solve_classic_weights(part, eps_p);
            py::dict out = cells_to_dict(part, ws.w);
            out["converged"] = ws.converged;
            out["iterations"] = ws.iterations;
            out["loglik"] = ws.loglik;
            return out;
        },
        py::arg("zl"), py::arg("zr"), py::arg("eps_p") = 1e-8,
        "Classic nonparametric mass estimate for interval-censored values.");

    m.def(
        "compute_metrics",
        [](const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& ses,
           const Eigen::VectorXd& truths, const std::vector<std::string>& names,
           double ci_level) {
            return metrics_to_dict(
                gelc::compute_metrics(estimates, ses, truths, names, ci_level));
        },
        py::arg("estimates"), py::arg("ses"), py::arg("truths"), py::arg("names"),
        py::arg("ci_level") = 0.95,
        "Bias/EmpSE/RMSE/coverage and their Monte Carlo standard errors.");

    m.def(
        "run_study_json",
        [](const std::string& scenarios_json, int jobs, double quad_tol, int reps_override) {
            std::vector<gelc::Scenario> scenarios =
                gelc::parse_scenarios(scenarios_json, "<python>");
            if (reps_override > 0)
                for (auto& sc : scenarios) sc.replications = reps_override;
            gelc::FitConfig config;
            config.quad_tol = quad_tol;
            py::list out;
            for (const auto& rep : gelc::run_study(scenarios, config, jobs))
                out.append(metrics_to_dict(rep));
            return out;
        },
        py::arg("scenarios_json"), py::arg("jobs") = 1, py::arg("quad_tol") = 1e-8,
        py::arg("reps_override") = 0,
        "Run a simulation study from a scenario JSON document (see load_scenarios).");
}
