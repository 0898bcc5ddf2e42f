// gelc_main.cpp
//
// Command-line front end: fit interval-censored-covariate GLMs from delimited
// data files, run simulation studies from scenario JSON, and expose the
// nonparametric mass estimates on their own. Exit codes: 0 success, 1 usage,
// 2 parse/validation, 3 rank deficiency, 4 likelihood or convergence trouble,
// 5 file I/O.

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gelc/data_io.hpp"
#include "gelc/estimator.hpp"
#include "gelc/model.hpp"
#include "gelc/npmle.hpp"
#include "gelc/rng.hpp"
#include "gelc/simulation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitRank = 3;
constexpr int kExitConvergence = 4;
constexpr int kExitIo = 5;

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string stop_rule_name(gelc::StopRule r) {
    switch (r) {
        case gelc::StopRule::parameter_change: return "parameter_change";
        case gelc::StopRule::loglik_change: return "loglik_change";
        case gelc::StopRule::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

std::string interval_text(const gelc::ObservedInterval& iv) {
    return std::string(iv.left_closed ? "[" : "(") + fmt6(iv.left) + ", " + fmt6(iv.right) +
           (iv.right_closed ? "]" : ")");
}

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out.empty() ? "scenario" : out;
}

// The exponentiated-coefficient helper column applies to log and logit links
// (rate ratio / odds ratio per unit of the covariate); identity gets none.
const char* exp_column_name(gelc::Family family) {
    switch (family) {
        case gelc::Family::gamma_log: return "rate ratio";
        case gelc::Family::bernoulli_logit: return "odds ratio";
        case gelc::Family::gaussian_identity: return nullptr;
    }
    return nullptr;
}

struct FitArgs {
    std::string data_path;
    std::string family;
    double eps_p = 1e-6;
    double eps_l = 1e-8;
    double quad_tol = 1e-8;
    int max_outer = 200;
    bool as_json = false;
    std::optional<double> fix_gamma;
};

nlohmann::json fit_to_json(const gelc::FitResult& res, gelc::Family family,
                           const std::vector<std::string>& names, double zq) {
    nlohmann::json out;
    out["family"] = gelc::family_name(family);
    out["observations"] = res.partition.n();
    out["cells"] = res.partition.m();
    out["converged"] = res.converged;
    out["stop_rule"] = stop_rule_name(res.stop_rule);
    out["outer_iterations"] = res.outer_iterations;
    out["loglik"] = res.loglik;
    out["score_residual"] = res.score_residual;
    out["self_consistency_residual"] = res.self_consistency_residual;
    if (!res.message.empty()) out["message"] = res.message;

    const Eigen::VectorXd est = gelc::pack_parameters(family, res.theta_hat);
    nlohmann::json params = nlohmann::json::array();
    for (int k = 0; k < est.size(); ++k) {
        nlohmann::json row;
        row["name"] = names[k];
        row["estimate"] = est[k];
        if (res.covariance_ok) {
            const double se = res.std_errors[k];
            row["std_error"] = se;
            if (se > 0.0) row["z_value"] = est[k] / se;
            row["ci_lower"] = est[k] - zq * se;
            row["ci_upper"] = est[k] + zq * se;
        }
        if (exp_column_name(family) && names[k] != "phi") row["exp_estimate"] = std::exp(est[k]);
        params.push_back(std::move(row));
    }
    out["parameters"] = std::move(params);

    nlohmann::json cells = nlohmann::json::array();
    for (int j = 0; j < res.partition.m(); ++j) {
        const auto& c = res.partition.cells[j];
        cells.push_back({{"left", c.left},
                         {"right", c.right},
                         {"left_closed", c.left_closed},
                         {"right_closed", c.right_closed},
                         {"mass", res.weights[j]}});
    }
    out["weights"] = std::move(cells);
    return out;
}

void print_fit_table(const gelc::FitResult& res, gelc::Family family,
                     const std::vector<std::string>& names, double zq) {
    std::printf("family: %s\n", gelc::family_name(family));
    std::printf("observations: %d   support cells: %d\n", res.partition.n(), res.partition.m());
    std::printf("converged: %s (%s) after %d outer iterations\n", res.converged ? "yes" : "NO",
                stop_rule_name(res.stop_rule).c_str(), res.outer_iterations);
    std::printf("loglikelihood: %s\n", fmt6(res.loglik).c_str());
    if (!res.message.empty()) std::printf("note: %s\n", res.message.c_str());
    std::printf("\n");

    const Eigen::VectorXd est = gelc::pack_parameters(family, res.theta_hat);
    const char* expname = exp_column_name(family);
    std::printf("%-14s %12s %12s %9s %12s %12s", "parameter", "estimate", "std.error", "z",
                "ci.lower", "ci.upper");
    if (expname) std::printf(" %12s", expname);
    std::printf("\n");
    for (int k = 0; k < est.size(); ++k) {
        std::printf("%-14s %12s", names[k].c_str(), fmt6(est[k]).c_str());
        if (res.covariance_ok && res.std_errors[k] > 0.0) {
            const double se = res.std_errors[k];
            std::printf(" %12s %9s %12s %12s", fmt6(se).c_str(), fmt6(est[k] / se).c_str(),
                        fmt6(est[k] - zq * se).c_str(), fmt6(est[k] + zq * se).c_str());
        } else {
            std::printf(" %12s %9s %12s %12s", "NA", "NA", "NA", "NA");
        }
        if (expname)
            std::printf(" %12s", names[k] != "phi" ? fmt6(std::exp(est[k])).c_str() : "");
        std::printf("\n");
    }
}

int run_fit(const FitArgs& args) {
    const gelc::Family family = gelc::family_from_name(args.family);
    const gelc::DataFileContent content = gelc::read_data_file(args.data_path);

    gelc::FitConfig config;
    config.eps_parameter = args.eps_p;
    config.eps_loglik = args.eps_l;
    config.quad_tol = args.quad_tol;
    config.max_outer = args.max_outer;
    config.fix_gamma = args.fix_gamma;

    const gelc::FitResult res = gelc::fit(content.data, family, config);
    const int p = static_cast<int>(content.x_names.size());
    const std::vector<std::string> names = gelc::parameter_names(family, p, content.x_names);
    const double zq = gelc::inverse_normal_cdf(0.975);

    if (args.as_json) {
        std::cout << fit_to_json(res, family, names, zq).dump(2) << "\n";
    } else {
        print_fit_table(res, family, names, zq);
    }
    return res.converged ? kExitOk : kExitConvergence;
}

struct NpmleArgs {
    std::string data_path;
    std::string mode = "classic";
    std::string family;
    double eps_p = 1e-8;
    bool as_json = false;
    std::optional<double> fix_gamma;
};

int run_npmle(const NpmleArgs& args) {
    const gelc::DataFileContent content = gelc::read_data_file(args.data_path);
    std::vector<gelc::ObservedInterval> intervals;
    intervals.reserve(content.data.size());
    for (const auto& o : content.data) intervals.push_back(o.interval);

    gelc::Partition part;
    Eigen::VectorXd mass;
    bool converged = true;
    if (args.mode == "classic") {
        part = gelc::classic_turnbull_intervals(intervals);
        const gelc::WeightSolveResult ws = gelc::solve_classic_weights(part, args.eps_p);
        mass = ws.w;
        converged = ws.converged;
    } else if (args.mode == "augmented") {
        if (args.family.empty())
            throw gelc::DomainError("augmented mode requires --family (uses the outcome model)");
        gelc::FitConfig config;
        config.eps_parameter = args.eps_p;
        config.fix_gamma = args.fix_gamma;
        const gelc::FitResult res =
            gelc::fit(content.data, gelc::family_from_name(args.family), config);
        part = res.partition;
        mass = res.weights;
        converged = res.converged;
    } else {
        throw CLI::ValidationError("--mode must be classic or augmented");
    }

    if (args.as_json) {
        nlohmann::json out;
        out["mode"] = args.mode;
        out["cells"] = nlohmann::json::array();
        for (int j = 0; j < part.m(); ++j) {
            const auto& c = part.cells[j];
            out["cells"].push_back({{"left", c.left},
                                    {"right", c.right},
                                    {"left_closed", c.left_closed},
                                    {"right_closed", c.right_closed},
                                    {"mass", mass[j]}});
        }
        std::cout << out.dump(2) << "\n";
    } else {
        std::printf("%-28s %14s\n", "cell", "mass");
        for (int j = 0; j < part.m(); ++j)
            std::printf("%-28s %14s\n", interval_text(part.cells[j]).c_str(),
                        fmt6(mass[j]).c_str());
    }
    return converged ? kExitOk : kExitConvergence;
}

struct SimArgs {
    std::string scenario_path;
    std::string out_dir = ".";
    int reps_override = 0;
    int jobs = 0;
    double quad_tol = 1e-8;
};

void write_metrics_csv(std::ofstream& out, const gelc::MetricsReport& rep) {
    auto row = [&](const std::string& param, const char* metric, double value) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        out << rep.scenario << "," << param << "," << metric << "," << buf << "\n";
    };
    for (const auto& pm : rep.parameters) {
        row(pm.parameter, pm.relative ? "relbias" : "bias", pm.bias);
        row(pm.parameter, pm.relative ? "relbias_mcse" : "bias_mcse", pm.bias_mcse);
        row(pm.parameter, "empse", pm.emp_se);
        row(pm.parameter, "empse_mcse", pm.emp_se_mcse);
        row(pm.parameter, "rmse", pm.rmse);
        row(pm.parameter, "rmse_mcse", pm.rmse_mcse);
        row(pm.parameter, "coverage", pm.coverage);
        row(pm.parameter, "coverage_mcse", pm.coverage_mcse);
    }
    row("", "replications_used", rep.replications_used);
    row("", "non_converged", rep.non_converged);
    row("", "failed", rep.failed);
}

void write_summary(std::ofstream& out, const gelc::MetricsReport& rep) {
    out << "scenario: " << rep.scenario << "\n";
    out << "  replications: " << rep.replications_used << " used of "
        << rep.replications_requested << " (" << rep.non_converged << " non-converged, "
        << rep.failed << " failed)\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "  timing: total %.1fs, per fit mean %.2fs max %.2fs\n",
                  rep.total_seconds, rep.mean_fit_seconds, rep.max_fit_seconds);
    out << buf;
    std::snprintf(buf, sizeof(buf), "  %-12s %10s %10s %10s %10s %10s\n", "parameter",
                  "bias[%]", "(mcse)", "empse", "rmse", "cp");
    out << buf;
    for (const auto& pm : rep.parameters) {
        std::snprintf(buf, sizeof(buf), "  %-12s %10.3f %10.3f %10.4g %10.4g %10.3f%s\n",
                      pm.parameter.c_str(), 100.0 * pm.bias, 100.0 * pm.bias_mcse, pm.emp_se,
                      pm.rmse, pm.coverage, pm.relative ? "" : "  (absolute bias; truth = 0)");
        out << buf;
    }
    out << "\n";
}

int run_simulate(const SimArgs& args) {
    std::vector<gelc::Scenario> scenarios = gelc::load_scenarios(args.scenario_path);
    if (args.reps_override > 0)
        for (auto& sc : scenarios) sc.replications = args.reps_override;

    int jobs = args.jobs;
    if (jobs <= 0) {
        if (const char* env = std::getenv("GELC_JOBS")) jobs = std::atoi(env);
        if (jobs <= 0) jobs = 1;
    }

    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    if (ec) throw gelc::IoError("cannot create output directory: " + args.out_dir);

    std::ofstream metrics(std::filesystem::path(args.out_dir) / "metrics.csv");
    std::ofstream summary(std::filesystem::path(args.out_dir) / "summary.txt");
    std::ofstream rnglog(std::filesystem::path(args.out_dir) / "rng_log.txt");
    if (!metrics || !summary || !rnglog)
        throw gelc::IoError("cannot write into output directory: " + args.out_dir);
    metrics << "scenario,parameter,metric,value\n";

    gelc::FitConfig config;
    config.quad_tol = args.quad_tol;

    bool all_ok = true;
    for (const auto& sc : scenarios) {
        std::printf("scenario %s: n=%d R=%d family=%s mu=%g ...\n", sc.name.c_str(), sc.n,
                    sc.replications, gelc::family_name(sc.family), sc.censor_mean_width);
        std::fflush(stdout);
        try {
            const gelc::StudyDetail detail = gelc::run_scenario(sc, config, jobs);
            write_metrics_csv(metrics, detail.report);
            write_summary(summary, detail.report);
            for (const auto& line : detail.report.rng_log) rnglog << line << "\n";

            std::ofstream est(std::filesystem::path(args.out_dir) /
                              ("estimates_" + sanitize(sc.name) + ".csv"));
            const auto names =
                gelc::parameter_names(sc.family, sc.true_theta.p());
            est << "rep";
            for (const auto& nm : names) est << "," << nm;
            for (const auto& nm : names) est << ",se_" << nm;
            est << "\n";
            char buf[32];
            for (int u = 0; u < detail.estimates.rows(); ++u) {
                est << detail.repetition_index[u];
                for (int k = 0; k < detail.estimates.cols(); ++k) {
                    std::snprintf(buf, sizeof(buf), "%.17g", detail.estimates(u, k));
                    est << "," << buf;
                }
                for (int k = 0; k < detail.std_errors.cols(); ++k) {
                    std::snprintf(buf, sizeof(buf), "%.17g", detail.std_errors(u, k));
                    est << "," << buf;
                }
                est << "\n";
            }

            std::printf("  done: %d/%d usable, total %.1fs\n", detail.report.replications_used,
                        sc.replications, detail.report.total_seconds);
        } catch (const std::exception& e) {
            all_ok = false;
            std::fprintf(stderr, "scenario %s failed: %s\n", sc.name.c_str(), e.what());
            summary << "scenario: " << sc.name << "\n  FAILED: " << e.what() << "\n\n";
        }
    }
    std::printf("wrote %s/metrics.csv and summary.txt\n", args.out_dir.c_str());
    return all_ok ? kExitOk : kExitConvergence;
}

int classify_exception(const std::exception& e) {
    if (dynamic_cast<const gelc::ParseError*>(&e)) return kExitParse;
    if (dynamic_cast<const gelc::RankError*>(&e)) return kExitRank;
    if (dynamic_cast<const gelc::IoError*>(&e)) return kExitIo;
    if (dynamic_cast<const gelc::QuadratureError*>(&e)) return kExitConvergence;
    if (dynamic_cast<const gelc::DegenerateLikelihoodError*>(&e)) return kExitConvergence;
    if (dynamic_cast<const gelc::DomainError*>(&e)) return kExitParse;
    if (dynamic_cast<const gelc::DimensionError*>(&e)) return kExitParse;
    return kExitConvergence;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GLM fitting with an interval-censored covariate"};
    app.require_subcommand(1);

    FitArgs fit_args;
    CLI::App* cmd_fit = app.add_subcommand("fit", "fit a model from a data file");
    cmd_fit->add_option("--data", fit_args.data_path, "delimited data file")->required();
    cmd_fit->add_option("--family", fit_args.family, "gamma, binomial, or gaussian")->required();
    cmd_fit->add_option("--eps-p", fit_args.eps_p, "parameter-change convergence threshold");
    cmd_fit->add_option("--eps-l", fit_args.eps_l, "loglikelihood-change threshold");
    cmd_fit->add_option("--quad-tol", fit_args.quad_tol, "quadrature tolerance");
    cmd_fit->add_option("--max-outer", fit_args.max_outer, "outer iteration cap");
    cmd_fit->add_flag("--json", fit_args.as_json, "machine-readable JSON output");
    double fit_fix_gamma = 0.0;
    CLI::Option* fit_fix =
        cmd_fit->add_option("--fix-gamma", fit_fix_gamma, "hold gamma fixed at this value");

    NpmleArgs np_args;
    CLI::App* cmd_npmle =
        app.add_subcommand("npmle", "nonparametric mass estimates for the intervals");
    cmd_npmle->add_option("--data", np_args.data_path, "delimited data file")->required();
    cmd_npmle->add_option("--mode", np_args.mode, "classic or augmented");
    cmd_npmle->add_option("--family", np_args.family, "outcome family (augmented mode)");
    cmd_npmle->add_option("--eps-p", np_args.eps_p, "self-consistency threshold");
    cmd_npmle->add_flag("--json", np_args.as_json, "machine-readable JSON output");
    double np_fix_gamma = 0.0;
    CLI::Option* np_fix =
        cmd_npmle->add_option("--fix-gamma", np_fix_gamma, "hold gamma fixed (augmented mode)");

    SimArgs sim_args;
    CLI::App* cmd_sim = app.add_subcommand("simulate", "run a simulation study");
    cmd_sim->add_option("--scenarios", sim_args.scenario_path, "scenario JSON file")->required();
    cmd_sim->add_option("--out", sim_args.out_dir, "output directory");
    cmd_sim->add_option("--reps", sim_args.reps_override, "override replication count");
    cmd_sim->add_option("--jobs", sim_args.jobs, "worker threads (default $GELC_JOBS or 1)");
    cmd_sim->add_option("--quad-tol", sim_args.quad_tol, "quadrature tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cmd_fit->parsed()) {
            if (fit_fix->count() > 0) fit_args.fix_gamma = fit_fix_gamma;
            return run_fit(fit_args);
        }
        if (cmd_npmle->parsed()) {
            if (np_fix->count() > 0) np_args.fix_gamma = np_fix_gamma;
            return run_npmle(np_args);
        }
        if (cmd_sim->parsed()) return run_simulate(sim_args);
    } catch (const CLI::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return classify_exception(e);
    }
    return kExitUsage;
}
