// lbfgs.hpp
//
// Compact limited-memory BFGS with a strong-Wolfe line search (two-loop
// recursion, cubic-interpolation zoom). Minimizes a smooth objective given a
// callable computing value and gradient. Used for the theta-stage of the
// alternating estimator; kept generic so tests can drive it on standard
// benchmark functions.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <vector>

namespace gelc {

struct LbfgsOptions {
    int history = 8;
    int max_iterations = 500;
    double gradient_tolerance = 1e-7;       // on ||g||_inf
    double f_change_tolerance = 1e-14;      // relative objective stall
    int max_line_search = 60;
    double c1 = 1e-4;                       // sufficient decrease
    double c2 = 0.9;                        // curvature
};

struct LbfgsReport {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd gradient;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;        // gradient tolerance met
    bool stalled = false;          // objective stopped improving first
    bool line_search_failed = false;
};

// Objective: double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad)
template <class Objective>
LbfgsReport lbfgs_minimize(Objective&& fg, Eigen::VectorXd x0, const LbfgsOptions& opt = {}) {
    using Vec = Eigen::VectorXd;
    const int dim = static_cast<int>(x0.size());
    LbfgsReport rep;

    Vec x = std::move(x0);
    Vec g(dim), g_new(dim);
    int evals = 0;
    auto eval = [&](const Vec& pt, Vec& grad) {
        ++evals;
        double v = fg(pt, grad);
        if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
        return v;
    };
    double f = eval(x, g);

    std::vector<Vec> s_hist, y_hist;
    std::vector<double> rho_hist;

    Vec d(dim), x_new(dim);
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        rep.iterations = iter;
        if (g.cwiseAbs().maxCoeff() <= opt.gradient_tolerance) {
            rep.converged = true;
            break;
        }

        // Two-loop recursion for d = -H g.
        d = -g;
        const int h = static_cast<int>(s_hist.size());
        std::vector<double> alpha_coef(h);
        for (int k = h - 1; k >= 0; --k) {
            alpha_coef[k] = rho_hist[k] * s_hist[k].dot(d);
            d -= alpha_coef[k] * y_hist[k];
        }
        if (h > 0) {
            const double yy = y_hist.back().squaredNorm();
            if (yy > 0.0) d *= y_hist.back().dot(s_hist.back()) / yy;
        }
        for (int k = 0; k < h; ++k) {
            const double beta = rho_hist[k] * y_hist[k].dot(d);
            d += (alpha_coef[k] - beta) * s_hist[k];
        }

        double dg = d.dot(g);
        if (!(dg < 0.0)) {  // not a descent direction; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            d = -g;
            dg = d.dot(g);
        }

        // Strong-Wolfe line search (bracket then zoom).
        const double phi0 = f;
        const double dphi0 = dg;
        double alpha = (iter == 0) ? std::min(1.0, 1.0 / std::max(1.0, g.norm())) : 1.0;
        double alpha_prev = 0.0, phi_prev = phi0, dphi_prev = dphi0;
        double alpha_lo = 0.0, alpha_hi = 0.0;
        double phi_lo = phi0, dphi_lo = dphi0, phi_hi = 0.0, dphi_hi = 0.0;
        bool bracketed = false, accepted = false;
        double phi = phi0, dphi = dphi0;

        for (int ls = 0; ls < opt.max_line_search; ++ls) {
            x_new = x + alpha * d;
            phi = eval(x_new, g_new);
            dphi = std::isfinite(phi) ? g_new.dot(d) : std::numeric_limits<double>::infinity();
            if (phi > phi0 + opt.c1 * alpha * dphi0 || (ls > 0 && phi >= phi_prev) ||
                !std::isfinite(phi)) {
                alpha_lo = alpha_prev; phi_lo = phi_prev; dphi_lo = dphi_prev;
                alpha_hi = alpha; phi_hi = phi; dphi_hi = dphi;
                bracketed = true;
                break;
            }
            if (std::fabs(dphi) <= -opt.c2 * dphi0) {
                accepted = true;
                break;
            }
            if (dphi >= 0.0) {
                alpha_lo = alpha; phi_lo = phi; dphi_lo = dphi;
                alpha_hi = alpha_prev; phi_hi = phi_prev; dphi_hi = dphi_prev;
                bracketed = true;
                break;
            }
            alpha_prev = alpha; phi_prev = phi; dphi_prev = dphi;
            alpha *= 2.5;
        }

        if (bracketed && !accepted) {
            for (int z = 0; z < 30 && !accepted; ++z) {
                // Cubic interpolation between lo and hi, safeguarded by bisection.
                double a_lo = alpha_lo, a_hi = alpha_hi;
                double trial;
                const double span = a_hi - a_lo;
                if (std::isfinite(phi_hi) && std::isfinite(dphi_hi)) {
                    const double d1 = dphi_lo + dphi_hi - 3.0 * (phi_lo - phi_hi) / (a_lo - a_hi);
                    const double disc = d1 * d1 - dphi_lo * dphi_hi;
                    if (disc >= 0.0) {
                        const double d2 = std::copysign(std::sqrt(disc), span);
                        trial = a_hi - (a_hi - a_lo) * (dphi_hi + d2 - d1) /
                                           (dphi_hi - dphi_lo + 2.0 * d2);
                    } else {
                        trial = a_lo + 0.5 * span;
                    }
                } else {
                    trial = a_lo + 0.5 * span;
                }
                const double lo_b = std::min(a_lo, a_hi), hi_b = std::max(a_lo, a_hi);
                if (!(trial > lo_b + 0.1 * (hi_b - lo_b) && trial < hi_b - 0.1 * (hi_b - lo_b)))
                    trial = 0.5 * (a_lo + a_hi);

                x_new = x + trial * d;
                phi = eval(x_new, g_new);
                dphi = std::isfinite(phi) ? g_new.dot(d)
                                          : std::numeric_limits<double>::infinity();
                if (phi > phi0 + opt.c1 * trial * dphi0 || phi >= phi_lo || !std::isfinite(phi)) {
                    alpha_hi = trial; phi_hi = phi; dphi_hi = dphi;
                } else {
                    if (std::fabs(dphi) <= -opt.c2 * dphi0) {
                        alpha = trial;
                        accepted = true;
                        break;
                    }
                    if (dphi * (alpha_hi - alpha_lo) >= 0.0) {
                        alpha_hi = alpha_lo; phi_hi = phi_lo; dphi_hi = dphi_lo;
                    }
                    alpha_lo = trial; phi_lo = phi; dphi_lo = dphi;
                }
                alpha = trial;
                if (std::fabs(alpha_hi - alpha_lo) <
                    1e-14 * std::max(1.0, std::fabs(alpha_lo)))
                    break;
            }
            // Fall back to the best Armijo point found inside the bracket.
            if (!accepted && std::isfinite(phi_lo) && phi_lo < phi0 && alpha_lo > 0.0) {
                alpha = alpha_lo;
                x_new = x + alpha * d;
                phi = eval(x_new, g_new);
                accepted = true;
            }
        }

        if (!accepted) {
            rep.line_search_failed = true;
            break;
        }

        const double f_old = f;
        Vec s = x_new - x;
        Vec yv = g_new - g;
        x.swap(x_new);
        g.swap(g_new);
        f = phi;

        const double sy = s.dot(yv);
        if (sy > 1e-10 * s.norm() * yv.norm()) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.history) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }

        if (std::fabs(f_old - f) <=
            opt.f_change_tolerance * std::max({1.0, std::fabs(f_old), std::fabs(f)})) {
            rep.stalled = true;
            break;
        }
    }

    if (g.cwiseAbs().maxCoeff() <= opt.gradient_tolerance) rep.converged = true;
    rep.x = std::move(x);
    rep.f = f;
    rep.gradient = std::move(g);
    rep.evaluations = evals;
    return rep;
}

}  // namespace gelc
