#include "gelc/quadrature.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace gelc {

namespace {

// 15-point Kronrod extension of 7-point Gauss on [-1, 1] (positive abscissae;
// the rule is symmetric). XGK[1], XGK[3], XGK[5], XGK[7] carry the embedded
// Gauss rule with weights WG.
constexpr double XGK[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double WGK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double WG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// One GK15 application on [a, b]. Returns the Kronrod value per component and
// a shared error estimate (max over components of |Kronrod - Gauss|).
template <int N, class F>
void gk15_apply(const F& f, double a, double b, std::array<double, N>& value, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    std::array<double, N> fk{}, fg{}, tmp1{}, tmp2{};
    f(c, tmp1);
    for (int q = 0; q < N; ++q) {
        fk[q] = WGK[7] * tmp1[q];
        fg[q] = WG[3] * tmp1[q];
    }
    for (int j = 0; j < 7; ++j) {
        const double dx = h * XGK[j];
        f(c - dx, tmp1);
        f(c + dx, tmp2);
        for (int q = 0; q < N; ++q) {
            const double s = tmp1[q] + tmp2[q];
            fk[q] += WGK[j] * s;
            if (j % 2 == 1) fg[q] += WG[j / 2] * s;
        }
    }
    err = 0.0;
    for (int q = 0; q < N; ++q) {
        value[q] = fk[q] * h;
        err = std::max(err, std::fabs((fk[q] - fg[q]) * h));
    }
}

// Composite Simpson with panel doubling; the Richardson-style difference of
// successive refinements is the error estimate. Fallback path only.
template <int N, class F>
bool simpson_doubling(const F& f, double a, double b, double tol_abs,
                      std::array<double, N>& value, double& err) {
    std::array<double, N> fa{}, fb{}, prev{};
    f(a, fa);
    f(b, fb);
    std::array<double, N> odd_sum{}, even_sum{};
    int panels = 2;
    // First pass: panels = 2 (one midpoint).
    std::array<double, N> mid{};
    f(0.5 * (a + b), mid);
    for (int q = 0; q < N; ++q) odd_sum[q] = mid[q];
    auto compose = [&](int np) {
        const double h = (b - a) / np;
        for (int q = 0; q < N; ++q)
            value[q] = h / 3.0 * (fa[q] + fb[q] + 4.0 * odd_sum[q] + 2.0 * even_sum[q]);
    };
    compose(panels);
    prev = value;
    for (int iter = 0; iter < 22; ++iter) {
        // Refine: old odd points become even; sample new odd points.
        for (int q = 0; q < N; ++q) even_sum[q] += odd_sum[q];
        panels *= 2;
        const double h = (b - a) / panels;
        std::array<double, N> acc{}, tmp{};
        for (int k = 1; k < panels; k += 2) {
            f(a + k * h, tmp);
            for (int q = 0; q < N; ++q) acc[q] += tmp[q];
        }
        odd_sum = acc;
        compose(panels);
        err = 0.0;
        for (int q = 0; q < N; ++q) err = std::max(err, std::fabs(value[q] - prev[q]) / 15.0);
        if (err <= tol_abs) return true;
        prev = value;
    }
    return false;
}

// Adaptive bisection driver. Accepts a segment when its GK15 error fits the
// length-proportional share of the absolute budget, or when the error sits at
// the kernel's rounding-noise floor (noise_rel times the segment magnitude).
// Both the error and the budget scale linearly with segment length once the
// noise floor binds, so bisecting further can never help there.
template <int N, class F>
bool adaptive_gk(const F& f, double a, double b, double tol_abs, double noise_rel,
                 std::array<double, N>& total, double& err_total) {
    struct Seg {
        double a, b;
        int depth;
    };
    constexpr long kMaxSegments = 200000;
    const double full_len = b - a;
    std::vector<Seg> stack{{a, b, 0}};
    total.fill(0.0);
    err_total = 0.0;
    bool ok = true;
    std::array<double, N> val{};
    double err;
    long segments = 0;
    while (!stack.empty()) {
        const Seg s = stack.back();
        stack.pop_back();
        gk15_apply<N>(f, s.a, s.b, val, err);
        ++segments;
        double seg_mag = 0.0;
        for (int q = 0; q < N; ++q) seg_mag = std::max(seg_mag, std::fabs(val[q]));
        const double budget = tol_abs * (s.b - s.a) / full_len;
        const bool at_noise_floor = err <= noise_rel * seg_mag;
        if (err <= budget || at_noise_floor || s.depth >= 40 || segments >= kMaxSegments) {
            if (err > budget && !at_noise_floor) ok = false;
            for (int q = 0; q < N; ++q) total[q] += val[q];
            err_total += err;
            continue;
        }
        const double mid = 0.5 * (s.a + s.b);
        stack.push_back({mid, s.b, s.depth + 1});
        stack.push_back({s.a, mid, s.depth + 1});
    }
    return ok;
}

// Integrate an N-component kernel over [a, b] with error <= tol*(1+|result|),
// falling back to composite Simpson when the adaptive rule cannot settle.
// noise_rel bounds the relative rounding noise of one kernel evaluation; the
// caller derives it from the magnitude of the log-domain shift.
template <int N, class F>
void integrate_kernel(const F& f, double a, double b, double tol, double noise_rel,
                      std::array<double, N>& value, double& err, const char* what) {
    std::array<double, N> probe{};
    double probe_err;
    gk15_apply<N>(f, a, b, probe, probe_err);
    double scale = 1.0;
    for (int q = 0; q < N; ++q) scale = std::max(scale, std::fabs(probe[q]));
    double tol_abs = tol * (1.0 + scale);

    for (int attempt = 0; attempt < 2; ++attempt) {
        if (adaptive_gk<N>(f, a, b, tol_abs, noise_rel, value, err)) {
            // Re-check the budget against the final magnitude.
            double mag = 1.0;
            for (int q = 0; q < N; ++q) mag = std::max(mag, std::fabs(value[q]));
            const double target = tol * (1.0 + mag);
            if (err <= target) return;
            tol_abs = target;
            continue;
        }
        break;
    }
    // The per-segment budget is a local device; the contract is the total
    // error against the final magnitude, so a near-miss is still usable.
    double mag = 1.0;
    for (int q = 0; q < N; ++q) mag = std::max(mag, std::fabs(value[q]));
    if (err <= tol * (1.0 + mag)) return;
    if (simpson_doubling<N>(f, a, b, tol_abs, value, err)) return;
    throw QuadratureError(std::string(what) + ": quadrature failed to reach tolerance", err);
}

// Relative rounding noise of one shifted kernel evaluation. The log density
// is assembled from terms comparable to the shift before exponentiation, so
// exp(logf - shift) carries about eps * |shift| of relative jitter.
double kernel_noise_rel(double log_shift) {
    return 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::fabs(log_shift));
}

// Per-observation density kernel with the theta- and y-dependent constants
// hoisted out of the innermost loop. eta(u) = base_eta + gamma*u.
struct ObsKernel {
    Family fam;
    double y = 0.0;
    double phi = 1.0;
    double base_eta = 0.0;
    double gamma = 0.0;
    double shift = 0.0;  // log-domain offset: kernels evaluate exp(logf - shift)

    // Gamma-family constants
    double k = 0.0, log_phi = 0.0, log_y = 0.0, lgamma_k = 0.0, y_over_phi = 0.0, psi_k = 0.0,
           km1_log_y = 0.0;

    ObsKernel(Family family, double y_, const Eigen::VectorXd& x, const ParameterVector& theta)
        : fam(family), y(y_), phi(has_dispersion(family) ? theta.phi : 1.0) {
        if (!y_in_support(family, y)) throw DomainError("response outside family support");
        if (phi <= 0.0) throw DomainError("phi must be positive");
        base_eta = theta.alpha + theta.beta.dot(x);
        gamma = theta.gamma;
        if (fam == Family::gamma_log) {
            k = 1.0 / phi;
            log_phi = std::log(phi);
            log_y = std::log(y);
            lgamma_k = std::lgamma(k);
            y_over_phi = y / phi;
            psi_k = digamma(k);
            km1_log_y = (k - 1.0) * log_y;
        }
    }

    static double clamp_count(double eta) {
        if (eta > 700.0 || eta < -700.0) return detail::clamp_eta_counted(eta);
        return eta;
    }

    double log_density_at(double u) const {
        const double eta = base_eta + gamma * u;
        switch (fam) {
            case Family::gamma_log: {
                const double e = clamp_count(eta);
                return km1_log_y - y_over_phi * std::exp(-e) - k * (log_phi + e) - lgamma_k;
            }
            case Family::bernoulli_logit: {
                const double e = clamp_count(eta);
                // log f = y*e - log(1 + exp(e)), stably.
                const double sp = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
                return y * e - sp;
            }
            case Family::gaussian_identity: {
                const double r = y - eta;
                return -0.5 * std::log(2.0 * M_PI * phi) - r * r / (2.0 * phi);
            }
        }
        return 0.0;
    }

    // Density (shifted) only.
    void density(double u, std::array<double, 1>& out) const {
        out[0] = std::exp(log_density_at(u) - shift);
    }

    // (f, s_eta f, s_eta u f, s_phi f), all shifted.
    void score_weighted(double u, std::array<double, 4>& out) const {
        const double lf = log_density_at(u) - shift;
        if (lf < -745.0) {
            out.fill(0.0);
            return;
        }
        const double f = std::exp(lf);
        const double eta = base_eta + gamma * u;
        double s_eta = 0.0, s_phi = 0.0;
        switch (fam) {
            case Family::gamma_log: {
                const double e = clamp_count(eta);
                const double ym = y_over_phi * std::exp(-e);  // y/(phi mu)
                s_eta = ym - k;
                s_phi = (phi * ym + log_phi + e - log_y - 1.0 + psi_k) * k * k;
                break;
            }
            case Family::bernoulli_logit: {
                const double e = clamp_count(eta);
                s_eta = y - 1.0 / (1.0 + std::exp(-e));
                break;
            }
            case Family::gaussian_identity: {
                const double r = y - eta;
                s_eta = r / phi;
                s_phi = -0.5 / phi + r * r / (2.0 * phi * phi);
                break;
            }
        }
        out[0] = f;
        out[1] = s_eta * f;
        out[2] = s_eta * u * f;
        out[3] = s_phi * f;
    }
};

}  // namespace

double detail::integrate_density_shifted(Family family, double y, const Eigen::VectorXd& x,
                                         const ParameterVector& theta,
                                         const ObservedInterval& cell, double tol,
                                         double log_shift, double* error_out) {
    ObsKernel kernel(family, y, x, theta);
    kernel.shift = log_shift;
    if (cell.is_point()) {
        if (error_out) *error_out = 0.0;
        return std::exp(kernel.log_density_at(cell.left) - log_shift);
    }
    std::array<double, 1> value{};
    double err;
    auto f = [&kernel](double u, std::array<double, 1>& out) { kernel.density(u, out); };
    const double noise_rel = kernel_noise_rel(log_shift);
    integrate_kernel<1>(f, cell.left, cell.right, tol, noise_rel, value, err,
                        "integrate_density");
    if (error_out) *error_out = err;
    return value[0];
}

detail::ScoreCellIntegrals detail::score_cell_integrals(Family family, double y,
                                                        const Eigen::VectorXd& x,
                                                        const ParameterVector& theta,
                                                        const ObservedInterval& cell, double tol,
                                                        double log_shift) {
    ObsKernel kernel(family, y, x, theta);
    kernel.shift = log_shift;
    ScoreCellIntegrals out;
    if (cell.is_point()) {
        std::array<double, 4> v{};
        kernel.score_weighted(cell.left, v);
        out.fbar = v[0];
        out.s1 = v[1];
        out.su = v[2];
        out.sphi = v[3];
        return out;
    }
    std::array<double, 4> value{};
    double err;
    auto f = [&kernel](double u, std::array<double, 4>& o) { kernel.score_weighted(u, o); };
    const double noise_rel = kernel_noise_rel(log_shift);
    integrate_kernel<4>(f, cell.left, cell.right, tol, noise_rel, value, err,
                        "integrate_score_weighted");
    out.fbar = value[0];
    out.s1 = value[1];
    out.su = value[2];
    out.sphi = value[3];
    return out;
}

IntegralEstimate integrate_density_est(Family family, double y, const Eigen::VectorXd& x,
                                       const ParameterVector& theta, const ObservedInterval& cell,
                                       double tol) {
    IntegralEstimate est;
    est.value = detail::integrate_density_shifted(family, y, x, theta, cell, tol, 0.0, &est.error);
    return est;
}

double integrate_density(Family family, double y, const Eigen::VectorXd& x,
                         const ParameterVector& theta, const ObservedInterval& cell, double tol) {
    if (tol <= 0.0) throw DomainError("quadrature tolerance must be positive");
    return detail::integrate_density_shifted(family, y, x, theta, cell, tol, 0.0, nullptr);
}

std::pair<Eigen::VectorXd, double> integrate_score_weighted(Family family, double y,
                                                            const Eigen::VectorXd& x,
                                                            const ParameterVector& theta,
                                                            const ObservedInterval& cell,
                                                            double tol) {
    if (tol <= 0.0) throw DomainError("quadrature tolerance must be positive");
    const auto cellint = detail::score_cell_integrals(family, y, x, theta, cell, tol, 0.0);
    const int p = theta.p();
    Eigen::VectorXd s(free_parameter_count(family, p));
    s[0] = cellint.s1;
    for (int j = 0; j < p; ++j) s[1 + j] = cellint.s1 * x[j];
    s[p + 1] = cellint.su;
    if (has_dispersion(family)) s[p + 2] = cellint.sphi;
    return {s, cellint.fbar};
}

CellDensityMatrix cell_density_matrix(const Dataset& data, const Partition& part, Family family,
                                      const ParameterVector& theta, double tol) {
    const int n = part.n();
    const int m = part.m();
    if (static_cast<int>(data.size()) != n)
        throw DimensionError("cell_density_matrix: dataset size does not match partition");
    CellDensityMatrix cm;
    cm.values = Eigen::MatrixXd::Zero(n, m);
    cm.row_log_shift = Eigen::VectorXd::Zero(n);

    for (int i = 0; i < n; ++i) {
        const Observation& o = data[i];
        ObsKernel kernel(family, o.y, o.x, theta);
        // Probe the row's covered cells; if even the best log-density is below
        // the linear-domain floor, shift the whole row.
        double max_log = -std::numeric_limits<double>::infinity();
        for (int j : part.row_cells[i]) {
            const ObservedInterval& cell = part.cells[j];
            max_log = std::max(max_log, kernel.log_density_at(cell.left));
            if (!cell.is_point()) {
                max_log = std::max(max_log,
                                   kernel.log_density_at(0.5 * (cell.left + cell.right)));
                max_log = std::max(max_log, kernel.log_density_at(cell.right));
            }
        }
        const double shift =
            (std::isfinite(max_log) && (max_log < -700.0 || max_log > 700.0)) ? max_log : 0.0;
        cm.row_log_shift[i] = shift;
        for (int j : part.row_cells[i]) {
            const ObservedInterval& cell = part.cells[j];
            const double raw =
                detail::integrate_density_shifted(family, o.y, o.x, theta, cell, tol, shift,
                                                  nullptr);
            cm.values(i, j) = cell.is_point() ? raw : raw / part.lengths[j];
        }
    }
    return cm;
}

}  // namespace gelc
