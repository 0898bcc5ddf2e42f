#include "gelc/model.hpp"

#include <atomic>
#include <cmath>

namespace gelc {

namespace {

std::atomic<long> g_eta_clamp_count{0};

double clamp_eta(double eta) { return detail::clamp_eta_counted(eta); }

// log(1 + e^t) without overflow.
double softplus(double t) {
    if (t > 0.0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

}  // namespace

namespace diagnostics {
long eta_clamp_count() { return g_eta_clamp_count.load(std::memory_order_relaxed); }
void reset_eta_clamp_count() { g_eta_clamp_count.store(0, std::memory_order_relaxed); }
}  // namespace diagnostics

namespace detail {
double clamp_eta_counted(double eta) {
    if (eta > 700.0) {
        g_eta_clamp_count.fetch_add(1, std::memory_order_relaxed);
        return 700.0;
    }
    if (eta < -700.0) {
        g_eta_clamp_count.fetch_add(1, std::memory_order_relaxed);
        return -700.0;
    }
    return eta;
}
}  // namespace detail

const char* family_name(Family f) {
    switch (f) {
        case Family::gamma_log: return "gamma";
        case Family::bernoulli_logit: return "binomial";
        case Family::gaussian_identity: return "gaussian";
    }
    return "?";
}

Family family_from_name(std::string_view name) {
    if (name == "gamma") return Family::gamma_log;
    if (name == "binomial" || name == "bernoulli" || name == "logistic")
        return Family::bernoulli_logit;
    if (name == "gaussian" || name == "normal") return Family::gaussian_identity;
    throw DomainError("unknown family '" + std::string(name) +
                      "'; expected gamma, binomial, or gaussian");
}

ObservedInterval make_interval(double left, double right) {
    ObservedInterval iv;
    iv.left = left;
    iv.right = right;
    iv.left_closed = true;
    iv.right_closed = (left == right);
    validate_interval(iv);
    return iv;
}

void validate_interval(const ObservedInterval& iv) {
    if (!std::isfinite(iv.left) || !std::isfinite(iv.right))
        throw DomainError("interval endpoints must be finite");
    if (iv.left > iv.right) throw DomainError("interval has left > right");
    if (iv.left == iv.right && !(iv.left_closed && iv.right_closed))
        throw DomainError("degenerate interval must be closed on both sides");
}

Eigen::VectorXd pack_parameters(Family f, const ParameterVector& theta) {
    const int p = theta.p();
    Eigen::VectorXd v(free_parameter_count(f, p));
    v[0] = theta.alpha;
    v.segment(1, p) = theta.beta;
    v[p + 1] = theta.gamma;
    if (has_dispersion(f)) v[p + 2] = theta.phi;
    return v;
}

ParameterVector unpack_parameters(Family f, const Eigen::VectorXd& v, int p) {
    if (v.size() != free_parameter_count(f, p))
        throw DimensionError("parameter vector has wrong length");
    ParameterVector theta;
    theta.alpha = v[0];
    theta.beta = v.segment(1, p);
    theta.gamma = v[p + 1];
    theta.phi = has_dispersion(f) ? v[p + 2] : 1.0;
    return theta;
}

double linear_predictor(const ParameterVector& theta, const Eigen::VectorXd& x, double z) {
    if (x.size() != theta.beta.size())
        throw DimensionError("covariate vector length does not match beta");
    return theta.alpha + theta.beta.dot(x) + theta.gamma * z;
}

double family_mean(Family f, double eta) {
    switch (f) {
        case Family::gamma_log: return std::exp(clamp_eta(eta));
        case Family::bernoulli_logit: {
            const double t = clamp_eta(eta);
            return 1.0 / (1.0 + std::exp(-t));
        }
        case Family::gaussian_identity: return eta;
    }
    return eta;
}

double mean_derivative(Family f, double eta) {
    switch (f) {
        case Family::gamma_log: return std::exp(clamp_eta(eta));
        case Family::bernoulli_logit: {
            const double p = family_mean(f, eta);
            return p * (1.0 - p);
        }
        case Family::gaussian_identity: return 1.0;
    }
    return 1.0;
}

double variance_function(Family f, double mu) {
    switch (f) {
        case Family::gamma_log: return mu * mu;
        case Family::bernoulli_logit: return mu * (1.0 - mu);
        case Family::gaussian_identity: return 1.0;
    }
    return 1.0;
}

bool y_in_support(Family f, double y) {
    if (!std::isfinite(y)) return false;
    switch (f) {
        case Family::gamma_log: return y > 0.0;
        case Family::bernoulli_logit: return y == 0.0 || y == 1.0;
        case Family::gaussian_identity: return true;
    }
    return false;
}

double log_density(Family f, double y, double eta, double phi) {
    if (!y_in_support(f, y)) throw DomainError("response outside family support");
    switch (f) {
        case Family::gamma_log: {
            if (phi <= 0.0) throw DomainError("phi must be positive");
            // Gamma with mean mu = e^eta and variance phi mu^2, i.e. shape
            // 1/phi and scale phi mu.
            const double mu = std::exp(clamp_eta(eta));
            const double k = 1.0 / phi;
            return (k - 1.0) * std::log(y) - y / (phi * mu) - k * std::log(phi * mu) -
                   std::lgamma(k);
        }
        case Family::bernoulli_logit: {
            const double t = clamp_eta(eta);
            return (y == 1.0) ? -softplus(-t) : -softplus(t);
        }
        case Family::gaussian_identity: {
            if (phi <= 0.0) throw DomainError("phi must be positive");
            const double r = y - eta;
            return -0.5 * std::log(2.0 * M_PI * phi) - r * r / (2.0 * phi);
        }
    }
    throw DomainError("unhandled family");
}

Eigen::VectorXd score_point(Family f, double y, const Eigen::VectorXd& x, double z,
                            const ParameterVector& theta) {
    const int p = theta.p();
    const double eta = linear_predictor(theta, x, z);
    const double mu = family_mean(f, eta);
    const double phi = has_dispersion(f) ? theta.phi : 1.0;
    if (!y_in_support(f, y)) throw DomainError("response outside family support");
    if (phi <= 0.0) throw DomainError("phi must be positive");

    // (y - mu)/(phi V(mu)) * dmu/deta, simplified per family.
    double s_eta = 0.0;
    switch (f) {
        case Family::gamma_log: s_eta = (y - mu) / (phi * mu); break;
        case Family::bernoulli_logit: s_eta = y - mu; break;
        case Family::gaussian_identity: s_eta = (y - mu) / phi; break;
    }

    Eigen::VectorXd s(free_parameter_count(f, p));
    s[0] = s_eta;
    for (int j = 0; j < p; ++j) s[1 + j] = s_eta * x[j];
    s[p + 1] = s_eta * z;
    if (has_dispersion(f)) {
        double s_phi = 0.0;
        if (f == Family::gamma_log) {
            s_phi = (y / mu + std::log(phi * mu) - std::log(y) - 1.0 + digamma(1.0 / phi)) /
                    (phi * phi);
        } else {  // gaussian
            const double r = y - mu;
            s_phi = -0.5 / phi + r * r / (2.0 * phi * phi);
        }
        s[p + 2] = s_phi;
    }
    return s;
}

void validate_dataset(Family f, const Dataset& data) {
    if (data.empty()) throw DomainError("dataset is empty");
    const auto p = data.front().x.size();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Observation& o = data[i];
        if (!y_in_support(f, o.y))
            throw DomainError("observation " + std::to_string(i + 1) +
                              ": response outside support of family " + family_name(f));
        if (o.x.size() != p)
            throw DimensionError("observation " + std::to_string(i + 1) +
                                 ": inconsistent covariate length");
        if (!o.x.allFinite())
            throw DomainError("observation " + std::to_string(i + 1) + ": non-finite covariate");
        validate_interval(o.interval);
    }
}

// Recurrence up to x >= 10, then the asymptotic series in 1/x^2.
double digamma(double x) {
    if (!(x > 0.0)) throw DomainError("digamma requires a positive argument");
    double result = 0.0;
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli-number tail: 1/12, -1/120, 1/252, -1/240, 1/132, -691/32760.
    double series = inv2 * (1.0 / 12.0 +
                    inv2 * (-1.0 / 120.0 +
                    inv2 * (1.0 / 252.0 +
                    inv2 * (-1.0 / 240.0 +
                    inv2 * (1.0 / 132.0 +
                    inv2 * (-691.0 / 32760.0))))));
    return result + std::log(x) - 0.5 * inv - series;
}

}  // namespace gelc
