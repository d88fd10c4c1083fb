#include "gntk/hermite.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace gntk::hermite {

namespace {

using boost::math::constants::pi;
using boost::math::constants::root_two_pi;

const std::vector<double>& sqrt_table() {
    static const std::vector<double> t = [] {
        std::vector<double> v(kMaxDegree + 2);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sqrt(static_cast<double>(i));
        return v;
    }();
    return t;
}

inline double phi(double u) { return std::exp(-0.5 * u * u) / root_two_pi<double>(); }

inline double sech2(double t) {
    double c = std::cosh(t);
    return std::isinf(c) ? 0.0 : 1.0 / (c * c);
}

inline double integrand_base(CoeffKind kind, double y, double u) {
    return kind == CoeffKind::activation_tanh ? std::tanh(y * u) : sech2(y * u);
}

// Composite 20-point Gauss-Legendre over [-U, U]; returns coeffs 0..L and E[f^2].
HermiteCoeffs panel_coefficients(CoeffKind kind, double y, int L, double h) {
    using GL = boost::math::quadrature::gauss<double, 20>;
    const auto& xs = GL::abscissa();
    const auto& ws = GL::weights();
    const double U = 9.0 + 2.0 * std::sqrt(L + 1.0);
    const int panels = static_cast<int>(std::ceil(2.0 * U / h));
    const double width = 2.0 * U / panels;
    HermiteCoeffs out;
    out.kind = kind;
    out.scale = y;
    out.coeffs = Vec::Zero(L + 1);
    std::vector<double> p(L + 1);
    double energy = 0.0;
    auto accumulate = [&](double u, double w) {
        double f = integrand_base(kind, y, u);
        double wf = w * phi(u);
        energy += wf * f * f;
        hermite_all(L, u, p.data());
        double scaled = wf * f;
        for (int l = 0; l <= L; ++l) out.coeffs(l) += scaled * p[l];
    };
    for (int j = 0; j < panels; ++j) {
        double mid = -U + (j + 0.5) * width;
        double half = 0.5 * width;
        for (std::size_t q = 0; q < xs.size(); ++q) {
            accumulate(mid - half * xs[q], half * ws[q]);
            accumulate(mid + half * xs[q], half * ws[q]);
        }
    }
    out.energy = energy;
    return out;
}

double panel_width(double y, int L) {
    double h = 0.5;
    if (y > 1.0) h = std::min(h, 0.5 / y);
    return std::min(h, 2.0 / std::sqrt(L + 1.0));
}

}  // namespace

double hermite_eval(int l, double u) {
    if (l < 0 || l > kMaxDegree) throw PreconditionError("hermite_eval: degree out of range");
    std::vector<double> p(l + 1);
    hermite_all(l, u, p.data());
    return p[l];
}

void hermite_all(int L, double u, double* out) {
    if (L < 0 || L > kMaxDegree) throw PreconditionError("hermite_all: degree out of range");
    const auto& sq = sqrt_table();
    out[0] = 1.0;
    if (L == 0) return;
    out[1] = u;
    for (int l = 1; l < L; ++l) out[l + 1] = (u * out[l] - sq[l] * out[l - 1]) / sq[l + 1];
}

const GaussRule& gauss_hermite_rule(int Nq) {
    if (Nq < 2 || Nq > 4 * kMaxNodes) throw PreconditionError("gauss_hermite_rule: node count out of range");
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(Nq);
    if (it != cache.end()) return it->second;
    // Golub-Welsch on the Jacobi matrix of the orthonormal He recurrence.
    Vec diag = Vec::Zero(Nq);
    Vec sub(Nq - 1);
    for (int k = 1; k < Nq; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Mat> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    GaussRule rule;
    rule.nodes = es.eigenvalues();
    rule.weights = es.eigenvectors().row(0).transpose().array().square();
    rule.weights /= rule.weights.sum();
    return cache.emplace(Nq, std::move(rule)).first->second;
}

double gauss_hermite_expectation(const std::function<double(double)>& f, int Nq) {
    const GaussRule& r = gauss_hermite_rule(Nq);
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.nodes.size(); ++i) {
        double v = f(r.nodes(i));
        if (!std::isfinite(v)) throw QuadratureError("gauss_hermite_expectation: non-finite integrand at node");
        s += r.weights(i) * v;
    }
    return s;
}

double gauss_hermite_expectation_adaptive(const std::function<double(double)>& f, double tol, int start,
                                          int* used) {
    int nq = std::max(2, start);
    double prev = gauss_hermite_expectation(f, nq);
    while (nq * 2 <= kMaxNodes) {
        nq *= 2;
        double cur = gauss_hermite_expectation(f, nq);
        if (std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur))) {
            if (used) *used = nq;
            return cur;
        }
        prev = cur;
    }
    throw QuadratureError("gauss_hermite_expectation_adaptive: no agreement within node cap");
}

std::string to_string(CoeffKind k) {
    return k == CoeffKind::activation_tanh ? "activation_tanh" : "derivative_sech2";
}

HermiteCoeffs coefficients(CoeffKind kind, double y, int L, bool verify) {
    if (L < 0 || L > kMaxDegree) throw PreconditionError("coefficients: degree out of range");
    if (!(y >= 0.0) || !std::isfinite(y)) throw PreconditionError("coefficients: scale must be finite and >= 0");
    if (y == 0.0) {
        HermiteCoeffs c;
        c.kind = kind;
        c.scale = 0.0;
        c.coeffs = Vec::Zero(L + 1);
        if (kind == CoeffKind::derivative_sech2) {
            c.coeffs(0) = 1.0;
            c.energy = 1.0;
        }
        return c;
    }
    double h = panel_width(y, L);
    if (!verify) return panel_coefficients(kind, y, L, h);
    HermiteCoeffs coarse = panel_coefficients(kind, y, L, h);
    HermiteCoeffs fine = panel_coefficients(kind, y, L, 0.5 * h);
    double diff = (fine.coeffs - coarse.coeffs).cwiseAbs().maxCoeff();
    diff = std::max(diff, std::abs(fine.energy - coarse.energy));
    if (diff > 1e-9) throw QuadratureError("coefficients: panel refinement did not agree within 1e-9");
    return fine;
}

double coeff_g(int l, double y) {
    if (y <= 0.0) throw PreconditionError("coeff_g: y must be positive");
    return coefficients(CoeffKind::activation_tanh, y, l).coeffs(l);
}

double coeff_tau(int l, double z_sq) {
    if (z_sq <= 0.0) throw PreconditionError("coeff_tau: z_sq must be positive");
    return coefficients(CoeffKind::derivative_sech2, std::sqrt(z_sq), l).coeffs(l);
}

double sigma_hat(double z_sq) {
    if (z_sq < 0.0) throw PreconditionError("sigma_hat: negative argument");
    if (z_sq == 0.0) return 1.0;
    double y = std::sqrt(z_sq);
    return coefficients(CoeffKind::activation_tanh, y, 1).coeffs(1) / y;
}

double sign_coeff(int l) {
    if (l < 0) throw PreconditionError("sign_coeff: negative degree");
    if (l % 2 == 0) return 0.0;
    double c = std::sqrt(2.0 / pi<double>());
    for (int m = 0; 2 * m + 1 < l; ++m) c *= -(2.0 * m + 1.0) / std::sqrt((2.0 * m + 2.0) * (2.0 * m + 3.0));
    return c;
}

double beta_partial(long L) {
    // Ratio r_m = c_{2m+1}^2 / c_1^2 via r_{m+1} = r_m (2m+1)^2 / ((2m+2)(2m+3)).
    long double r = 1.0L, sum = 0.0L;
    for (long m = 0; 2 * m + 3 <= L; ++m) {
        r *= static_cast<long double>((2 * m + 1) * (2 * m + 1)) /
             (static_cast<long double>(2 * m + 2) * static_cast<long double>(2 * m + 3));
        sum += r;
    }
    return static_cast<double>(sum);
}

BetaResult beta_constant(long terms) {
    if (terms < 10) throw PreconditionError("beta_constant: need at least 10 terms");
    BetaResult res;
    res.terms = terms;
    res.max_degree = 2 * terms + 1;
    res.partial = beta_partial(res.max_degree);
    // r_m ~ m^{-3/2} (1 - 5/(8m) + 41/(128 m^2)) / (2 sqrt(pi)); integrate term by term.
    const double a[3] = {1.0, -5.0 / 8.0, 41.0 / 128.0};
    auto tail_integral = [&](double A) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j) s += a[j] * std::pow(A, -0.5 - j) / (0.5 + j);
        return s / (2.0 * std::sqrt(pi<double>()));
    };
    auto r_asym = [&](double m) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j) s += a[j] * std::pow(m, -1.5 - j);
        return s / (2.0 * std::sqrt(pi<double>()));
    };
    const double T = static_cast<double>(terms);
    double mid = tail_integral(T + 0.5);
    double dh = 1e-3 * T;
    double deriv = (r_asym(T + 1.0 + dh) - r_asym(T + 1.0 - dh)) / (2.0 * dh);
    double em = tail_integral(T + 1.0) + 0.5 * r_asym(T + 1.0) - deriv / 12.0;
    res.tail = mid;
    res.residual = std::abs(mid - em);
    res.value = res.partial + res.tail;
    if (res.residual > 1e-6) throw TruncationError("beta_constant: tail residual above 1e-6");
    return res;
}

BetaFirstResult beta_first_layer(int K, double tol) {
    if (K < 1) throw PreconditionError("beta_first_layer: K must be >= 1");
    const double y = std::sqrt(static_cast<double>(K));
    for (int L = 40; L <= kMaxDegree; L *= 2) {
        HermiteCoeffs c = coefficients(CoeffKind::derivative_sech2, y, L);
        double t0 = c.coeffs(0);
        double tail = 0.0;
        for (int l = 2; l <= L; l += 2) tail += c.coeffs(l) * c.coeffs(l);
        double residual = c.parseval_gap() / (t0 * t0);
        if (residual < tol || 2 * L > kMaxDegree) {
            if (residual >= tol) throw TruncationError("beta_first_layer: residual above tolerance");
            BetaFirstResult r;
            r.value = tail / (t0 * t0);
            r.parseval = (c.energy - t0 * t0) / (t0 * t0);
            r.max_degree = L;
            r.residual = residual;
            return r;
        }
    }
    throw TruncationError("beta_first_layer: degree cap reached");
}

ExpansionConstants expansion_constants(int K, double nu, int curve_points) {
    if (K < 1 || nu < 0.0) throw PreconditionError("expansion_constants: need K >= 1 and nu >= 0");
    ExpansionConstants c;
    c.K = K;
    c.nu = nu;
    double zmax = 0.0;
    for (int k = 0; k < K; ++k) zmax += std::pow(nu, 2.0 * k);
    c.rho = std::pow(sigma_hat(zmax), 2);
    c.beta = beta_constant().value;
    c.beta_first_layer = beta_first_layer(K).value;
    c.sigma_hat_sup = sigma_hat(0.0);
    c.sigma_hat_sup_unnormalized = c.sigma_hat_sup * root_two_pi<double>();
    c.c = c.rho * (1.0 + c.beta / 2.0);
    c.d = (c.beta / 2.0) * std::pow(c.sigma_hat_sup / c.rho, 2);
    double t0 = coefficients(CoeffKind::derivative_sech2, std::sqrt(zmax), 0).coeffs(0);
    c.rho_first = t0 * t0;
    c.b_first = c.rho_first * (1.0 + c.beta_first_layer / 2.0);
    c.s_first = (c.beta_first_layer / 2.0) * std::pow(1.0 / c.rho_first, 2);
    for (double z : linear_grid(0.0, std::max(zmax, 1.0), curve_points)) c.sigma_hat_curve.emplace_back(z, sigma_hat(z));
    return c;
}

SignReport verify_sign_constancy(CoeffKind kind, int degree, const std::vector<double>& grid, double zero_tol) {
    SignReport r;
    r.kind = kind;
    r.degree = degree;
    r.min_abs = std::numeric_limits<double>::infinity();
    bool pos = false, neg = false;
    for (double g : grid) {
        double v = kind == CoeffKind::activation_tanh ? coeff_g(degree, g) : coeff_tau(degree, g);
        r.values.push_back(v);
        r.min_abs = std::min(r.min_abs, std::abs(v));
        if (v > zero_tol) pos = true;
        if (v < -zero_tol) neg = true;
    }
    r.constant = !(pos && neg);
    r.sign = pos ? 1 : (neg ? -1 : 0);
    if (grid.empty()) r.min_abs = 0.0;
    return r;
}

MonotoneReport verify_ratio_monotonicity(CoeffKind kind, int i, const std::vector<double>& grid, double tol) {
    if (i < 1) throw PreconditionError("verify_ratio_monotonicity: i must be >= 1");
    MonotoneReport r;
    r.kind = kind;
    r.index = i;
    const int deg = kind == CoeffKind::activation_tanh ? 2 * i + 1 : 2 * i;
    const int base = kind == CoeffKind::activation_tanh ? 1 : 0;
    for (double g : grid) {
        double y = kind == CoeffKind::activation_tanh ? g : std::sqrt(g);
        HermiteCoeffs c = coefficients(kind, y, deg);
        r.ratios.push_back(std::abs(c.coeffs(deg) / c.coeffs(base)));
    }
    for (std::size_t j = 1; j < r.ratios.size(); ++j) {
        double step = r.ratios[j] - r.ratios[j - 1];
        r.worst_step = std::min(r.worst_step, step);
        if (step < -tol) r.monotone = false;
    }
    return r;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
    std::vector<double> g;
    if (points <= 1) {
        g.push_back(lo);
        return g;
    }
    for (int i = 0; i < points; ++i) g.push_back(lo + (hi - lo) * i / (points - 1));
    return g;
}

}  // namespace gntk::hermite
