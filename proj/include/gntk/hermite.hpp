#pragma once

#include "gntk/core.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gntk::hermite {

/// Quadrature failed to reach its agreement tolerance.
struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Series did not reach the requested truncation residual.
struct TruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kMaxDegree = 400;
constexpr int kDefaultNodes = 64;
constexpr int kMaxNodes = 512;
constexpr int kDefaultSeriesL = 21;

/// Orthonormal probabilists' Hermite polynomial p_l(u) = He_l(u)/sqrt(l!).
double hermite_eval(int l, double u);

/// Writes p_0(u) .. p_L(u) into out (length L+1).
void hermite_all(int L, double u, double* out);

/// Gauss-Hermite rule for the standard normal probability measure.
struct GaussRule {
    Vec nodes;
    Vec weights;
};

/// Cached rule with Nq nodes (Nq >= 2).
const GaussRule& gauss_hermite_rule(int Nq);

/// E_{u~N(0,1)}[f(u)] with an Nq-point rule.
double gauss_hermite_expectation(const std::function<double(double)>& f, int Nq = kDefaultNodes);

/// Same, doubling Nq from `start` until two estimates agree within tol (cap kMaxNodes).
double gauss_hermite_expectation_adaptive(const std::function<double(double)>& f, double tol = 1e-9,
                                          int start = kDefaultNodes, int* used = nullptr);

enum class CoeffKind { activation_tanh, derivative_sech2 };

std::string to_string(CoeffKind k);

/// Hermite coefficients of u -> tanh(y u) (activation) or sech^2(y u) (derivative).
struct HermiteCoeffs {
    CoeffKind kind = CoeffKind::activation_tanh;
    double scale = 0.0;     // y, the multiplier of u
    Vec coeffs;             // alpha_0 .. alpha_L
    double energy = 0.0;    // E[f(u)^2]
    double parseval_gap() const { return energy - coeffs.squaredNorm(); }
};

/// All coefficients up to degree L for the given kind and scale y >= 0.
/// With verify set, the panel rule is halved and both estimates must agree within 1e-9.
HermiteCoeffs coefficients(CoeffKind kind, double y, int L = kDefaultSeriesL, bool verify = true);

/// g_l(y) = E[tanh(y u) p_l(u)].
double coeff_g(int l, double y);

/// tau_l(z_sq) = E[sech^2(sqrt(z_sq) u) p_l(u)].
double coeff_tau(int l, double z_sq);

/// g_1(sqrt(z_sq)) / sqrt(z_sq), equal to 1 at z_sq = 0.
double sigma_hat(double z_sq);

/// Coefficients of sign(u): zero for even l.
double sign_coeff(int l);

struct BetaResult {
    double value = 0.0;
    long terms = 0;          // odd degrees summed explicitly
    long max_degree = 0;
    double partial = 0.0;    // explicit partial sum
    double tail = 0.0;       // asymptotic tail estimate
    double residual = 0.0;   // uncertainty of the tail estimate
};

/// Sum_{odd l >= 3} c_l^2 / c_1^2 for the sign function, truncated at degree L.
double beta_partial(long L);

/// Limit ratio of Hermite tail energy to the linear term for tanh(y u), y -> inf.
BetaResult beta_constant(long terms = 1000000);

struct BetaFirstResult {
    double value = 0.0;       // partial-sum estimate
    double parseval = 0.0;    // (E[sech^4] - tau_0^2) / tau_0^2
    int max_degree = 0;
    double residual = 0.0;    // remaining energy / tau_0^2
};

/// Sum_{i>=1} tau_{2i}(K)^2 / tau_0(K)^2.
BetaFirstResult beta_first_layer(int K, double tol = 1e-6);

struct ExpansionConstants {
    int K = 0;
    double nu = 0.0;
    double rho = 0.0;
    double beta = 0.0;
    double beta_first_layer = 0.0;
    double sigma_hat_sup = 1.0;             // sigma_hat(0) in our convention
    double sigma_hat_sup_unnormalized = 0;  // same value times sqrt(2 pi)
    double c = 0.0;
    double d = 0.0;
    double rho_first = 0.0;
    double b_first = 0.0;
    double s_first = 0.0;
    std::vector<std::pair<double, double>> sigma_hat_curve;
};

ExpansionConstants expansion_constants(int K, double nu, int curve_points = 41);

struct SignReport {
    CoeffKind kind;
    int degree = 0;
    int sign = 0;            // +1, -1 or 0 when identically zero
    double min_abs = 0.0;
    bool constant = true;
    std::vector<double> values;
};

/// Checks that the coefficient of the given degree keeps one sign over the grid.
/// For derivative_sech2 the grid holds z_sq values, otherwise y values.
SignReport verify_sign_constancy(CoeffKind kind, int degree, const std::vector<double>& grid,
                                 double zero_tol = 1e-9);

struct MonotoneReport {
    CoeffKind kind;
    int index = 0;
    bool monotone = true;
    double worst_step = 0.0;  // most negative consecutive difference
    std::vector<double> ratios;
};

/// |g_{2i+1}/g_1| (activation) or |tau_{2i}/tau_0| (derivative) non-decreasing on the grid.
MonotoneReport verify_ratio_monotonicity(CoeffKind kind, int i, const std::vector<double>& grid,
                                         double tol = 1e-7);

std::vector<double> linear_grid(double lo, double hi, int points);

}  // namespace gntk::hermite
