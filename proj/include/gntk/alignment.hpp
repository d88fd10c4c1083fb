#pragma once

#include "gntk/core.hpp"
#include "gntk/hermite.hpp"
#include "gntk/models.hpp"
#include "gntk/shiftops.hpp"

#include <stdexcept>

namespace gntk::alignment {

/// y^T Theta y.
double alignment(const Mat& theta, const Vec& y);
double alignment(const NtkMatrix& theta, const Vec& y);

/// t_j = tr(Y^T S^j X) for j < count.
Vec trace_moments(const Mat& S, const Dataset& d, int count);

/// sum_k (tr(Y^T S^k X))^2, no nM x nM matrix.
double alignment_filt(const Mat& S, const Dataset& d, int K);

struct LowerBound {
    double value = 0.0;
    Mat C;  // symmetrized C_XY (unnormalized)
};

/// ((1/sqrt K) tr(P(S) C_XY))^2.
LowerBound alignment_lower_bound(const Mat& S, const Dataset& d, int K);

/// sum_k sum_k' (y^T S^{k+k'} x)^2 = tr(Q B_lin).
double alignment_lin(const Mat& S, const Dataset& d, int K);

/// ((1/sqrt K) tr(sum_k sum_k' S^{k+k'} C_XY))^2.
double alignment_lin_lower_bound(const Mat& S, const Dataset& d, int K);

/// Same with 1/K in place of 1/sqrt K (the form Cauchy-Schwarz over K^2 terms supports).
double alignment_lin_lower_bound_scaled(const Mat& S, const Dataset& d, int K);

/// Q = sum_k S~^k y y^T S~^k.
Mat q_matrix(const Mat& S, const Vec& y, int K);

/// sum_k sum_k' (S*)^{k+k'} = mu C, i.e. (sum_k s^k)^2 = mu gamma per eigenvalue.
shiftops::GsoSolution solve_optimal_gso_linear_gnn(const Mat& C, int K, double mu);

/// ||sum_k sum_k' S^{k+k'}||_F.
double constraint_lhs_linear_gnn(const Mat& S, int K);

/// Requested xi exceeds the measured one.
struct AssumptionNotMet : std::runtime_error {
    double requested;
    double observed;
    AssumptionNotMet(double req, double obs);
};

/// A_lin / (||Q||_F ||B_lin||_F).
double xi_observed(const Mat& S, const Dataset& d, int K);

/// Expansion constants, cached per (K, nu).
const hermite::ExpansionConstants& cached_constants(int K, double nu);

struct Lemma4Report {
    double lhs = 0.0;        // tr(Q B)
    double rhs = 0.0;        // rho A_lin
    double rho = 0.0;
    double lambda_min_sq = 0.0;
    double proof_step_rhs = 0.0;  // lambda_min^2 A_lin
    bool pass = false;
    bool proof_step_pass = false;
    double margin = 0.0;     // lhs - rhs
};

/// tr(Q B) >= rho A_lin, B the leading series term.
Lemma4Report check_lemma4(const Mat& S, const Dataset& d, int K, double nu, double slack = 1e-9);

struct Lemma5Report {
    std::size_t entries = 0;
    std::size_t sign_violations = 0;
    std::size_t bound_violations = 0;
    double worst_margin = 0.0;  // min over entries of beta|B| - |dB|
    double beta = 0.0;
    double residual = 0.0;
    bool pass() const { return sign_violations == 0 && bound_violations == 0; }
};

/// Elementwise sign(dB) sign(B) >= 0 and |dB| <= beta |B| + slack.
Lemma5Report check_lemma5(const Mat& Z, int L = hermite::kDefaultSeriesL, double slack = 1e-12);

struct Theorem3Report {
    double A = 0.0;
    double A_lin = 0.0;
    double xi_observed = 0.0;
    double xi_requested = 0.0;
    double c = 0.0;
    double d = 0.0;
    double factor = 0.0;  // c - d / xi_observed
    bool vacuous = true;  // factor <= 0
    bool holds = true;    // A >= factor A_lin
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double data_factor = 0.0;  // lambda_min^2 (1 - beta/2 (lambda_max^2/(xi lambda_min^2) - 1))
    bool data_vacuous = true;
    bool data_holds = true;
};

/// A = tr(Q E) against (c - d/xi) A_lin, plus the data-dependent lambda form.
Theorem3Report check_theorem3(const Mat& S, const Dataset& d, int K, double nu, double xi,
                              models::Activation act = models::Activation::tanh, double slack = 1e-9);

struct Corollary2Report {
    double A1 = 0.0;  // tr(Q E1)
    double A_lin = 0.0;
    double xi_observed = 0.0;
    double rho_first = 0.0;
    double beta_first = 0.0;
    double b = 0.0;
    double s = 0.0;
    double factor = 0.0;
    bool vacuous = true;
    bool holds = true;
    double tr_qb1 = 0.0;
    bool leading_holds = false;  // tr(Q B1) >= rho1 A_lin
};

/// First-layer analogue; nu = 1 when ||S||_F = 1.
Corollary2Report check_corollary2_first_layer(const Mat& S, const Dataset& d, int K, double nu = 1.0,
                                              models::Activation act = models::Activation::tanh,
                                              double slack = 1e-9);

struct AlignmentReport {
    double A = 0.0;
    double A_filt = 0.0;
    double A_lin = 0.0;
    double A_L = 0.0;
    double A_Lp = 0.0;
    double constraint_lhs = 0.0;
    double budget = 0.0;
    double xi_observed = 0.0;
    double rho = 0.0, beta = 0.0, c = 0.0, d = 0.0;
};

/// Everything at once; A uses the quadrature second-layer NTK.
AlignmentReport report(const Mat& S, const Dataset& d, int K, double nu, const shiftops::GsoSolveConfig& cfg,
                       models::Activation act = models::Activation::tanh);

}  // namespace gntk::alignment
