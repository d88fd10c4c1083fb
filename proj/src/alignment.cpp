#include "gntk/alignment.hpp"

#include "gntk/ntk.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace gntk::alignment {

namespace {

double trace_product(const Mat& A, const Mat& B) { return A.cwiseProduct(B).sum(); }

Mat double_power_sum(const Mat& S, int K) {
    Mat P = power_sum(S, K);
    return P * P;
}

void check_K(int K, const char* where) {
    if (K < 1) throw PreconditionError(std::string(where) + ": K must be >= 1");
}

Vec sigma_hat_rows(const Mat& Z) {
    Vec s(Z.rows());
    for (Eigen::Index a = 0; a < Z.rows(); ++a) s(a) = hermite::sigma_hat(Z.row(a).squaredNorm());
    return s;
}

double rel_slack(double v, double slack) { return slack * std::max(1.0, std::abs(v)); }

}  // namespace

AssumptionNotMet::AssumptionNotMet(double req, double obs)
    : std::runtime_error("assumption not met: xi_observed " + std::to_string(obs) + " below requested " +
                         std::to_string(req)),
      requested(req),
      observed(obs) {}

double alignment(const Mat& theta, const Vec& y) {
    if (theta.rows() != y.size() || theta.cols() != y.size()) throw DimensionError("alignment: shape mismatch");
    return y.dot(theta * y);
}

double alignment(const NtkMatrix& theta, const Vec& y) { return alignment(theta.theta, y); }

Vec trace_moments(const Mat& S, const Dataset& d, int count) {
    if (S.rows() != d.n() || S.cols() != d.n()) throw DimensionError("trace_moments: S does not match data");
    Vec t(std::max(count, 0));
    Mat P = d.X;
    for (int j = 0; j < count; ++j) {
        t(j) = trace_product(d.Y, P);
        if (j + 1 < count) P = S * P;
    }
    return t;
}

double alignment_filt(const Mat& S, const Dataset& d, int K) {
    check_K(K, "alignment_filt");
    return trace_moments(S, d, K).squaredNorm();
}

LowerBound alignment_lower_bound(const Mat& S, const Dataset& d, int K) {
    check_K(K, "alignment_lower_bound");
    LowerBound lb;
    lb.C = shiftops::cross_covariance(d, shiftops::CxyMode::symmetrized, false).C;
    double tr = trace_product(power_sum(S, K), lb.C);
    lb.value = tr * tr / K;
    return lb;
}

double alignment_lin(const Mat& S, const Dataset& d, int K) {
    check_K(K, "alignment_lin");
    Vec t = trace_moments(S, d, 2 * K - 1);
    double a = 0.0;
    for (int k = 0; k < K; ++k)
        for (int kp = 0; kp < K; ++kp) a += t(k + kp) * t(k + kp);
    return a;
}

double alignment_lin_lower_bound(const Mat& S, const Dataset& d, int K) {
    check_K(K, "alignment_lin_lower_bound");
    Mat C = shiftops::cross_covariance(d, shiftops::CxyMode::symmetrized, false).C;
    double tr = trace_product(double_power_sum(S, K), C);
    return tr * tr / K;
}

double alignment_lin_lower_bound_scaled(const Mat& S, const Dataset& d, int K) {
    return alignment_lin_lower_bound(S, d, K) / K;
}

Mat q_matrix(const Mat& S, const Vec& y, int K) {
    check_K(K, "q_matrix");
    if (S.rows() == 0 || y.size() % S.rows() != 0) throw DimensionError("q_matrix: y length not a multiple of n");
    return ntk::block_sandwich(S, y * y.transpose(), K);
}

shiftops::GsoSolution solve_optimal_gso_linear_gnn(const Mat& C, int K, double mu) {
    if (K < 2) throw PreconditionError("solve_optimal_gso_linear_gnn: K must be >= 2");
    if (max_asymmetry(C) > 1e-10) throw PreconditionError("solve_optimal_gso_linear_gnn: C must be symmetric");
    Mat target = mu * C;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (target + target.transpose()));
    const Vec& g = es.eigenvalues();
    double tol = 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff());
    Vec s(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (g(i) < -tol) throw shiftops::NegativeEigenvalue(g(i));
        s(i) = shiftops::power_sum_root(std::sqrt(std::max(g(i), 0.0)), K);
    }
    shiftops::GsoSolution sol;
    sol.mu = mu;
    sol.S = es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
    sol.S = 0.5 * (sol.S + sol.S.transpose());
    double tn = target.norm();
    sol.residual = (double_power_sum(sol.S, K) - target).norm() / (tn == 0.0 ? 1.0 : tn);
    if (sol.residual > 1e-8) throw std::runtime_error("solve_optimal_gso_linear_gnn: residual above 1e-8");
    return sol;
}

double constraint_lhs_linear_gnn(const Mat& S, int K) { return double_power_sum(S, K).norm(); }

double xi_observed(const Mat& S, const Dataset& d, int K) {
    Mat Z = ntk::z_vectors(S, d.X, K);
    Mat Q = q_matrix(S, stack_columns(d.Y), K);
    Mat B = Z * Z.transpose();
    double den = Q.norm() * B.norm();
    return den == 0.0 ? 0.0 : trace_product(Q, B) / den;
}

const hermite::ExpansionConstants& cached_constants(int K, double nu) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, std::unique_ptr<hermite::ExpansionConstants>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{K, nu}];
    if (!slot) slot = std::make_unique<hermite::ExpansionConstants>(hermite::expansion_constants(K, nu));
    return *slot;
}

Lemma4Report check_lemma4(const Mat& S, const Dataset& d, int K, double nu, double slack) {
    check_K(K, "check_lemma4");
    double op = Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
    if (op > nu * (1.0 + 1e-12)) throw PreconditionError("check_lemma4: ||S||_op exceeds nu");
    double zmax = 0.0;
    for (int k = 0; k < K; ++k) zmax += std::pow(nu, 2.0 * k);
    Mat Z = ntk::z_vectors(S, d.X, K);
    Mat Blin = Z * Z.transpose();
    Vec D = sigma_hat_rows(Z);
    Mat B = D.asDiagonal() * Blin * D.asDiagonal();
    Mat Q = q_matrix(S, stack_columns(d.Y), K);
    double a_lin = trace_product(Q, Blin);
    Lemma4Report r;
    r.rho = std::pow(hermite::sigma_hat(zmax), 2);
    r.lhs = trace_product(Q, B);
    r.rhs = r.rho * a_lin;
    r.lambda_min_sq = D.size() ? D.minCoeff() * D.minCoeff() : 0.0;
    r.proof_step_rhs = r.lambda_min_sq * a_lin;
    r.margin = r.lhs - r.rhs;
    r.pass = r.margin >= -rel_slack(r.rhs, slack);
    r.proof_step_pass = r.lhs - r.proof_step_rhs >= -rel_slack(r.proof_step_rhs, slack);
    return r;
}

Lemma5Report check_lemma5(const Mat& Z, int L, double slack) {
    ntk::ExpectationMatrix s = ntk::expectation_E_series(Z, L);
    const Mat& B = *s.B;
    const Mat& dB = *s.dB;
    Lemma5Report r;
    r.beta = hermite::beta_constant().value;
    r.residual = s.residual;
    r.worst_margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < B.rows(); ++a)
        for (Eigen::Index b = 0; b < B.cols(); ++b) {
            ++r.entries;
            double x = B(a, b), y = dB(a, b);
            if (x * y < 0.0 && std::abs(y) > slack) ++r.sign_violations;
            double m = r.beta * std::abs(x) - std::abs(y);
            if (m < -slack) ++r.bound_violations;
            r.worst_margin = std::min(r.worst_margin, m);
        }
    if (r.entries == 0) r.worst_margin = 0.0;
    return r;
}

Theorem3Report check_theorem3(const Mat& S, const Dataset& d, int K, double nu, double xi, models::Activation act,
                              double slack) {
    check_K(K, "check_theorem3");
    Mat Z = ntk::z_vectors(S, d.X, K);
    Mat Blin = Z * Z.transpose();
    Mat Q = q_matrix(S, stack_columns(d.Y), K);
    Theorem3Report r;
    r.A_lin = trace_product(Q, Blin);
    double den = Q.norm() * Blin.norm();
    r.xi_observed = den == 0.0 ? 0.0 : r.A_lin / den;
    r.xi_requested = xi;
    if (xi > r.xi_observed && r.A_lin != 0.0) throw AssumptionNotMet(xi, r.xi_observed);
    r.A = trace_product(Q, ntk::expectation_E_quadrature(Z, act).E);
    double beta = 0.0;
    if (act == models::Activation::identity) {
        r.c = 1.0;
        r.d = 0.0;
    } else {
        const hermite::ExpansionConstants& c = cached_constants(K, nu);
        r.c = c.c;
        r.d = c.d;
        beta = c.beta;
    }
    double x = r.xi_observed > 0.0 ? r.xi_observed : std::numeric_limits<double>::min();
    r.factor = r.c - r.d / x;
    r.vacuous = !(r.factor > 0.0);
    r.holds = r.A >= (r.A_lin == 0.0 ? 0.0 : r.factor * r.A_lin) - rel_slack(r.A, slack);
    if (act == models::Activation::identity) {
        r.lambda_min = r.lambda_max = 1.0;
        r.data_factor = 1.0;
    } else {
        Vec D = sigma_hat_rows(Z);
        r.lambda_min = D.size() ? D.minCoeff() : 0.0;
        r.lambda_max = D.size() ? D.maxCoeff() : 0.0;
        double lm2 = r.lambda_min * r.lambda_min;
        r.data_factor = lm2 * (1.0 - beta / 2.0 * (r.lambda_max * r.lambda_max / (x * lm2) - 1.0));
    }
    r.data_vacuous = !(r.data_factor > 0.0);
    r.data_holds = r.A >= (r.A_lin == 0.0 ? 0.0 : r.data_factor * r.A_lin) - rel_slack(r.A, slack);
    return r;
}

Corollary2Report check_corollary2_first_layer(const Mat& S, const Dataset& d, int K, double nu,
                                              models::Activation act, double slack) {
    check_K(K, "check_corollary2_first_layer");
    Mat Z = ntk::z_vectors(S, d.X, K);
    Mat Blin = Z * Z.transpose();
    Mat Q = q_matrix(S, stack_columns(d.Y), K);
    Corollary2Report r;
    r.A_lin = trace_product(Q, Blin);
    double den = Q.norm() * Blin.norm();
    r.xi_observed = den == 0.0 ? 0.0 : r.A_lin / den;
    r.A1 = trace_product(Q, ntk::expectation_E_first_layer(Z, act));
    if (act == models::Activation::identity) {
        r.rho_first = 1.0;
        r.beta_first = 0.0;
        r.b = 1.0;
        r.s = 0.0;
        r.tr_qb1 = r.A_lin;
    } else {
        const hermite::ExpansionConstants& c = cached_constants(K, nu);
        r.rho_first = c.rho_first;
        r.beta_first = c.beta_first_layer;
        r.b = c.b_first;
        r.s = c.s_first;
        r.tr_qb1 = trace_product(Q, ntk::first_layer_series(Z, 2).B1);
    }
    double x = r.xi_observed > 0.0 ? r.xi_observed : std::numeric_limits<double>::min();
    r.factor = r.b - r.s / x;
    r.vacuous = !(r.factor > 0.0);
    r.holds = r.A1 >= (r.A_lin == 0.0 ? 0.0 : r.factor * r.A_lin) - rel_slack(r.A1, slack);
    r.leading_holds = r.tr_qb1 >= r.rho_first * r.A_lin - rel_slack(r.A_lin, slack);
    return r;
}

AlignmentReport report(const Mat& S, const Dataset& d, int K, double nu, const shiftops::GsoSolveConfig& cfg,
                       models::Activation act) {
    AlignmentReport r;
    Mat Z = ntk::z_vectors(S, d.X, K);
    Mat Q = q_matrix(S, stack_columns(d.Y), K);
    r.A = trace_product(Q, ntk::expectation_E_quadrature(Z, act).E);
    r.A_filt = alignment_filt(S, d, K);
    r.A_lin = alignment_lin(S, d, K);
    r.A_L = alignment_lower_bound(S, d, K).value;
    r.A_Lp = alignment_lin_lower_bound(S, d, K);
    r.constraint_lhs = shiftops::constraint_lhs(S, K);
    r.budget = shiftops::budget(cfg);
    Mat Blin = Z * Z.transpose();
    double den = Q.norm() * Blin.norm();
    r.xi_observed = den == 0.0 ? 0.0 : r.A_lin / den;
    const hermite::ExpansionConstants& c = cached_constants(K, nu);
    r.rho = c.rho;
    r.beta = c.beta;
    r.c = c.c;
    r.d = c.d;
    return r;
}

}  // namespace gntk::alignment
