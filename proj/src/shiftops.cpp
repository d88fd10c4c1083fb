#include "gntk/shiftops.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>

namespace gntk::shiftops {

NoRealRoot::NoRealRoot(double g, int k)
    : std::runtime_error("no real root of sum_{k<" + std::to_string(k) + "} s^k = " + std::to_string(g)), gamma(g), K(k) {}

NegativeEigenvalue::NegativeEigenvalue(double v)
    : std::runtime_error("negative target eigenvalue " + std::to_string(v) + " for a square"), value(v) {}

ShiftOperator covariance(const Dataset& d) {
    if (d.M() < 1) throw PreconditionError("covariance: need at least one sample");
    Mat C = d.X * d.X.transpose();
    double f = C.norm();
    if (f == 0.0) throw PreconditionError("covariance: zero data");
    C /= f;
    C = 0.5 * (C + C.transpose());
    return ShiftOperator(C, NormMode::frobenius_unit, f);
}

CrossCovariance cross_covariance(const Dataset& d, CxyMode mode, bool normalize) {
    if (d.M() < 1) throw PreconditionError("cross_covariance: need at least one sample");
    Mat raw = d.X * d.Y.transpose();
    CrossCovariance c;
    c.mode = mode;
    c.C = mode == CxyMode::symmetrized ? Mat(0.5 * (raw + raw.transpose())) : raw;
    c.scale = c.C.norm();
    if (normalize && c.scale == 0.0) throw PreconditionError("cross_covariance: zero matrix");
    c.normalized = normalize;
    if (normalize) c.C /= c.scale;
    return c;
}

ShiftOperator as_shift(const CrossCovariance& c) {
    if (c.mode != CxyMode::symmetrized) throw PreconditionError("as_shift: raw cross-covariance is not symmetric");
    return ShiftOperator(c.C, c.normalized ? NormMode::frobenius_unit : NormMode::custom, c.scale);
}

double budget(const GsoSolveConfig& cfg) {
    if (cfg.alpha <= 0 || cfg.eta <= 0 || cfg.M < 1) throw PreconditionError("budget: need alpha, eta > 0 and M >= 1");
    return std::sqrt(cfg.alpha / (cfg.eta * static_cast<double>(cfg.M)));
}

double solve_mu(const Mat& C, const GsoSolveConfig& cfg) {
    double f = C.norm();
    if (f == 0.0) throw PreconditionError("solve_mu: zero cross-covariance");
    return budget(cfg) / f;
}

double power_sum_root(double gamma, int K) {
    if (K < 2) throw PreconditionError("power_sum_root: K must be >= 2");
    if (K == 2) return gamma - 1.0;
    // Companion matrix of s^{K-1} + ... + s + (1 - gamma).
    const int deg = K - 1;
    Mat comp = Mat::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -(i == 0 ? 1.0 - gamma : 1.0);
    Eigen::EigenSolver<Mat> es(comp, false);
    auto poly = [&](double s, double* dp) {
        double p = 0.0, d = 0.0, pk = 1.0;
        for (int k = 0; k < K; ++k) {
            p += pk;
            if (k + 1 < K) d += (k + 1) * pk;
            pk *= s;
        }
        *dp = d;
        return p - gamma;
    };
    double best = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        std::complex<double> z = es.eigenvalues()(i);
        if (std::abs(z.imag()) > 1e-7 * std::max(1.0, std::abs(z))) continue;
        double s = z.real();
        for (int it = 0; it < 50; ++it) {
            double d;
            double p = poly(s, &d);
            if (d == 0.0) break;
            double step = p / d;
            s -= step;
            if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(s))) break;
        }
        double d;
        if (std::abs(poly(s, &d)) > 1e-9 * std::max(1.0, std::abs(gamma))) continue;
        if (std::isnan(best) || std::abs(s) < std::abs(best)) best = s;
    }
    if (std::isnan(best)) throw NoRealRoot(gamma, K);
    return best;
}

GsoSolution solve_power_sum(const Mat& C, int K, double mu) {
    if (K < 2) throw PreconditionError("solve_power_sum: K must be >= 2");
    if (max_asymmetry(C) > 1e-10) throw PreconditionError("solve_power_sum: C must be symmetric");
    Mat target = mu * C;
    GsoSolution sol;
    sol.mu = mu;
    if (K == 2) {
        sol.S = target - Mat::Identity(C.rows(), C.cols());
    } else {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (target + target.transpose()));
        Vec s(C.rows());
        for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = power_sum_root(es.eigenvalues()(i), K);
        sol.S = es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
        sol.S = 0.5 * (sol.S + sol.S.transpose());
    }
    double tn = target.norm();
    sol.residual = (power_sum(sol.S, K) - target).norm() / (tn == 0.0 ? 1.0 : tn);
    if (sol.residual > 1e-8) throw std::runtime_error("solve_power_sum: residual above 1e-8");
    return sol;
}

GsoSolution solve_optimal_gso(const CrossCovariance& c, const GsoSolveConfig& cfg) {
    if (c.mode != CxyMode::symmetrized) throw PreconditionError("solve_optimal_gso: needs symmetrized C_XY");
    GsoSolution sol = solve_power_sum(c.C, cfg.K, solve_mu(c.C, cfg));
    if (cfg.unit_direction) {
        double f = sol.S.norm();
        if (f > 0.0) sol.S /= f;
    }
    return sol;
}

double constraint_lhs(const Mat& S, int K) { return power_sum(S, K).norm(); }

}  // namespace gntk::shiftops
