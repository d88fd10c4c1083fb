#pragma once

#include "gntk/core.hpp"

#include <stdexcept>

namespace gntk::shiftops {

enum class CxyMode { symmetrized, raw };

struct CrossCovariance {
    Mat C;
    CxyMode mode = CxyMode::symmetrized;
    bool normalized = true;
    double scale = 1.0;  // Frobenius norm before normalization
};

/// No real root of sum_{k<K} s^k = gamma.
struct NoRealRoot : std::runtime_error {
    double gamma;
    int K;
    NoRealRoot(double g, int k);
};

/// mu * gamma < 0 where a square must equal it.
struct NegativeEigenvalue : std::runtime_error {
    double value;
    explicit NegativeEigenvalue(double v);
};

/// X X^T scaled to unit Frobenius norm.
ShiftOperator covariance(const Dataset& d);

/// (X Y^T + Y X^T)/2 (symmetrized) or X Y^T (raw), optionally unit Frobenius.
CrossCovariance cross_covariance(const Dataset& d, CxyMode mode = CxyMode::symmetrized, bool normalize = true);

/// Symmetrized cross-covariance as a shift operator.
ShiftOperator as_shift(const CrossCovariance& c);

struct GsoSolveConfig {
    int K = 2;
    double alpha = 1.0;
    double eta = 1.0;
    Eigen::Index M = 1;
    bool unit_direction = false;  // rescale S* to unit Frobenius norm afterwards
};

/// sqrt(alpha/(eta M)) / ||C||_F.
double solve_mu(const Mat& C, const GsoSolveConfig& cfg);

/// sqrt(alpha/(eta M)).
double budget(const GsoSolveConfig& cfg);

struct GsoSolution {
    Mat S;
    double mu = 0.0;
    double residual = 0.0;  // ||P(S) - target||_F / ||target||_F before any rescaling
};

/// Real root of sum_{k<K} s^k = gamma with smallest |s|.
double power_sum_root(double gamma, int K);

/// Solves sum_k S^k = mu C via the eigendecomposition of mu C.
GsoSolution solve_power_sum(const Mat& C, int K, double mu);

/// Optimal shift operator for the graph filter: sum_k (S*)^k = mu C_XY.
GsoSolution solve_optimal_gso(const CrossCovariance& c, const GsoSolveConfig& cfg);

/// ||sum_{k<K} S^k||_F.
double constraint_lhs(const Mat& S, int K);

}  // namespace gntk::shiftops
