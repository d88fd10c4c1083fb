#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace gntk {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Raised when shapes of operands disagree.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised when a documented precondition does not hold.
struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Paired input/output samples, one sample per column.
struct Dataset {
    Mat X;
    Mat Y;
    bool normalized = false;

    Dataset() = default;
    Dataset(Mat x, Mat y, bool norm = false);

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index M() const { return X.cols(); }
    double max_input_norm() const;
};

struct StackedData {
    Vec x;
    Vec y;
};

// Sample-outer, node-inner: v[i*n + a] = X(a, i).
StackedData stack(const Dataset& d);
Vec stack_columns(const Mat& A);
Mat unstack(const Vec& v, Eigen::Index n);
Dataset unstack(const StackedData& s, Eigen::Index n);

enum class NormMode { frobenius_unit, custom };

/// Symmetric graph shift operator.
class ShiftOperator {
public:
    ShiftOperator() = default;
    // Validates symmetry (1e-10) and, for frobenius_unit, the unit norm.
    explicit ShiftOperator(Mat S, NormMode mode = NormMode::custom, double scale = 1.0);

    static ShiftOperator normalized(const Mat& S);

    const Mat& matrix() const { return S_; }
    Eigen::Index n() const { return S_.rows(); }
    NormMode mode() const { return mode_; }
    double scale() const { return scale_; }

private:
    Mat S_;
    NormMode mode_ = NormMode::custom;
    double scale_ = 1.0;
};

double max_asymmetry(const Mat& A);

/// Block-diagonal operator holding M copies of S, applied without materializing.
class BlockDiagShift {
public:
    BlockDiagShift(const Mat& S, Eigen::Index M);

    Vec apply(const Vec& v, int k = 1) const;
    Mat dense() const;  // test-only: materialize nM x nM

    Eigen::Index n() const { return S_.rows(); }
    Eigen::Index M() const { return M_; }
    Eigen::Index size() const { return S_.rows() * M_; }
    const Mat& S() const { return S_; }

private:
    Mat S_;
    Eigen::Index M_;
};

Vec apply_block_shift(const BlockDiagShift& St, const Vec& v, int k);

// Columns S^0 v, ..., S^{K-1} v of the block shift.
Mat shift_powers(const BlockDiagShift& St, const Vec& v, int K);

// Sum_{k<K} S^k for a square matrix.
Mat power_sum(const Mat& S, int K);

enum class NtkProvenance {
    filter_analytic,
    gnn_empirical,
    gnn_infinite_quadrature,
    gnn_infinite_series,
    gnn_monte_carlo
};

std::string to_string(NtkProvenance p);

struct NtkMatrix {
    Mat theta;
    NtkProvenance provenance = NtkProvenance::filter_analytic;
    int param = 0;  // F, L or F_mc depending on provenance

    double rel_asymmetry() const;
    double min_eig_ratio() const;  // lambda_min / ||theta||_op
    bool valid(double tol = 1e-8) const;
};

double rel_frobenius(const Mat& A, const Mat& B);

// Runs body(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace gntk
