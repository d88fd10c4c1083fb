#include "gntk/core.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace gntk {

Dataset::Dataset(Mat x, Mat y, bool norm) : X(std::move(x)), Y(std::move(y)), normalized(norm) {
    if (X.rows() != Y.rows() || X.cols() != Y.cols())
        throw DimensionError("dataset: X and Y shapes differ");
}

double Dataset::max_input_norm() const {
    double m = 0.0;
    for (Eigen::Index i = 0; i < X.cols(); ++i) m = std::max(m, X.col(i).norm());
    return m;
}

Vec stack_columns(const Mat& A) {
    // Eigen is column-major, so the raw buffer is already sample-outer.
    return Eigen::Map<const Vec>(A.data(), A.size());
}

StackedData stack(const Dataset& d) { return {stack_columns(d.X), stack_columns(d.Y)}; }

Mat unstack(const Vec& v, Eigen::Index n) {
    if (n <= 0 || v.size() % n != 0) throw DimensionError("unstack: length not a multiple of n");
    return Eigen::Map<const Mat>(v.data(), n, v.size() / n);
}

Dataset unstack(const StackedData& s, Eigen::Index n) { return Dataset(unstack(s.x, n), unstack(s.y, n)); }

double max_asymmetry(const Mat& A) {
    if (A.rows() != A.cols()) throw DimensionError("matrix not square");
    return (A - A.transpose()).cwiseAbs().maxCoeff();
}

ShiftOperator::ShiftOperator(Mat S, NormMode mode, double scale) : S_(std::move(S)), mode_(mode), scale_(scale) {
    if (S_.rows() != S_.cols()) throw DimensionError("shift operator must be square");
    if (S_.size() > 0 && max_asymmetry(S_) > 1e-10) throw PreconditionError("shift operator must be symmetric");
    if (mode_ == NormMode::frobenius_unit && std::abs(S_.norm() - 1.0) > 1e-10)
        throw PreconditionError("frobenius_unit shift operator must have unit norm");
}

ShiftOperator ShiftOperator::normalized(const Mat& S) {
    Mat sym = 0.5 * (S + S.transpose());
    double f = sym.norm();
    if (f == 0.0) throw PreconditionError("cannot normalize a zero shift operator");
    return ShiftOperator(sym / f, NormMode::frobenius_unit, f);
}

BlockDiagShift::BlockDiagShift(const Mat& S, Eigen::Index M) : S_(S), M_(M) {
    if (S.rows() != S.cols()) throw DimensionError("block shift: S must be square");
}

Vec BlockDiagShift::apply(const Vec& v, int k) const {
    if (v.size() != size()) throw DimensionError("block shift: vector length != nM");
    if (k < 0) throw PreconditionError("block shift: negative power");
    Mat V = Eigen::Map<const Mat>(v.data(), n(), M_);
    for (int j = 0; j < k; ++j) V = S_ * V;
    return Eigen::Map<const Vec>(V.data(), V.size());
}

Mat BlockDiagShift::dense() const {
    Mat D = Mat::Zero(size(), size());
    for (Eigen::Index i = 0; i < M_; ++i) D.block(i * n(), i * n(), n(), n()) = S_;
    return D;
}

Vec apply_block_shift(const BlockDiagShift& St, const Vec& v, int k) { return St.apply(v, k); }

Mat shift_powers(const BlockDiagShift& St, const Vec& v, int K) {
    if (v.size() != St.size()) throw DimensionError("shift_powers: vector length != nM");
    Mat out(v.size(), K);
    Mat V = Eigen::Map<const Mat>(v.data(), St.n(), St.M());
    for (int k = 0; k < K; ++k) {
        out.col(k) = Eigen::Map<const Vec>(V.data(), V.size());
        if (k + 1 < K) V = St.S() * V;
    }
    return out;
}

Mat power_sum(const Mat& S, int K) {
    Mat P = Mat::Identity(S.rows(), S.cols());
    Mat acc = Mat::Zero(S.rows(), S.cols());
    for (int k = 0; k < K; ++k) {
        acc += P;
        P = P * S;
    }
    return acc;
}

std::string to_string(NtkProvenance p) {
    switch (p) {
        case NtkProvenance::filter_analytic: return "filter_analytic";
        case NtkProvenance::gnn_empirical: return "gnn_empirical";
        case NtkProvenance::gnn_infinite_quadrature: return "gnn_infinite_quadrature";
        case NtkProvenance::gnn_infinite_series: return "gnn_infinite_series";
        case NtkProvenance::gnn_monte_carlo: return "gnn_monte_carlo";
    }
    return "unknown";
}

double NtkMatrix::rel_asymmetry() const {
    double f = theta.norm();
    return f == 0.0 ? 0.0 : (theta - theta.transpose()).norm() / f;
}

double NtkMatrix::min_eig_ratio() const {
    if (theta.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (theta + theta.transpose()), Eigen::EigenvaluesOnly);
    const Vec& ev = es.eigenvalues();
    double op = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    return op == 0.0 ? 0.0 : ev(0) / op;
}

bool NtkMatrix::valid(double tol) const { return rel_asymmetry() <= tol && min_eig_ratio() >= -tol; }

double rel_frobenius(const Mat& A, const Mat& B) {
    double d = B.norm();
    return d == 0.0 ? (A - B).norm() : (A - B).norm() / d;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    std::size_t workers = threads > 1 ? std::min<std::size_t>(threads, count) : 1;
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) body(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace gntk
