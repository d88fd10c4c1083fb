// Independent reference computations used only by the tests.
#pragma once

#include "gntk/core.hpp"

#include <cmath>
#include <random>

namespace oracle {

using gntk::Mat;
using gntk::Vec;

inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat A(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) A(i, j) = nd(rng);
    return A;
}

// Symmetric with unit Frobenius norm.
inline Mat random_gso(std::mt19937_64& rng, Eigen::Index n) {
    Mat A = random_matrix(rng, n, n);
    Mat S = A + A.transpose();
    return S / S.norm();
}

// Columns scaled so the largest has unit norm.
inline Mat random_data(std::mt19937_64& rng, Eigen::Index n, Eigen::Index M) {
    Mat X = random_matrix(rng, n, M);
    double m = 0.0;
    for (Eigen::Index i = 0; i < M; ++i) m = std::max(m, X.col(i).norm());
    return X / m;
}

// Element-by-element column stacking.
inline Vec stack_loop(const Mat& X) {
    Vec v(X.size());
    for (Eigen::Index i = 0; i < X.cols(); ++i)
        for (Eigen::Index a = 0; a < X.rows(); ++a) v(i * X.rows() + a) = X(a, i);
    return v;
}

inline Mat block_diag(const Mat& S, Eigen::Index M) {
    Eigen::Index n = S.rows();
    Mat D = Mat::Zero(n * M, n * M);
    for (Eigen::Index i = 0; i < M; ++i) D.block(i * n, i * n, n, n) = S;
    return D;
}

inline Mat matrix_power(const Mat& S, int k) {
    Mat P = Mat::Identity(S.rows(), S.cols());
    for (int j = 0; j < k; ++j) P = P * S;
    return P;
}

// Dense Sum_k S~^k x~ x~^T S~^k through a materialized block-diagonal matrix.
inline Mat filter_ntk_dense(const Mat& S, const Mat& X, int K) {
    Mat D = block_diag(S, X.cols());
    Vec x = stack_loop(X);
    Mat T = Mat::Zero(x.size(), x.size());
    for (int k = 0; k < K; ++k) {
        Vec v = matrix_power(D, k) * x;
        T += v * v.transpose();
    }
    return T;
}

// Double factorial (2m-1)!!, i.e. E[u^{2m}].
inline double gaussian_moment(int two_m) {
    double r = 1.0;
    for (int j = two_m - 1; j > 0; j -= 2) r *= j;
    return r;
}

}  // namespace oracle

namespace oracle {

// Dense Q = Sum_k S~^k y y^T S~^k.
inline Mat q_dense(const Mat& S, const Mat& Y, int K) {
    Mat D = block_diag(S, Y.cols());
    Vec y = stack_loop(Y);
    Mat Q = Mat::Zero(y.size(), y.size());
    for (int k = 0; k < K; ++k) {
        Mat P = matrix_power(D, k);
        Q += P * y * y.transpose() * P;
    }
    return Q;
}

}  // namespace oracle
