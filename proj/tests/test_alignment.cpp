#include "doctest.h"
#include "oracles.hpp"

#include "gntk/alignment.hpp"
#include "gntk/ntk.hpp"

using namespace gntk;
using namespace gntk::alignment;
using models::Activation;

namespace {

Dataset random_dataset(std::mt19937_64& rng, int n, int M) {
    return Dataset(oracle::random_data(rng, n, M), oracle::random_data(rng, n, M));
}

}  // namespace

TEST_CASE("alignment trivial cases and sign flip") {
    std::mt19937_64 rng(1);
    Vec y = oracle::random_matrix(rng, 6, 1).col(0);
    CHECK(alignment::alignment(Mat::Identity(6, 6), y) == doctest::Approx(y.squaredNorm()));
    CHECK(alignment::alignment(Mat::Identity(6, 6), Vec::Zero(6)) == 0.0);
    Mat S = oracle::random_gso(rng, 3);
    Dataset d = random_dataset(rng, 3, 2);
    Mat T = ntk::filter_ntk(S, d.X, 3).theta;
    Vec yt = stack_columns(d.Y);
    CHECK(alignment::alignment(T, yt) == doctest::Approx(alignment::alignment(T, Vec(-yt))).epsilon(1e-14));
    CHECK_THROWS_AS(alignment::alignment(T, Vec::Zero(5)), DimensionError);
}

TEST_CASE("alignment_filt: trace form matches the quadratic form") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 40; ++t) {
        int n = 2 + t % 6, M = 1 + t % 5, K = 1 + t % 4;
        Mat S = oracle::random_gso(rng, n);
        Dataset d = random_dataset(rng, n, M);
        double q = oracle::stack_loop(d.Y).dot(oracle::filter_ntk_dense(S, d.X, K) * oracle::stack_loop(d.Y));
        CHECK(alignment_filt(S, d, K) == doctest::Approx(q).epsilon(1e-9));
    }
    Mat S = oracle::random_gso(rng, 3);
    Dataset d = random_dataset(rng, 3, 4);
    double tr = (d.Y.transpose() * d.X).trace();
    CHECK(alignment_filt(S, d, 1) == doctest::Approx(tr * tr));
    CHECK(alignment_filt(S, Dataset(d.X, Mat::Zero(3, 4)), 3) == 0.0);
}

TEST_CASE("lower bound on A_filt") {
    std::mt19937_64 rng(3);
    Mat S = oracle::random_gso(rng, 4);
    Dataset d = random_dataset(rng, 4, 3);
    CHECK(alignment_lower_bound(S, d, 1).value == doctest::Approx(alignment_filt(S, d, 1)).epsilon(1e-12));
    CHECK(alignment_lower_bound(S, Dataset(d.X, Mat::Zero(4, 3)), 2).value == 0.0);
    LowerBound lb = alignment_lower_bound(S, d, 2);
    CHECK((lb.C - 0.5 * (d.X * d.Y.transpose() + d.Y * d.X.transpose())).norm() < 1e-15);
    int violations = 0;
    for (int t = 0; t < 1000; ++t) {
        int n = 2 + t % 7, M = 1 + t % 6, K = 1 + t % 4;
        Mat Si = oracle::random_gso(rng, n);
        Dataset di = random_dataset(rng, n, M);
        double a = alignment_filt(Si, di, K), l = alignment_lower_bound(Si, di, K).value;
        violations += a < l - 1e-9 * std::max(1.0, a);
    }
    CHECK(violations == 0);
}

TEST_CASE("A_lin matches tr(Q B_lin) with dense oracles") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 30; ++t) {
        int n = 2 + t % 4, M = 1 + t % 4, K = 1 + t % 3;
        Mat S = oracle::random_gso(rng, n);
        Dataset d = random_dataset(rng, n, M);
        Mat Q = oracle::q_dense(S, d.Y, K);
        Mat B = oracle::filter_ntk_dense(S, d.X, K);
        CHECK(alignment_lin(S, d, K) == doctest::Approx((Q * B).trace()).epsilon(1e-9));
        CHECK(rel_frobenius(q_matrix(S, stack_columns(d.Y), K), Q) < 1e-13);
    }
    Mat S = oracle::random_gso(rng, 3);
    Dataset d = random_dataset(rng, 3, 2);
    double xy = stack_columns(d.X).dot(stack_columns(d.Y));
    CHECK(alignment_lin(S, d, 1) == doctest::Approx(xy * xy));
}

TEST_CASE("A_lin vanishes for y orthogonal to every shifted input") {
    Mat S = Mat::Zero(3, 3);
    S(0, 0) = 0.6;
    S(1, 1) = 0.8;
    Mat X = Mat::Zero(3, 1), Y = Mat::Zero(3, 1);
    X(0, 0) = 1.0;
    Y(1, 0) = 1.0;
    CHECK(alignment_lin(S, Dataset(X, Y), 3) == 0.0);
}

TEST_CASE("Q is symmetric PSD with rank at most K") {
    std::mt19937_64 rng(5);
    Mat S = oracle::random_gso(rng, 4);
    Vec y = oracle::random_matrix(rng, 12, 1).col(0);
    Mat Q = q_matrix(S, y, 2);
    CHECK(max_asymmetry(Q) < 1e-15);
    Eigen::SelfAdjointEigenSolver<Mat> es(Q);
    CHECK(es.eigenvalues().minCoeff() > -1e-12 * es.eigenvalues().maxCoeff());
    int rank = (es.eigenvalues().array() > 1e-10 * es.eigenvalues().maxCoeff()).count();
    CHECK(rank <= 2);
}

TEST_CASE("linear-GNN lower bound: literal form and 1/K form") {
    std::mt19937_64 rng(6);
    Mat S = oracle::random_gso(rng, 3);
    Dataset d = random_dataset(rng, 3, 2);
    CHECK(alignment_lin_lower_bound(S, Dataset(d.X, Mat::Zero(3, 2)), 2) == 0.0);
    CHECK(alignment_lin_lower_bound(S, d, 1) == doctest::Approx(alignment_lower_bound(S, d, 1).value));
    // S = I, K = 2: all four traces equal tau, A_lin = 4 tau^2 while the literal bound is 8 tau^2.
    Mat X = Mat::Identity(2, 1), Y = Mat::Identity(2, 1);
    Dataset e(X, Y);
    CHECK(alignment_lin(Mat::Identity(2, 2), e, 2) == doctest::Approx(4.0));
    CHECK(alignment_lin_lower_bound(Mat::Identity(2, 2), e, 2) == doctest::Approx(8.0));
    int violations = 0;
    for (int t = 0; t < 1000; ++t) {
        int n = 2 + t % 7, M = 1 + t % 6, K = 1 + t % 4;
        Mat Si = oracle::random_gso(rng, n);
        Dataset di = random_dataset(rng, n, M);
        double a = alignment_lin(Si, di, K);
        violations += a < alignment_lin_lower_bound_scaled(Si, di, K) - 1e-9 * std::max(1.0, a);
    }
    CHECK(violations == 0);
}

TEST_CASE("linear-GNN optimal shift operator") {
    Mat I = Mat::Identity(3, 3);
    CHECK(solve_optimal_gso_linear_gnn(I, 2, 1.0).S.norm() < 1e-14);
    CHECK((solve_optimal_gso_linear_gnn(I, 2, 4.0).S - I).norm() < 1e-14);
    std::mt19937_64 rng(7);
    for (int K = 2; K <= 4; ++K) {
        Mat A = oracle::random_matrix(rng, 4, 4);
        Mat C = A * A.transpose() + Mat::Identity(4, 4);
        shiftops::GsoSolution s = solve_optimal_gso_linear_gnn(C, K, 0.7);
        CHECK(s.residual < 1e-8);
        CHECK(constraint_lhs_linear_gnn(s.S, K) == doctest::Approx((0.7 * C).norm()).epsilon(1e-8));
    }
    CHECK_THROWS_AS(solve_optimal_gso_linear_gnn(-I, 2, 1.0), shiftops::NegativeEigenvalue);
}

TEST_CASE("leading-term alignment check") {
    std::mt19937_64 rng(8);
    Mat S = oracle::random_gso(rng, 3);
    Dataset d = random_dataset(rng, 3, 3);
    Lemma4Report z = check_lemma4(S, Dataset(d.X, Mat::Zero(3, 3)), 2, 1.0);
    CHECK(z.lhs == 0.0);
    CHECK(z.rhs == 0.0);
    CHECK(z.rho == doctest::Approx(std::pow(hermite::sigma_hat(2.0), 2)));
    CHECK_THROWS_AS(check_lemma4(2.0 * S, d, 2, 1.0), PreconditionError);
    for (int t = 0; t < 50; ++t) {
        int n = 2 + t % 5, M = 1 + t % 4, K = 1 + t % 3;
        Mat Si = oracle::random_gso(rng, n);
        Dataset di = random_dataset(rng, n, M);
        Lemma4Report r = check_lemma4(Si, di, K, 1.0);
        Mat Blin = oracle::filter_ntk_dense(Si, di.X, K);
        Vec D(Blin.rows());
        for (Eigen::Index a = 0; a < D.size(); ++a) D(a) = hermite::sigma_hat(Blin(a, a));
        Mat Q = oracle::q_dense(Si, di.Y, K);
        CHECK(r.lhs == doctest::Approx((Q * D.asDiagonal() * Blin * D.asDiagonal()).trace()).epsilon(1e-9));
        CHECK(r.rhs == doctest::Approx(r.rho * (Q * Blin).trace()).epsilon(1e-9));
        CHECK(r.pass == (r.lhs >= r.rhs - 1e-9 * std::max(1.0, r.rhs)));
    }
}

TEST_CASE("leading-term bound fails when y cancels the rescaled input") {
    // K = 1, one sample: tr(Q B) = (y^T D x)^2 can vanish while A_lin = (y^T x)^2 does not.
    Mat S = Mat::Identity(2, 2) / std::sqrt(2.0);
    Mat X(2, 1), Y(2, 1);
    X << 0.9, 0.3;
    double t = 3.0 * hermite::sigma_hat(0.81) / hermite::sigma_hat(0.09);
    Y << 1.0, -t;
    Lemma4Report r = check_lemma4(S, Dataset(X, Y), 1, 1.0);
    CHECK(std::abs(r.lhs) < 1e-15);
    CHECK(r.rhs > 0.01);
    CHECK_FALSE(r.pass);
    CHECK_FALSE(r.proof_step_pass);
    Corollary2Report c = check_corollary2_first_layer(S, Dataset(X, Y), 1);
    CHECK(c.tr_qb1 < c.rho_first * c.A_lin);
}

TEST_CASE("series tail check") {
    Mat Z(2, 2);
    Z << 1, 0, 0, 0.5;
    Lemma5Report r = check_lemma5(Z);
    CHECK(r.pass());
    CHECK(r.beta == doctest::Approx(M_PI / 2 - 1).epsilon(1e-9));
    std::mt19937_64 rng(9);
    for (int t = 0; t < 50; ++t) {
        int n = 2 + t % 5, M = 1 + t % 4, K = 1 + t % 3;
        Mat S = oracle::random_gso(rng, n);
        Mat Zi = ntk::z_vectors(S, oracle::random_data(rng, n, M), K);
        CHECK(check_lemma5(Zi).pass());
        ntk::ExpectationMatrix e = ntk::expectation_E_series(Zi, 21);
        for (Eigen::Index a = 0; a < Zi.rows(); ++a) {
            CHECK((*e.B)(a, a) >= 0.0);
            CHECK((*e.dB)(a, a) >= 0.0);
        }
    }
}

TEST_CASE("GNN alignment bound check") {
    std::mt19937_64 rng(10);
    Mat S = oracle::random_gso(rng, 3);
    Mat X = oracle::random_data(rng, 3, 4);
    Dataset d(X, oracle::random_data(rng, 3, 4));
    Theorem3Report id = check_theorem3(S, d, 2, 1.0, 0.0, Activation::identity);
    CHECK(id.A == doctest::Approx(id.A_lin).epsilon(1e-10));
    CHECK(id.holds);
    CHECK_FALSE(id.vacuous);
    Theorem3Report z = check_theorem3(S, Dataset(X, Mat::Zero(3, 4)), 2, 1.0, 0.0);
    CHECK(z.A == 0.0);
    CHECK(z.holds);
    Mat Y = X + S * X;
    Theorem3Report p = check_theorem3(S, Dataset(X, Y), 2, 1.0, 0.5);
    CHECK(p.xi_observed >= 0.5);
    CHECK(p.holds);
    CHECK(p.vacuous);
    CHECK(p.lambda_min <= p.lambda_max);
    CHECK_THROWS_AS(check_theorem3(S, Dataset(X, Y), 2, 1.0, 1.5), AssumptionNotMet);
}

TEST_CASE("first-layer alignment check") {
    std::mt19937_64 rng(11);
    Mat S = oracle::random_gso(rng, 3);
    Dataset d = random_dataset(rng, 3, 3);
    Corollary2Report id = check_corollary2_first_layer(S, d, 2, 1.0, Activation::identity);
    CHECK(id.A1 == doctest::Approx(id.A_lin).epsilon(1e-10));
    CHECK(id.holds);
    CHECK(check_corollary2_first_layer(S, d, 3).beta_first == doctest::Approx(0.7320).epsilon(2e-2 / 0.732));
    for (int t = 0; t < 30; ++t) {
        int n = 2 + t % 4, M = 1 + t % 3, K = 1 + t % 3;
        Mat Si = oracle::random_gso(rng, n);
        Dataset di = random_dataset(rng, n, M);
        Corollary2Report r = check_corollary2_first_layer(Si, di, K);
        CHECK(r.A_lin == doctest::Approx(alignment_lin(Si, di, K)).epsilon(1e-10));
        Mat Blin = oracle::filter_ntk_dense(Si, di.X, K);
        Vec D(Blin.rows());
        for (Eigen::Index a = 0; a < D.size(); ++a) D(a) = hermite::coeff_tau(0, Blin(a, a));
        Mat Q = oracle::q_dense(Si, di.Y, K);
        CHECK(r.tr_qb1 == doctest::Approx((Q * D.asDiagonal() * Blin * D.asDiagonal()).trace()).epsilon(1e-9));
    }
}

TEST_CASE("boundary-feasible S never beat S* for K = 2") {
    std::mt19937_64 rng(12);
    Dataset d = random_dataset(rng, 4, 5);
    shiftops::GsoSolveConfig cfg;
    cfg.K = 2;
    cfg.alpha = 2.0;
    cfg.eta = 0.01;
    cfg.M = 5;
    double b = shiftops::budget(cfg);
    shiftops::CrossCovariance c = shiftops::cross_covariance(d, shiftops::CxyMode::symmetrized, false);
    shiftops::GsoSolution star = shiftops::solve_optimal_gso(c, cfg);
    CHECK(shiftops::constraint_lhs(star.S, 2) == doctest::Approx(b));
    double best = alignment_lower_bound(star.S, d, 2).value;
    int exceed = 0;
    for (int t = 0; t < 1000; ++t) {
        Mat S = oracle::random_gso(rng, 4);
        double tr = S.trace(), n = 4.0;
        double s = (-tr + std::sqrt(tr * tr - (n - b * b))) ;
        Mat Sb = s * S;
        exceed += alignment_lower_bound(Sb, d, 2).value > best + 1e-9;
    }
    CHECK(exceed == 0);
}
