#include "doctest.h"
#include "oracles.hpp"

#include "gntk/models.hpp"

using namespace gntk;
using namespace gntk::models;

namespace {

// H(S) materialized as a dense matrix polynomial.
Mat poly_matrix(const Mat& S, const Vec& taps) {
    Mat H = Mat::Zero(S.rows(), S.cols());
    for (Eigen::Index k = 0; k < taps.size(); ++k) H += taps(k) * oracle::matrix_power(S, static_cast<int>(k));
    return H;
}

Vec convolve(const Vec& a, const Vec& b) {
    Vec c = Vec::Zero(a.size() + b.size() - 1);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        for (Eigen::Index j = 0; j < b.size(); ++j) c(i + j) += a(i) * b(j);
    return c;
}

// Central differences of gnn2_forward with respect to the flat parameter vector.
Mat fd_jacobian(const Mat& S, const TwoLayerGnnParams& p, const Vec& x, double step) {
    Vec theta = flatten(p);
    Mat J(x.size(), theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Vec tp = theta, tm = theta;
        tp(i) += step;
        tm(i) -= step;
        J.col(i) = (gnn2_forward(S, unflatten(tp, p.F(), p.K(), p.act), x) -
                    gnn2_forward(S, unflatten(tm, p.F(), p.K(), p.act), x)) /
                   (2 * step);
    }
    return J;
}

}  // namespace

TEST_CASE("filter forward special cases and dense oracle") {
    std::mt19937_64 rng(1);
    Mat S = oracle::random_gso(rng, 5);
    Vec x = oracle::random_matrix(rng, 5, 1);
    Vec e0 = Vec::Zero(3);
    e0(0) = 1.0;
    CHECK((filter_forward(S, e0, x) - x).norm() < 1e-15);
    Vec h = oracle::random_matrix(rng, 3, 1);
    CHECK((filter_forward(Mat::Zero(5, 5), h, x) - h(0) * x).norm() < 1e-15);
    for (int t = 0; t < 10; ++t) {
        Vec ht = oracle::random_matrix(rng, 4, 1);
        CHECK((filter_forward(S, ht, x) - poly_matrix(S, ht) * x).norm() < 1e-12);
    }
    Mat X = oracle::random_matrix(rng, 5, 4);
    Mat B = filter_forward_batch(S, h, X);
    for (int i = 0; i < 4; ++i) CHECK((B.col(i) - filter_forward(S, h, X.col(i))).norm() < 1e-13);
    CHECK_THROWS_AS(filter_forward(Mat::Zero(4, 4), h, x), DimensionError);
}

TEST_CASE("filter jacobian columns and finite differences") {
    std::mt19937_64 rng(2);
    Mat S = oracle::random_gso(rng, 4);
    Vec x = oracle::random_matrix(rng, 4, 1);
    CHECK((filter_jacobian(S, x, 1).col(0) - x).norm() == 0.0);
    Mat J = filter_jacobian(S, x, 4);
    Vec h = oracle::random_matrix(rng, 4, 1);
    for (int k = 0; k < 4; ++k) {
        Vec hp = h, hm = h;
        hp(k) += 1e-5;
        hm(k) -= 1e-5;
        Vec fd = (filter_forward(S, hp, x) - filter_forward(S, hm, x)) / 2e-5;
        CHECK((fd - J.col(k)).norm() < 1e-7);
    }
    Mat JI = filter_jacobian(Mat::Identity(4, 4), x, 3);
    for (int k = 0; k < 3; ++k) CHECK((JI.col(k) - x).norm() == 0.0);
}

TEST_CASE("gnn2 forward special cases") {
    std::mt19937_64 rng(3);
    Mat S = oracle::random_gso(rng, 4);
    Vec x = oracle::random_matrix(rng, 4, 1);
    TwoLayerGnnParams zero{Mat::Zero(3, 2), Mat::Zero(3, 2), Activation::tanh};
    CHECK(gnn2_forward(S, zero, x).norm() == 0.0);
    TwoLayerGnnParams id{Mat::Zero(1, 3), Mat::Zero(1, 3), Activation::identity};
    id.g(0, 0) = 1.0;
    id.h(0, 0) = 1.0;
    CHECK((gnn2_forward(S, id, x) - x).norm() < 1e-15);
}

TEST_CASE("identity gnn2 equals the tap-convolution filter") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 10; ++t) {
        Mat S = oracle::random_gso(rng, 5);
        Vec x = oracle::random_matrix(rng, 5, 1);
        TwoLayerGnnParams p = init_gnn2(4, 3, Activation::identity, {1.0, static_cast<std::uint64_t>(t)});
        Vec taps = Vec::Zero(5);
        for (int f = 0; f < 4; ++f) taps += convolve(p.g.row(f).transpose(), p.h.row(f).transpose());
        taps /= 2.0;  // sqrt(F)
        CHECK((gnn2_forward(S, p, x) - poly_matrix(S, taps) * x).norm() < 1e-12);
    }
}

TEST_CASE("gnn2 jacobian matches central differences for smooth activations") {
    std::mt19937_64 rng(5);
    int count = 0;
    for (Activation a : {Activation::tanh, Activation::sigmoid, Activation::identity}) {
        for (int t = 0; t < 17; ++t) {
            int n = 3 + t % 3, F = 1 + t % 4, K = 1 + t % 3;
            Mat S = oracle::random_gso(rng, n);
            Vec x = oracle::random_matrix(rng, n, 1);
            TwoLayerGnnParams p = init_gnn2(F, K, a, {1.0, static_cast<std::uint64_t>(100 + t)});
            Mat J = gnn2_jacobian(S, p, x);
            Mat fd = fd_jacobian(S, p, x, 1e-5);
            CHECK((J - fd).norm() <= 1e-4 * fd.norm());
            ++count;
        }
    }
    CHECK(count >= 50);
}

TEST_CASE("gnn2 jacobian for tanh, n = 4, F = 3, K = 2 within 1e-5") {
    std::mt19937_64 rng(6);
    Mat S = oracle::random_gso(rng, 4);
    Vec x = oracle::random_matrix(rng, 4, 1);
    TwoLayerGnnParams p = init_gnn2(3, 2, Activation::tanh, {1.0, 9});
    Mat J = gnn2_jacobian(S, p, x);
    Mat fd = fd_jacobian(S, p, x, 1e-5);
    CHECK((J - fd).norm() <= 1e-5 * fd.norm());
}

TEST_CASE("gnn2 jacobian layer selection") {
    std::mt19937_64 rng(7);
    Mat S = oracle::random_gso(rng, 4);
    Vec x = oracle::random_matrix(rng, 4, 1);
    TwoLayerGnnParams p = init_gnn2(2, 3, Activation::identity, {1.0, 1});
    p.g.setZero();
    p.g.col(0).setOnes();
    Mat J2 = gnn2_jacobian(S, p, x, Layer::second);
    CHECK(J2.cols() == 6);
    for (int f = 0; f < 2; ++f)
        for (int k = 0; k < 3; ++k)
            CHECK((J2.col(f * 3 + k) - oracle::matrix_power(S, k) * x / std::sqrt(2.0)).norm() < 1e-13);
    TwoLayerGnnParams q = init_gnn2(3, 2, Activation::tanh, {1.0, 2});
    q.h.setZero();
    CHECK(gnn2_jacobian(S, q, x, Layer::first).norm() == 0.0);
    Mat Jb = gnn2_jacobian(S, q, x, Layer::both);
    CHECK((Jb.rightCols(6) - gnn2_jacobian(S, q, x, Layer::second)).norm() == 0.0);
}

TEST_CASE("gnn2 batched gradient equals summed J^T r") {
    std::mt19937_64 rng(8);
    Mat S = oracle::random_gso(rng, 4);
    Mat X = oracle::random_matrix(rng, 4, 5);
    Mat R = oracle::random_matrix(rng, 4, 5);
    TwoLayerGnnParams p = init_gnn2(3, 2, Activation::tanh, {1.0, 3});
    Vec expect = Vec::Zero(p.size());
    for (int i = 0; i < 5; ++i) expect += gnn2_jacobian(S, p, X.col(i)).transpose() * R.col(i);
    CHECK((flatten(gnn2_gradient(S, p, X, R)) - expect).norm() < 1e-12 * (1 + expect.norm()));
    Mat B = gnn2_forward_batch(S, p, X);
    for (int i = 0; i < 5; ++i) CHECK((B.col(i) - gnn2_forward(S, p, X.col(i))).norm() < 1e-13);
}

TEST_CASE("gnn2 output is 1-homogeneous in second-layer taps") {
    std::mt19937_64 rng(9);
    Mat S = oracle::random_gso(rng, 5);
    Vec x = oracle::random_matrix(rng, 5, 1);
    TwoLayerGnnParams p = init_gnn2(4, 2, Activation::tanh, {1.0, 4});
    TwoLayerGnnParams q = p;
    q.h *= -2.5;
    CHECK((gnn2_forward(S, q, x) + 2.5 * gnn2_forward(S, p, x)).norm() < 1e-13);
}

TEST_CASE("flatten order is layer, feature, tap") {
    TwoLayerGnnParams p{Mat(2, 2), Mat(2, 2), Activation::tanh};
    p.g << 1, 2, 3, 4;
    p.h << 5, 6, 7, 8;
    Vec v = flatten(p);
    for (int i = 0; i < 8; ++i) CHECK(v(i) == i + 1);
    TwoLayerGnnParams b = unflatten(v, 2, 2, Activation::tanh);
    CHECK(b.g == p.g);
    CHECK(b.h == p.h);
    CHECK(shape_header_json(p).find("\"F\":2") != std::string::npos);
}

TEST_CASE("initialization: determinism, variance, small kappa") {
    TwoLayerGnnParams a = init_gnn2(5, 3, Activation::tanh, {0.7, 42});
    TwoLayerGnnParams b = init_gnn2(5, 3, Activation::tanh, {0.7, 42});
    CHECK(flatten(a) == flatten(b));
    TwoLayerGnnParams big = init_gnn2(25000, 2, Activation::tanh, {0.7, 1});
    Vec v = flatten(big);
    double mean = v.mean();
    double var = (v.array() - mean).square().sum() / (v.size() - 1);
    CHECK(std::abs(var / 0.49 - 1.0) < 0.02);
    std::mt19937_64 rng(10);
    Mat S = oracle::random_gso(rng, 4);
    Vec x = oracle::random_matrix(rng, 4, 1);
    CHECK(gnn2_forward(S, init_gnn2(3, 2, Activation::tanh, {1e-6, 3}), x).norm() < 1e-10);
    CHECK(filter_forward(S, init_filter(3, {1e-9, 3}).h, x).norm() < 1e-8);
    CHECK_THROWS_AS(init_filter(3, {0.0, 1}), PreconditionError);
}

TEST_CASE("activations and derivatives") {
    CHECK(activate(Activation::relu, -1.0) == 0.0);
    CHECK(activate_deriv(Activation::relu, 0.0) == 0.0);
    CHECK(activate(Activation::leaky_relu, -2.0) == doctest::Approx(-0.02));
    CHECK(activate_deriv(Activation::leaky_relu, -2.0) == doctest::Approx(0.01));
    for (Activation a : {Activation::tanh, Activation::sigmoid})
        for (double v : {-1.3, 0.0, 0.4}) {
            double fd = (activate(a, v + 1e-6) - activate(a, v - 1e-6)) / 2e-6;
            CHECK(activate_deriv(a, v) == doctest::Approx(fd).epsilon(1e-8));
        }
    CHECK(parse_activation("leaky_relu") == Activation::leaky_relu);
    CHECK_THROWS_AS(parse_activation("swish"), PreconditionError);
}

TEST_CASE("mimo: two layers collapse to gnn2, zero taps give zero") {
    std::mt19937_64 rng(11);
    Mat S = oracle::random_gso(rng, 5);
    Vec x = oracle::random_matrix(rng, 5, 1);
    TwoLayerGnnParams p = init_gnn2(4, 3, Activation::tanh, {1.0, 5});
    CHECK((mimo_forward(S, to_mimo(p), x) - gnn2_forward(S, p, x)).norm() < 1e-13);
    MimoGnnParams z = init_mimo({1, 3, 2, 1}, 2, Activation::tanh, {1.0, 6});
    for (auto& L : z.layers)
        for (auto& t : L.taps) t.setZero();
    CHECK(mimo_forward(S, z, x).norm() == 0.0);
}

TEST_CASE("mimo: three identity layers equal a triple tap convolution") {
    std::mt19937_64 rng(12);
    Mat S = oracle::random_gso(rng, 4);
    Vec x = oracle::random_matrix(rng, 4, 1);
    MimoGnnParams p = init_mimo({1, 1, 1, 1}, 2, Activation::identity, {1.0, 7});
    Vec a(2), b(2), c(2);
    for (int k = 0; k < 2; ++k) {
        a(k) = p.layers[0].taps[k](0, 0);
        b(k) = p.layers[1].taps[k](0, 0);
        c(k) = p.layers[2].taps[k](0, 0);
    }
    Vec taps = convolve(convolve(a, b), c);
    CHECK((mimo_forward(S, p, x) - poly_matrix(S, taps) * x).norm() < 1e-12);
    MimoGnnParams bad = p;
    bad.layers[1].taps[0] = Mat::Zero(2, 1);
    CHECK_THROWS_AS(bad.check(), DimensionError);
}
