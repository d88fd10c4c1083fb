#include "doctest.h"
#include "oracles.hpp"

#include "gntk/hermite.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <chrono>
#include <cmath>

using namespace gntk;
using namespace gntk::hermite;

namespace {

const double kPi = 3.14159265358979323846;

// Explicit He_l / sqrt(l!) via the three-term recurrence in raw (unnormalized) form.
double he_oracle(int l, double u) {
    double h0 = 1.0, h1 = u;
    if (l == 0) return 1.0;
    for (int k = 1; k < l; ++k) {
        double h2 = u * h1 - k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1 / std::sqrt(std::tgamma(l + 1.0));
}

// Adaptive tanh-sinh over the real line against the normal density.
double gaussian_integral(const std::function<double(double)>& f) {
    boost::math::quadrature::tanh_sinh<double> ts;
    auto g = [&](double u) { return f(u) * std::exp(-0.5 * u * u) / std::sqrt(2 * kPi); };
    return ts.integrate(g, -40.0, 0.0, 1e-14) + ts.integrate(g, 0.0, 40.0, 1e-14);
}

double sech2(double t) { return 1.0 / (std::cosh(t) * std::cosh(t)); }

}  // namespace

TEST_CASE("low-degree orthonormal Hermite values") {
    CHECK(hermite_eval(0, 3.3) == doctest::Approx(1.0));
    CHECK(hermite_eval(1, 0.7) == doctest::Approx(0.7));
    CHECK(std::abs(hermite_eval(2, 1.0)) < 1e-15);
    CHECK(hermite_eval(3, 2.0) == doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-14));
    for (int l = 0; l <= 12; ++l)
        for (double u : {-2.5, -0.3, 0.0, 1.1, 4.0})
            CHECK(hermite_eval(l, u) == doctest::Approx(he_oracle(l, u)).epsilon(1e-12));
    CHECK_THROWS_AS(hermite_eval(kMaxDegree + 1, 0.0), PreconditionError);
}

TEST_CASE("Gauss-Hermite expectations of polynomials") {
    CHECK(gauss_hermite_expectation([](double) { return 1.0; }, 64) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(gauss_hermite_expectation([](double u) { return u * u; }, 64) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(gauss_hermite_expectation([](double u) { return std::pow(u, 4); }, 64) ==
          doctest::Approx(oracle::gaussian_moment(4)).epsilon(1e-12));
    for (int m = 1; m <= 10; ++m)
        CHECK(gauss_hermite_expectation([m](double u) { return std::pow(u, 2 * m); }, 16) ==
              doctest::Approx(oracle::gaussian_moment(2 * m)).epsilon(1e-10));
    CHECK(gauss_hermite_expectation([](double u) { return std::pow(u, 3); }, 64) == doctest::Approx(0.0));
}

TEST_CASE("Gauss-Hermite rule up to the node cap") {
    const GaussRule& r = gauss_hermite_rule(512);
    CHECK(r.weights.sum() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK((r.weights.array() >= 0).all());
    CHECK(gauss_hermite_expectation([](double u) { return u * u; }, 512) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("adaptive node escalation converges on smooth integrands") {
    int used = 0;
    double v = gauss_hermite_expectation_adaptive([](double u) { return std::tanh(0.8 * u) * u; }, 1e-9, 64, &used);
    CHECK(v == doctest::Approx(gaussian_integral([](double u) { return std::tanh(0.8 * u) * u; })).epsilon(1e-9));
    CHECK(used >= 128);
    CHECK_THROWS_AS(gauss_hermite_expectation([](double) { return NAN; }, 8), QuadratureError);
}

TEST_CASE("orthonormality within 1e-8 for degrees <= 10") {
    for (int j = 0; j <= 10; ++j)
        for (int k = 0; k <= 10; ++k) {
            double e = gauss_hermite_expectation([&](double u) { return hermite_eval(j, u) * hermite_eval(k, u); }, 64);
            CHECK(std::abs(e - (j == k ? 1.0 : 0.0)) < 1e-8);
        }
}

TEST_CASE("correlated-pair identity E[p_j(u) p_k(u')] = rho^j delta_jk") {
    const GaussRule& r = gauss_hermite_rule(64);
    for (double rho : {-0.9, -0.3, 0.0, 0.5, 0.99}) {
        double s = std::sqrt(1 - rho * rho);
        for (int j = 0; j <= 6; ++j)
            for (int k = 0; k <= 6; ++k) {
                double acc = 0.0;
                for (int a = 0; a < 64; ++a)
                    for (int b = 0; b < 64; ++b) {
                        double u = r.nodes(a), up = rho * u + s * r.nodes(b);
                        acc += r.weights(a) * r.weights(b) * hermite_eval(j, u) * hermite_eval(k, up);
                    }
                double expect = j == k ? std::pow(rho, j) : 0.0;
                CHECK(std::abs(acc - expect) < 1e-6);
            }
    }
}

TEST_CASE("parity zeros of the coefficient sequences") {
    for (double y : {0.3, 1.0, 4.0, 10.0}) {
        HermiteCoeffs g = coefficients(CoeffKind::activation_tanh, y, 21);
        HermiteCoeffs t = coefficients(CoeffKind::derivative_sech2, y, 21);
        for (int l = 0; l <= 21; l += 2) CHECK(std::abs(g.coeffs(l)) < 1e-9);
        for (int l = 1; l <= 21; l += 2) CHECK(std::abs(t.coeffs(l)) < 1e-9);
    }
    CHECK(std::abs(coeff_g(2, 1.7)) < 1e-9);
    CHECK(std::abs(coeff_tau(1, 2.0)) < 1e-9);
}

TEST_CASE("coefficients agree with an adaptive-quadrature oracle") {
    for (double y : {0.2, 1.0, 2.5, 7.0}) {
        for (int l : {1, 3, 5, 9}) {
            double ref = gaussian_integral([&](double u) { return std::tanh(y * u) * he_oracle(l, u); });
            CHECK(coeff_g(l, y) == doctest::Approx(ref).epsilon(1e-9).scale(1.0));
        }
        for (int l : {0, 2, 6}) {
            double ref = gaussian_integral([&](double u) { return sech2(y * u) * he_oracle(l, u); });
            CHECK(coeff_tau(l, y * y) == doctest::Approx(ref).epsilon(1e-9).scale(1.0));
        }
    }
    double ref = gaussian_integral([](double u) { return sech2(std::sqrt(3.0) * u); });
    CHECK(std::abs(coeff_tau(0, 3.0) - ref) < 1e-8);
}

TEST_CASE("g_1 limits: Taylor for small y, E|u| for large y") {
    CHECK(std::abs(coeff_g(1, 0.01) - 0.01) < 1e-5);
    CHECK(coeff_g(1, 200.0) == doctest::Approx(std::sqrt(2.0 / kPi)).epsilon(1e-4));
    CHECK(sign_coeff(1) == doctest::Approx(std::sqrt(2.0 / kPi)).epsilon(1e-15));
}

TEST_CASE("tau_0 tends to 1 as z_sq -> 0") {
    CHECK(coeff_tau(0, 1e-10) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(coefficients(CoeffKind::derivative_sech2, 0.0, 4).coeffs(0) == 1.0);
}

TEST_CASE("sigma_hat: value at zero, monotone, Stein cross-check, oracle") {
    CHECK(sigma_hat(0.0) == 1.0);
    CHECK(sigma_hat(1e-12) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sigma_hat(0.0) * std::sqrt(2 * kPi) == doctest::Approx(2.5066).epsilon(1e-4));
    CHECK(sigma_hat(0.0) * std::sqrt(2 * kPi) <= 2.51);
    CHECK(sigma_hat(1.0) > sigma_hat(4.0));
    // Stein: E[tanh(yu) u] = y E[sech^2(yu)]
    for (double z : {0.1, 0.7, 2.0, 9.0}) CHECK(sigma_hat(z) == doctest::Approx(coeff_tau(0, z)).epsilon(1e-10));
    double ref = gaussian_integral([](double u) { return std::tanh(std::sqrt(2.0) * u) * u; }) / std::sqrt(2.0);
    CHECK(std::abs(sigma_hat(2.0) - ref) < 1e-8);
}

TEST_CASE("sign coefficients match direct integration and Parseval") {
    double energy = sign_coeff(1) * sign_coeff(1);
    for (int l = 1; l <= 15; l += 2) {
        double ref = 2.0 * gaussian_integral([&](double u) { return u > 0 ? he_oracle(l, u) : 0.0; });
        CHECK(sign_coeff(l) == doctest::Approx(ref).epsilon(1e-10));
    }
    for (int l = 0; l <= 10; l += 2) CHECK(sign_coeff(l) == 0.0);
    double partial = 0.0;
    for (int l = 3; l <= 41; l += 2) partial += std::pow(sign_coeff(l), 2);
    CHECK(beta_partial(41) == doctest::Approx(partial / energy).epsilon(1e-12));
}

TEST_CASE("beta constant against the Parseval oracle") {
    auto t0 = std::chrono::steady_clock::now();
    BetaResult b = beta_constant();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double parseval = (1.0 - 2.0 / kPi) / (2.0 / kPi);
    CHECK(parseval == doctest::Approx((kPi - 2.0) / 2.0).epsilon(1e-14));
    CHECK(std::abs(b.value - parseval) < 1e-6);
    CHECK(b.residual < 1e-6);
    CHECK(secs < 5.0);
    CHECK(beta_partial(3) < b.value);
    CHECK(beta_partial(3) == doctest::Approx(1.0 / 6.0));
    CHECK(beta_partial(101) < beta_partial(1001));
}

TEST_CASE("beta first layer") {
    BetaFirstResult b3 = beta_first_layer(3);
    CHECK(std::abs(b3.value - 0.7320) < 2e-2);
    CHECK(std::abs(b3.value - b3.parseval) < 1e-5);
    CHECK(b3.residual < 1e-6);
    CHECK(beta_first_layer(1).value < b3.value);
    // Ratio is unchanged when all coefficients share a common factor.
    HermiteCoeffs c = coefficients(CoeffKind::derivative_sech2, std::sqrt(3.0), 200);
    Vec scaled = c.coeffs * std::sqrt(2 * kPi);
    double r1 = 0, r2 = 0;
    for (int l = 2; l <= 200; l += 2) {
        r1 += c.coeffs(l) * c.coeffs(l);
        r2 += scaled(l) * scaled(l);
    }
    CHECK(r1 / (c.coeffs(0) * c.coeffs(0)) == doctest::Approx(r2 / (scaled(0) * scaled(0))).epsilon(1e-13));
}

TEST_CASE("Parseval gap for tanh shrinks with L") {
    double prev = 1.0;
    for (int L : {5, 11, 21}) {
        HermiteCoeffs c = coefficients(CoeffKind::activation_tanh, 1.5, L);
        double gap = c.parseval_gap();
        CHECK(gap >= -1e-12);
        CHECK(gap < prev);
        prev = gap;
    }
    CHECK(prev < 1e-4);
}

TEST_CASE("expansion constants are consistent by construction") {
    ExpansionConstants e = expansion_constants(2, 1.0);
    CHECK(e.rho == doctest::Approx(std::pow(sigma_hat(2.0), 2)));
    CHECK(e.c == doctest::Approx(e.rho * (1 + e.beta / 2)));
    CHECK(e.d == doctest::Approx((e.beta / 2) * std::pow(e.sigma_hat_sup / e.rho, 2)));
    CHECK(e.sigma_hat_sup_unnormalized == doctest::Approx(2.5066).epsilon(1e-4));
    CHECK(e.rho_first == doctest::Approx(std::pow(coeff_tau(0, 2.0), 2)));
}

TEST_CASE("sign constancy and ratio monotonicity") {
    auto grid = linear_grid(0.1, 10.0, 40);
    SignReport g1 = verify_sign_constancy(CoeffKind::activation_tanh, 1, grid);
    CHECK(g1.constant);
    CHECK(g1.sign == 1);
    SignReport t0 = verify_sign_constancy(CoeffKind::derivative_sech2, 0, grid);
    CHECK(t0.constant);
    CHECK(t0.sign == 1);
    SignReport g2 = verify_sign_constancy(CoeffKind::activation_tanh, 2, grid);
    CHECK(g2.constant);
    CHECK(g2.sign == 0);
    CHECK(verify_ratio_monotonicity(CoeffKind::activation_tanh, 1, grid).monotone);
    CHECK(verify_ratio_monotonicity(CoeffKind::derivative_sech2, 1, grid).monotone);
    CHECK(verify_ratio_monotonicity(CoeffKind::activation_tanh, 1, {2.0}).monotone);
}
