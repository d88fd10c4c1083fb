#include "gntk/ntk.hpp"

#include "gntk/hermite.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gntk::ntk {

Mat z_vectors(const Mat& S, const Mat& X, int K) {
    if (K < 1) throw PreconditionError("z_vectors: K must be >= 1");
    if (S.rows() != X.rows()) throw DimensionError("z_vectors: S and X sizes differ");
    BlockDiagShift St(S, X.cols());
    return shift_powers(St, stack_columns(X), K);
}

NtkMatrix filter_ntk(const Mat& S, const Mat& X, int K) {
    Mat Z = z_vectors(S, X, K);
    return {Z * Z.transpose(), NtkProvenance::filter_analytic, K};
}

Mat b_lin(const Mat& S, const Mat& X, int K) { return filter_ntk(S, X, K).theta; }

NtkMatrix empirical_ntk_filter(const Mat& S, const Mat& X, int K) {
    const Eigen::Index n = X.rows(), M = X.cols();
    Mat J(n * M, K);
    for (Eigen::Index i = 0; i < M; ++i) J.middleRows(i * n, n) = models::filter_jacobian(S, X.col(i), K);
    NtkMatrix out{Mat(n * M, n * M), NtkProvenance::gnn_empirical, K};
    // Blocks Theta(x_i, x_j) = J_i J_j^T.
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < M; ++j)
            out.theta.block(i * n, j * n, n, n) = J.middleRows(i * n, n) * J.middleRows(j * n, n).transpose();
    out.provenance = NtkProvenance::filter_analytic;
    return out;
}

Mat stacked_jacobian(const Mat& S, const models::TwoLayerGnnParams& p, const Mat& X, Layer which) {
    const Eigen::Index n = X.rows(), M = X.cols();
    Mat first = models::gnn2_jacobian(S, p, X.col(0), which);
    Mat J(n * M, first.cols());
    J.topRows(n) = first;
    for (Eigen::Index i = 1; i < M; ++i) J.middleRows(i * n, n) = models::gnn2_jacobian(S, p, X.col(i), which);
    return J;
}

NtkMatrix empirical_ntk_gnn(const Mat& S, const models::TwoLayerGnnParams& p, const Mat& X, Layer which) {
    Mat J = stacked_jacobian(S, p, X, which);
    return {J * J.transpose(), NtkProvenance::gnn_empirical, p.F()};
}

namespace {

struct PairGeometry {
    Vec norms;
    Mat rho;
    std::vector<Eigen::Index> zero_rows;
};

PairGeometry geometry(const Mat& Z) {
    PairGeometry g;
    Mat G = Z * Z.transpose();
    g.norms = G.diagonal().cwiseMax(0.0).cwiseSqrt();
    g.rho = Mat::Zero(G.rows(), G.cols());
    for (Eigen::Index a = 0; a < G.rows(); ++a) {
        if (g.norms(a) == 0.0) g.zero_rows.push_back(a);
        for (Eigen::Index b = 0; b < G.cols(); ++b) {
            double d = g.norms(a) * g.norms(b);
            if (d > 0.0) g.rho(a, b) = std::clamp(G(a, b) / d, -1.0, 1.0);
        }
    }
    return g;
}

// E[f(ya u) f(yb u')] with u' = rho u + sqrt(1 - rho^2) v.
double pair_expectation(Activation act, bool deriv, double ya, double yb, double rho, const hermite::GaussRule& r) {
    const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    auto f = [&](double v) { return deriv ? models::activate_deriv(act, v) : models::activate(act, v); };
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r.nodes.size(); ++i) {
        double ui = r.nodes(i);
        double fa = f(ya * ui);
        if (fa == 0.0) continue;
        double inner = 0.0;
        if (s == 0.0) {
            inner = f(yb * rho * ui);
        } else {
            for (Eigen::Index j = 0; j < r.nodes.size(); ++j) inner += r.weights(j) * f(yb * (rho * ui + s * r.nodes(j)));
        }
        acc += r.weights(i) * fa * inner;
    }
    return acc;
}

// Picks Nq by doubling until the probe pairs agree within 1e-9.
int choose_nodes(Activation act, bool deriv, const PairGeometry& g, int Nq) {
    if (g.norms.size() == 0) return Nq;
    Eigen::Index a = 0, b = 0;
    g.norms.maxCoeff(&a);
    // Off-diagonal probe: the partner of a with the least extreme correlation.
    double best = 2.0;
    for (Eigen::Index j = 0; j < g.norms.size(); ++j)
        if (j != a && g.norms(j) > 0.0 && std::abs(std::abs(g.rho(a, j)) - 0.5) < best) {
            best = std::abs(std::abs(g.rho(a, j)) - 0.5);
            b = j;
        }
    int nq = Nq;
    auto probe = [&](int q) {
        const auto& r = hermite::gauss_hermite_rule(q);
        return std::pair{pair_expectation(act, deriv, g.norms(a), g.norms(a), 1.0, r),
                         pair_expectation(act, deriv, g.norms(a), g.norms(b), g.rho(a, b), r)};
    };
    auto prev = probe(nq);
    while (nq * 2 <= hermite::kMaxNodes) {
        auto cur = probe(nq * 2);
        if (std::abs(cur.first - prev.first) <= 1e-9 && std::abs(cur.second - prev.second) <= 1e-9) return nq;
        nq *= 2;
        prev = cur;
    }
    throw hermite::QuadratureError("expectation: node escalation exhausted");
}

Mat pairwise(Activation act, bool deriv, const PairGeometry& g, int nq, int threads) {
    const Eigen::Index N = g.norms.size();
    const auto& r = hermite::gauss_hermite_rule(nq);
    Mat E = Mat::Zero(N, N);
    parallel_for(static_cast<std::size_t>(N), threads, [&](std::size_t ai) {
        Eigen::Index a = static_cast<Eigen::Index>(ai);
        if (g.norms(a) == 0.0) return;
        for (Eigen::Index b = a; b < N; ++b) {
            if (g.norms(b) == 0.0) continue;
            E(a, b) = pair_expectation(act, deriv, g.norms(a), g.norms(b), a == b ? 1.0 : g.rho(a, b), r);
        }
    });
    E.triangularView<Eigen::StrictlyLower>() = E.transpose().triangularView<Eigen::StrictlyLower>();
    return E;
}

}  // namespace

ExpectationMatrix expectation_E_quadrature(const Mat& Z, Activation act, int Nq, int threads) {
    PairGeometry g = geometry(Z);
    ExpectationMatrix out;
    out.method = EMethod::quadrature;
    out.param = choose_nodes(act, false, g, Nq);
    out.E = pairwise(act, false, g, out.param, threads);
    out.zero_rows = g.zero_rows;
    out.warning = !g.zero_rows.empty();
    out.residual = 1e-9;
    return out;
}

ExpectationMatrix expectation_E_series(const Mat& Z, int L, Activation act) {
    if (L < 3 || L % 2 == 0) throw PreconditionError("expectation_E_series: L must be odd and >= 3");
    if (act != Activation::tanh && act != Activation::identity)
        throw PreconditionError("expectation_E_series: only tanh or identity");
    PairGeometry g = geometry(Z);
    const Eigen::Index N = g.norms.size();
    ExpectationMatrix out;
    out.method = EMethod::series;
    out.param = L;
    out.zero_rows = g.zero_rows;
    if (act == Activation::identity) {
        out.E = Z * Z.transpose();
        out.B = out.E;
        out.dB = Mat::Zero(N, N);
        return out;
    }
    Mat C(N, L + 1);
    Vec gap(N);
    for (Eigen::Index a = 0; a < N; ++a) {
        hermite::HermiteCoeffs c = hermite::coefficients(hermite::CoeffKind::activation_tanh, g.norms(a), L, false);
        C.row(a) = c.coeffs.transpose();
        gap(a) = std::max(0.0, c.parseval_gap());
    }
    Mat B(N, N), dB = Mat::Zero(N, N);
    double resid = 0.0;
    for (Eigen::Index a = 0; a < N; ++a)
        for (Eigen::Index b = 0; b < N; ++b) {
            double rho = a == b ? (g.norms(a) > 0.0 ? 1.0 : 0.0) : g.rho(a, b);
            B(a, b) = C(a, 1) * C(b, 1) * rho;
            double rp = rho * rho * rho, acc = 0.0;
            for (int l = 3; l <= L; l += 2) {
                acc += C(a, l) * C(b, l) * rp;
                rp *= rho * rho;
            }
            dB(a, b) = acc;
            resid = std::max(resid, std::sqrt(gap(a) * gap(b)) * std::abs(rp));
        }
    out.B = B;
    out.dB = dB;
    out.E = B + dB;
    out.residual = resid;
    double scale = out.E.cwiseAbs().maxCoeff();
    out.warning = resid > 1e-4 * scale || !g.zero_rows.empty();
    return out;
}

Mat expectation_E_first_layer(const Mat& Z, Activation act, int Nq, int threads) {
    PairGeometry g = geometry(Z);
    int nq = choose_nodes(act, true, g, Nq);
    Mat E = pairwise(act, true, g, nq, threads);
    return E.cwiseProduct(Z * Z.transpose());
}

FirstLayerSeries first_layer_series(const Mat& Z, int L) {
    if (L < 2) throw PreconditionError("first_layer_series: L must be >= 2");
    PairGeometry g = geometry(Z);
    const Eigen::Index N = g.norms.size();
    Mat C(N, L + 1);
    for (Eigen::Index a = 0; a < N; ++a)
        C.row(a) = hermite::coefficients(hermite::CoeffKind::derivative_sech2, g.norms(a), L, false).coeffs.transpose();
    Mat G = Z * Z.transpose();
    FirstLayerSeries s{Mat(N, N), Mat::Zero(N, N)};
    for (Eigen::Index a = 0; a < N; ++a)
        for (Eigen::Index b = 0; b < N; ++b) {
            double rho = a == b ? 1.0 : g.rho(a, b);
            s.B1(a, b) = C(a, 0) * C(b, 0) * G(a, b);
            double acc = 0.0, rp = rho * rho;
            for (int l = 2; l <= L; l += 2) {
                acc += C(a, l) * C(b, l) * rp;
                rp *= rho * rho;
            }
            s.dB1(a, b) = acc * G(a, b);
        }
    return s;
}

Mat block_sandwich(const Mat& S, const Mat& A, int K) {
    const Eigen::Index n = S.rows(), N = A.rows();
    if (A.cols() != N || N % n != 0) throw DimensionError("block_sandwich: A must be nM x nM");
    const Eigen::Index M = N / n;
    Mat out = Mat::Zero(N, N);
    Mat T = A;
    for (int k = 0; k < K; ++k) {
        if (k > 0) {
            // T <- S~ T S~ (both sides block diagonal)
            Mat L(N, N);
            Eigen::Map<Mat>(L.data(), n, M * N) = S * Eigen::Map<const Mat>(T.data(), n, M * N);
            Mat Lt = L.transpose();
            Eigen::Map<Mat>(T.data(), n, M * N) = S * Eigen::Map<const Mat>(Lt.data(), n, M * N);
            T.transposeInPlace();
        }
        out += T;
    }
    return 0.5 * (out + out.transpose());
}

NtkMatrix gnn_infinite_ntk_second_layer(const Mat& S, const ExpectationMatrix& E, int K) {
    NtkProvenance p = E.method == EMethod::series ? NtkProvenance::gnn_infinite_series
                                                  : (E.method == EMethod::monte_carlo ? NtkProvenance::gnn_monte_carlo
                                                                                      : NtkProvenance::gnn_infinite_quadrature);
    return {block_sandwich(S, E.E, K), p, E.param};
}

NtkMatrix gnn_infinite_ntk_first_layer(const Mat& S, const Mat& E1, int K) {
    return {block_sandwich(S, E1, K), NtkProvenance::gnn_infinite_quadrature, 0};
}

NtkMatrix gnn_monte_carlo_ntk(const Mat& S, const Mat& X, int K, int F_mc, std::uint64_t seed, Layer which,
                              Activation act) {
    if (F_mc < 1) throw PreconditionError("gnn_monte_carlo_ntk: F_mc must be >= 1");
    Mat Z = z_vectors(S, X, K);
    const Eigen::Index N = Z.rows();
    const Eigen::Index M = X.cols();
    BlockDiagShift St(S, M);
    const bool first = which != Layer::second, second = which != Layer::first;
    Mat W(N, static_cast<Eigen::Index>(F_mc) * K * ((first ? 1 : 0) + (second ? 1 : 0)));
    Eigen::Index col = 0;
    for (int f = 0; f < F_mc; ++f) {
        // Counter-based stream: one generator per feature.
        std::seed_seq ss{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(f)};
        std::mt19937_64 rng(ss);
        std::normal_distribution<double> nd(0.0, 1.0);
        Vec gf(K), hf(K);
        for (int k = 0; k < K; ++k) gf(k) = nd(rng);
        for (int k = 0; k < K; ++k) hf(k) = nd(rng);
        Vec u = Z * gf;
        if (second) {
            Vec q = u.unaryExpr([act](double v) { return models::activate(act, v); });
            Mat P = shift_powers(St, q, K);
            W.middleCols(col, K) = P;
            col += K;
        }
        if (first) {
            Vec d = u.unaryExpr([act](double v) { return models::activate_deriv(act, v); });
            for (int k = 0; k < K; ++k) {
                Vec inner = d.cwiseProduct(Z.col(k));
                Mat P = shift_powers(St, inner, K);
                W.col(col++) = P * hf;
            }
        }
    }
    Mat T = W * W.transpose() / static_cast<double>(F_mc);
    return {0.5 * (T + T.transpose()), NtkProvenance::gnn_monte_carlo, F_mc};
}

DriftCurve ntk_drift(ModelKind model, const Mat& S, const Dataset& d, int K, const DriftConfig& cfg,
                     const std::vector<int>& widths) {
    DriftCurve out;
    const double scale = cfg.mean_loss ? 1.0 / static_cast<double>(d.M()) : 1.0;
    for (int F : widths) {
        out.widths.push_back(F);
        double worst = 0.0;
        bool diverged = false;
        if (model == ModelKind::filter) {
            Vec h = models::init_filter(K, {cfg.kappa, cfg.seed}).h;
            Mat T0 = empirical_ntk_filter(S, d.X, K).theta;
            for (int t = 1; t <= cfg.epochs; ++t) {
                Mat R = models::filter_forward_batch(S, h, d.X) - d.Y;
                Vec grad(K);
                Mat P = d.X;
                for (int k = 0; k < K; ++k) {
                    grad(k) = (P.array() * R.array()).sum();
                    P = S * P;
                }
                h -= cfg.eta * scale * grad;
                if (t % cfg.sample_every == 0 || t == cfg.epochs)
                    worst = std::max(worst, rel_frobenius(empirical_ntk_filter(S, d.X, K).theta, T0));
            }
        } else {
            models::TwoLayerGnnParams p = models::init_gnn2(F, K, cfg.act, {cfg.kappa, cfg.seed});
            Mat T0 = empirical_ntk_gnn(S, p, d.X).theta;
            double loss0 = 0.5 * (models::gnn2_forward_batch(S, p, d.X) - d.Y).squaredNorm();
            for (int t = 1; t <= cfg.epochs; ++t) {
                Mat R = models::gnn2_forward_batch(S, p, d.X) - d.Y;
                double loss = 0.5 * R.squaredNorm();
                if (!std::isfinite(loss) || loss > 1e6 * std::max(loss0, 1e-300)) {
                    diverged = true;
                    break;
                }
                models::TwoLayerGnnParams grad = models::gnn2_gradient(S, p, d.X, R);
                p.g -= cfg.eta * scale * grad.g;
                p.h -= cfg.eta * scale * grad.h;
                if (t % cfg.sample_every == 0 || t == cfg.epochs)
                    worst = std::max(worst, rel_frobenius(empirical_ntk_gnn(S, p, d.X).theta, T0));
            }
        }
        out.drift.push_back(worst);
        out.diverged.push_back(diverged);
    }
    return out;
}

}  // namespace gntk::ntk
