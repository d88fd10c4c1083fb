#include "gntk/models.hpp"

#include "json.hpp"

#include <cmath>
#include <random>

namespace gntk::models {

double activate(Activation a, double v) {
    switch (a) {
        case Activation::tanh: return std::tanh(v);
        case Activation::identity: return v;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-v));
        case Activation::relu: return v > 0 ? v : 0.0;
        case Activation::leaky_relu: return v > 0 ? v : kLeakySlope * v;
    }
    return v;
}

double activate_deriv(Activation a, double v) {
    switch (a) {
        case Activation::tanh: {
            double t = std::tanh(v);
            return 1.0 - t * t;
        }
        case Activation::identity: return 1.0;
        case Activation::sigmoid: {
            double s = 1.0 / (1.0 + std::exp(-v));
            return s * (1.0 - s);
        }
        case Activation::relu: return v > 0 ? 1.0 : 0.0;
        case Activation::leaky_relu: return v > 0 ? 1.0 : kLeakySlope;
    }
    return 1.0;
}

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "identity" || name == "linear") return Activation::identity;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    throw PreconditionError("unknown activation: " + name);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
    }
    return "unknown";
}

void TwoLayerGnnParams::check() const {
    if (g.rows() != h.rows() || g.cols() != h.cols() || g.size() == 0)
        throw DimensionError("gnn2 params: g and h must both be F x K");
}

void MimoGnnParams::check() const {
    if (layers.empty()) throw DimensionError("mimo params: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        if (L.taps.empty()) throw DimensionError("mimo params: layer without taps");
        for (const Mat& t : L.taps)
            if (t.rows() != L.F_out() || t.cols() != L.F_in()) throw DimensionError("mimo params: ragged taps");
        if (l > 0 && L.F_in() != layers[l - 1].F_out()) throw DimensionError("mimo params: width mismatch");
    }
    if (layers.front().F_in() != 1 || layers.back().F_out() != 1)
        throw DimensionError("mimo params: need one input and one output feature");
}

namespace {

// Columns S^0 X, ..., S^{K-1} X stacked as a vector of matrices.
std::vector<Mat> powers(const Mat& S, const Mat& X, int K) {
    std::vector<Mat> P;
    P.reserve(K);
    P.push_back(X);
    for (int k = 1; k < K; ++k) P.push_back(S * P.back());
    return P;
}

Mat apply_taps(const std::vector<Mat>& P, const Eigen::Ref<const Vec>& taps) {
    Mat out = taps(0) * P[0];
    for (int k = 1; k < taps.size(); ++k) out += taps(k) * P[k];
    return out;
}

Mat activate(Activation a, const Mat& U) { return U.unaryExpr([a](double v) { return models::activate(a, v); }); }
Mat activate_deriv(Activation a, const Mat& U) {
    return U.unaryExpr([a](double v) { return models::activate_deriv(a, v); });
}

void check_shape(const Mat& S, Eigen::Index n) {
    if (S.rows() != S.cols() || S.rows() != n) throw DimensionError("shift operator and signal sizes differ");
}

}  // namespace

Vec filter_forward(const Mat& S, const Vec& h, const Vec& x) {
    check_shape(S, x.size());
    Vec out = Vec::Zero(x.size());
    Vec sx = x;
    for (Eigen::Index k = 0; k < h.size(); ++k) {
        out += h(k) * sx;
        if (k + 1 < h.size()) sx = S * sx;
    }
    return out;
}

Mat filter_forward_batch(const Mat& S, const Vec& h, const Mat& X) {
    check_shape(S, X.rows());
    return apply_taps(powers(S, X, static_cast<int>(h.size())), h);
}

Mat filter_jacobian(const Mat& S, const Vec& x, int K) {
    check_shape(S, x.size());
    Mat J(x.size(), K);
    Vec sx = x;
    for (int k = 0; k < K; ++k) {
        J.col(k) = sx;
        if (k + 1 < K) sx = S * sx;
    }
    return J;
}

Mat gnn2_forward_batch(const Mat& S, const TwoLayerGnnParams& p, const Mat& X) {
    p.check();
    check_shape(S, X.rows());
    const int F = p.F(), K = p.K();
    std::vector<Mat> P = powers(S, X, K);
    Mat acc = Mat::Zero(X.rows(), X.cols());
    for (int f = 0; f < F; ++f) {
        Mat q = activate(p.act, apply_taps(P, p.g.row(f).transpose()));
        acc += apply_taps(powers(S, q, K), p.h.row(f).transpose());
    }
    return acc / std::sqrt(static_cast<double>(F));
}

Vec gnn2_forward(const Mat& S, const TwoLayerGnnParams& p, const Vec& x) {
    Mat out = gnn2_forward_batch(S, p, x);
    return out.col(0);
}

Mat gnn2_jacobian(const Mat& S, const TwoLayerGnnParams& p, const Vec& x, Layer which) {
    p.check();
    check_shape(S, x.size());
    const int F = p.F(), K = p.K();
    const double c = 1.0 / std::sqrt(static_cast<double>(F));
    const bool first = which != Layer::second, second = which != Layer::first;
    Mat J(x.size(), (first ? F * K : 0) + (second ? F * K : 0));
    std::vector<Mat> P = powers(S, x, K);
    int col2 = first ? F * K : 0;
    for (int f = 0; f < F; ++f) {
        Vec u = apply_taps(P, p.g.row(f).transpose());
        if (first) {
            Vec d = activate_deriv(p.act, u);
            for (int k = 0; k < K; ++k) {
                Vec inner = d.cwiseProduct(P[k].col(0));
                J.col(f * K + k) = c * apply_taps(powers(S, inner, K), p.h.row(f).transpose());
            }
        }
        if (second) {
            std::vector<Mat> Q = powers(S, activate(p.act, u), K);
            for (int k = 0; k < K; ++k) J.col(col2 + f * K + k) = c * Q[k].col(0);
        }
    }
    return J;
}

TwoLayerGnnParams gnn2_gradient(const Mat& S, const TwoLayerGnnParams& p, const Mat& X, const Mat& R) {
    p.check();
    check_shape(S, X.rows());
    if (R.rows() != X.rows() || R.cols() != X.cols()) throw DimensionError("gnn2_gradient: residual shape");
    const int F = p.F(), K = p.K();
    const double c = 1.0 / std::sqrt(static_cast<double>(F));
    std::vector<Mat> P = powers(S, X, K);
    std::vector<Mat> RK = powers(S, R, K);  // S symmetric: <S^k a, b> = <a, S^k b>
    TwoLayerGnnParams grad{Mat::Zero(F, K), Mat::Zero(F, K), p.act};
    for (int f = 0; f < F; ++f) {
        Mat u = apply_taps(P, p.g.row(f).transpose());
        Mat q = activate(p.act, u);
        for (int k = 0; k < K; ++k) grad.h(f, k) = c * (q.array() * RK[k].array()).sum();
        Mat back = activate_deriv(p.act, u).cwiseProduct(apply_taps(RK, p.h.row(f).transpose()));
        for (int k = 0; k < K; ++k) grad.g(f, k) = c * (back.array() * P[k].array()).sum();
    }
    return grad;
}

Vec flatten(const TwoLayerGnnParams& p) {
    const int F = p.F(), K = p.K();
    Vec v(2 * F * K);
    for (int f = 0; f < F; ++f)
        for (int k = 0; k < K; ++k) {
            v(f * K + k) = p.g(f, k);
            v(F * K + f * K + k) = p.h(f, k);
        }
    return v;
}

TwoLayerGnnParams unflatten(const Vec& v, int F, int K, Activation act) {
    if (v.size() != 2 * F * K) throw DimensionError("unflatten: length != 2 F K");
    TwoLayerGnnParams p{Mat(F, K), Mat(F, K), act};
    for (int f = 0; f < F; ++f)
        for (int k = 0; k < K; ++k) {
            p.g(f, k) = v(f * K + k);
            p.h(f, k) = v(F * K + f * K + k);
        }
    return p;
}

Vec mimo_forward(const Mat& S, const MimoGnnParams& p, const Vec& x) {
    p.check();
    check_shape(S, x.size());
    std::vector<Vec> q{x};
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const MimoLayer& L = p.layers[l];
        const int K = static_cast<int>(L.taps.size());
        std::vector<std::vector<Mat>> Pg;
        for (const Vec& qg : q) Pg.push_back(powers(S, qg, K));
        std::vector<Vec> next(L.F_out(), Vec::Zero(x.size()));
        const double c = 1.0 / std::sqrt(static_cast<double>(L.F_in()));
        for (int f = 0; f < L.F_out(); ++f) {
            for (int g = 0; g < L.F_in(); ++g)
                for (int k = 0; k < K; ++k) next[f] += L.taps[k](f, g) * Pg[g][k].col(0);
            next[f] *= c;
            if (l + 1 < p.layers.size()) next[f] = activate(p.act, Mat(next[f])).col(0);
        }
        q = std::move(next);
    }
    return q.front();
}

MimoGnnParams to_mimo(const TwoLayerGnnParams& p) {
    p.check();
    MimoGnnParams m;
    m.act = p.act;
    MimoLayer l1, l2;
    for (int k = 0; k < p.K(); ++k) {
        l1.taps.push_back(p.g.col(k));            // F x 1
        l2.taps.push_back(p.h.col(k).transpose());  // 1 x F
    }
    m.layers = {l1, l2};
    return m;
}

FilterParams init_filter(int K, const InitConfig& cfg) {
    if (cfg.kappa <= 0) throw PreconditionError("init: kappa must be positive");
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, cfg.kappa);
    FilterParams p{Vec(K)};
    for (int k = 0; k < K; ++k) p.h(k) = nd(rng);
    return p;
}

TwoLayerGnnParams init_gnn2(int F, int K, Activation act, const InitConfig& cfg) {
    if (cfg.kappa <= 0) throw PreconditionError("init: kappa must be positive");
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, cfg.kappa);
    Vec v(2 * F * K);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = nd(rng);
    return unflatten(v, F, K, act);
}

MimoGnnParams init_mimo(const std::vector<int>& widths, int K, Activation act, const InitConfig& cfg) {
    if (cfg.kappa <= 0) throw PreconditionError("init: kappa must be positive");
    if (widths.size() < 2) throw DimensionError("init_mimo: need at least two widths");
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, cfg.kappa);
    MimoGnnParams p;
    p.act = act;
    for (std::size_t l = 1; l < widths.size(); ++l) {
        MimoLayer L;
        for (int k = 0; k < K; ++k) L.taps.push_back(Mat(widths[l], widths[l - 1]));
        for (int f = 0; f < widths[l]; ++f)
            for (int g = 0; g < widths[l - 1]; ++g)
                for (int k = 0; k < K; ++k) L.taps[k](f, g) = nd(rng);
        p.layers.push_back(std::move(L));
    }
    p.check();
    return p;
}

std::string shape_header_json(const TwoLayerGnnParams& p) {
    nlohmann::json j;
    j["model"] = "gnn2";
    j["F"] = p.F();
    j["K"] = p.K();
    j["activation"] = to_string(p.act);
    j["order"] = "layer,f,k";
    j["size"] = p.size();
    return j.dump();
}

}  // namespace gntk::models
