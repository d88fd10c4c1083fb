#pragma once

#include "gntk/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gntk::models {

enum class Activation { tanh, identity, sigmoid, relu, leaky_relu };

constexpr double kLeakySlope = 0.01;

double activate(Activation a, double v);
double activate_deriv(Activation a, double v);  // relu'(0) = 0
Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct FilterParams {
    Vec h;  // taps h_0 .. h_{K-1}
    int K() const { return static_cast<int>(h.size()); }
};

/// Two-layer GNN: g holds first-layer taps, h second-layer taps, both F x K.
struct TwoLayerGnnParams {
    Mat g;
    Mat h;
    Activation act = Activation::tanh;

    int F() const { return static_cast<int>(g.rows()); }
    int K() const { return static_cast<int>(g.cols()); }
    int size() const { return static_cast<int>(g.size() + h.size()); }
    void check() const;
};

/// One layer of a multi-feature GNN: taps[k] is F_out x F_in.
struct MimoLayer {
    std::vector<Mat> taps;
    int F_in() const { return static_cast<int>(taps.front().cols()); }
    int F_out() const { return static_cast<int>(taps.front().rows()); }
};

struct MimoGnnParams {
    std::vector<MimoLayer> layers;
    Activation act = Activation::tanh;
    void check() const;
};

struct InitConfig {
    double kappa = 1.0;
    std::uint64_t seed = 0;
};

enum class Layer { first, second, both };

// ---- graph filter ----

Vec filter_forward(const Mat& S, const Vec& h, const Vec& x);
Mat filter_forward_batch(const Mat& S, const Vec& h, const Mat& X);
/// Column k is S^k x.
Mat filter_jacobian(const Mat& S, const Vec& x, int K);

// ---- two-layer GNN ----

Vec gnn2_forward(const Mat& S, const TwoLayerGnnParams& p, const Vec& x);
Mat gnn2_forward_batch(const Mat& S, const TwoLayerGnnParams& p, const Mat& X);

/// n x P Jacobian; columns follow (layer, f, k) order.
Mat gnn2_jacobian(const Mat& S, const TwoLayerGnnParams& p, const Vec& x, Layer which = Layer::both);

/// Gradient of 0.5 * ||f(X) - Y||^2 summed over samples, given residual R = f(X) - Y.
/// Returned as params with the gradient in g and h.
TwoLayerGnnParams gnn2_gradient(const Mat& S, const TwoLayerGnnParams& p, const Mat& X, const Mat& R);

Vec flatten(const TwoLayerGnnParams& p);
TwoLayerGnnParams unflatten(const Vec& v, int F, int K, Activation act);

// ---- multi-layer GNN ----

/// Fan-in scaled: layer output is sum_g sum_k taps[k](f, g) S^k q_g / sqrt(F_in).
Vec mimo_forward(const Mat& S, const MimoGnnParams& p, const Vec& x);
MimoGnnParams to_mimo(const TwoLayerGnnParams& p);

// ---- initialization ----

FilterParams init_filter(int K, const InitConfig& cfg);
TwoLayerGnnParams init_gnn2(int F, int K, Activation act, const InitConfig& cfg);
/// widths = {F_0 = 1, F_1, ..., F_L = 1}.
MimoGnnParams init_mimo(const std::vector<int>& widths, int K, Activation act, const InitConfig& cfg);

/// Shape header for flat parameter files.
std::string shape_header_json(const TwoLayerGnnParams& p);

}  // namespace gntk::models
