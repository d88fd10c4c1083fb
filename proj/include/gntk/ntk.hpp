#pragma once

#include "gntk/core.hpp"
#include "gntk/models.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gntk::ntk {

using models::Activation;
using models::Layer;

/// nM x K matrix; row a is z_a = [x_a, (Sx)_a, ..., (S^{K-1}x)_a].
Mat z_vectors(const Mat& S, const Mat& X, int K);

/// Sum_k S~^k x~ x~^T S~^k.
NtkMatrix filter_ntk(const Mat& S, const Mat& X, int K);
Mat b_lin(const Mat& S, const Mat& X, int K);

/// Jacobian-product NTK of the graph filter (independent of h).
NtkMatrix empirical_ntk_filter(const Mat& S, const Mat& X, int K);

/// Jacobian-product NTK of a finite two-layer GNN.
NtkMatrix empirical_ntk_gnn(const Mat& S, const models::TwoLayerGnnParams& p, const Mat& X,
                            Layer which = Layer::both);

/// Stacked Jacobian (nM x P) of a finite two-layer GNN.
Mat stacked_jacobian(const Mat& S, const models::TwoLayerGnnParams& p, const Mat& X, Layer which);

enum class EMethod { quadrature, series, monte_carlo };

struct ExpectationMatrix {
    Mat E;
    std::optional<Mat> B;
    std::optional<Mat> dB;
    EMethod method = EMethod::quadrature;
    int param = 0;               // nodes, L, or F_mc
    double residual = 0.0;       // estimated truncation / quadrature error
    bool warning = false;
    std::vector<Eigen::Index> zero_rows;
};

/// E_ab = E[sigma(|z_a| u) sigma(|z_b| u')] with corr(u, u') = rho_ab, by tensor Gauss-Hermite.
/// Nodes start at Nq and double until a probe entry agrees within 1e-9.
ExpectationMatrix expectation_E_quadrature(const Mat& Z, Activation act = Activation::tanh, int Nq = 64,
                                           int threads = 1);

/// Hermite-series form E = B + dB truncated at odd degree L (tanh or identity).
ExpectationMatrix expectation_E_series(const Mat& Z, int L = 21, Activation act = Activation::tanh);

/// E1_ab = E[sigma'(|z_a| u) sigma'(|z_b| u')] <z_a, z_b>.
Mat expectation_E_first_layer(const Mat& Z, Activation act = Activation::tanh, int Nq = 64, int threads = 1);

/// First-layer series pieces: B1_ab = tau_0(a) tau_0(b) <z_a,z_b>, dB1 the remaining even terms.
struct FirstLayerSeries {
    Mat B1;
    Mat dB1;
};
FirstLayerSeries first_layer_series(const Mat& Z, int L = 40);

/// Sum_{k<K} S~^k A S~^k for an nM x nM matrix A.
Mat block_sandwich(const Mat& S, const Mat& A, int K);

NtkMatrix gnn_infinite_ntk_second_layer(const Mat& S, const ExpectationMatrix& E, int K);
NtkMatrix gnn_infinite_ntk_first_layer(const Mat& S, const Mat& E1, int K);

/// Width-F_mc estimate with g_f ~ N(0, I_K) (and h_f ~ N(0, I_K) for the first layer).
NtkMatrix gnn_monte_carlo_ntk(const Mat& S, const Mat& X, int K, int F_mc, std::uint64_t seed,
                              Layer which = Layer::second, Activation act = Activation::tanh);

enum class ModelKind { filter, gnn2 };

struct DriftConfig {
    double eta = 0.05;
    int epochs = 50;
    int sample_every = 5;
    double kappa = 1.0;
    std::uint64_t seed = 0;
    Activation act = Activation::tanh;
    bool mean_loss = true;
};

struct DriftCurve {
    std::vector<int> widths;
    std::vector<double> drift;   // max_t ||Theta_t - Theta_0||_F / ||Theta_0||_F
    std::vector<bool> diverged;
};

DriftCurve ntk_drift(ModelKind model, const Mat& S, const Dataset& d, int K, const DriftConfig& cfg,
                     const std::vector<int>& widths);

}  // namespace gntk::ntk
