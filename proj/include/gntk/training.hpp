#pragma once

#include "gntk/core.hpp"
#include "gntk/models.hpp"
#include "gntk/ntk.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gntk::training {

using ntk::ModelKind;

enum class Optimizer { gd, adam };

Optimizer parse_optimizer(const std::string& s);
std::string to_string(Optimizer o);

struct TrainConfig {
    double eta = 0.01;
    int epochs = 100;
    int batch_size = 0;  // 0 = full batch
    Optimizer optimizer = Optimizer::gd;
    double kappa = 1.0;
    std::uint64_t seed = 0;
    double eps_budget = 1e-3;
    double delta_budget = 0.1;
    double c_slack = 10.0;
    bool mean_loss = false;  // objective 0.5/M sum ||.||^2 instead of 0.5 sum ||.||^2
    double grad_tol = 0.0;   // stop early once ||grad|| <= grad_tol (0 = never)
    int width = 50;          // F for the two-layer GNN
    models::Activation act = models::Activation::tanh;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct TrainTrace {
    std::vector<double> train_loss;      // epoch 0 included
    std::vector<double> test_loss;       // empty without a test set
    std::vector<double> param_movement;  // ||theta_t - theta_0||
    Vec params0;
    Vec params;
    int epochs_run = 0;
};

struct Divergence : std::runtime_error {
    int epoch;
    explicit Divergence(int e);
};

/// Loss 0.5 sum_i ||f(x_i) - y_i||^2 (divided by M when mean).
double loss(const Mat& F, const Mat& Y, bool mean);

/// Full-batch GD, minibatch GD or Adam. Throws Divergence once the loss passes 1e6 x initial.
TrainTrace train(ModelKind model, const Mat& S, const Dataset& train, const Dataset* test, int K,
                 const TrainConfig& cfg);

/// Flat gradient of the training objective at the given flat parameters.
Vec objective_gradient(ModelKind model, const Mat& S, const Dataset& d, int K, const TrainConfig& cfg,
                       const Vec& params);
double objective_value(ModelKind model, const Mat& S, const Dataset& d, int K, const TrainConfig& cfg,
                       const Vec& params);

struct LinearizedTrace {
    std::vector<double> residual_norm;  // ||(I - eta Theta)^t (f0 - y)||, t = 0..T
    bool nonconvergent = false;         // eta lambda_max > 1
};

LinearizedTrace linearized_dynamics(const Mat& theta, const Vec& y, const Vec& f0, double eta, int T);

struct BoundCheck {
    std::vector<double> lower;
    std::vector<double> observed;
    std::vector<double> upper;
    std::vector<bool> vacuous;  // lower bound below zero
    std::vector<int> violations;
    double slack = 0.0;
    double kappa = 0.0;
    double eta = 0.0;
    double lambda_max = 0.0;
};

/// Graph-filter training error against y^T(I - 2 t eta Theta)y and y^T(I - eta Theta)y, t = 1..epochs.
/// kappa = eps sqrt(delta/nM), slack = c_slack eps.
BoundCheck check_theorem_t0(const Mat& S, const Dataset& d, int K, const TrainConfig& cfg);

/// Eigenvalues below 1e-10 lambda_max are treated as zero.
constexpr double kPinvCutoff = 1e-10;

/// y^T Theta^+ y.
double pinv_quadratic(const Mat& theta, const Vec& y);

/// sqrt(y^T Theta^+ y).
double predicted_param_movement(const Mat& theta, const Vec& y);

struct GenSandwich {
    double alignment = 0.0;
    double projected = 0.0;  // ||P y||^2, P the projector onto range(Theta)
    double lambda_max = 0.0;
    double lambda_min_pos = 0.0;
    double lower = 0.0;   // projected^2 / A
    double middle = 0.0;  // y^T Theta^+ y
    double upper = 0.0;   // (lambda_max / lambda_min_pos) projected^2 / A
    double literal_lower = 0.0;  // y^T y / A
    double literal_upper = 0.0;  // (lambda_max / lambda_min_pos) y^T y / A
    bool holds = false;
    bool literal_holds = false;
};

GenSandwich gen_sandwich(const Mat& theta, const Vec& y, double tol = 1e-9);

/// B rho sqrt(2 K max_{k,i} ||S^k x_i||^2 / M).
double rademacher_bound_value(const Mat& S, const Dataset& d, int K, double B, double rho);

struct GeneralizationBound {
    double value = 0.0;
    double complexity_term = 0.0;
    double concentration_term = 0.0;
    double rho = 0.0;
    double movement = 0.0;
    double max_shift_sq = 0.0;
    GenSandwich sandwich;
};

/// Right-hand side of the graph-filter generalization bound. rho <= 0 measures the largest
/// train residual of the minimum-norm fit; movement <= 0 uses sqrt(y^T Theta^+ y).
GeneralizationBound generalization_bound(const Mat& S, const Dataset& d, int K, const TrainConfig& cfg,
                                         double rho = 0.0, double movement = 0.0);

struct NamedGso {
    std::string name;
    Mat S;
};

struct ArmResult {
    std::string name;
    std::vector<std::vector<double>> train_loss;  // [rep][epoch]
    std::vector<std::vector<double>> test_loss;
    std::vector<double> mean_train_loss;  // [epoch]
    std::vector<double> mean_test_loss;
    std::vector<bool> diverged;
};

struct CompareReport {
    ModelKind model = ModelKind::filter;
    int reps = 0;
    std::vector<ArmResult> arms;
    /// final_test_gap[r] = test loss of arm 1 minus arm 0 at the last epoch.
    std::vector<double> final_test_gap;
    std::vector<double> final_train_gap;
};

/// Trains every arm with the same seeds (seed + r for repetition r).
CompareReport compare_gso(ModelKind model, const Dataset& train, const Dataset& test, int K, const TrainConfig& cfg,
                          const std::vector<NamedGso>& gsos, int reps, int threads = 1);

}  // namespace gntk::training
