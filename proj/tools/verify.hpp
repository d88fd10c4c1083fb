#pragma once

#include "gntk/core.hpp"
#include "gntk/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace gntk::verify {

/// Outcome of one property sweep.
struct Check {
    explicit Check(std::string n = {}) : name(std::move(n)) {}

    std::string name;
    int instances = 0;
    int violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity();  // relative, >= -slack when passing
    std::vector<std::uint64_t> failing_seeds;                     // first few, for reproduction
    nlohmann::json detail = nlohmann::json::object();
    int required = -1;  // minimum passing instances; -1 means all

    int passed() const { return instances - violations; }
    bool pass() const { return instances > 0 && (required < 0 ? violations == 0 : passed() >= required); }
    void record(std::uint64_t seed, double margin, bool ok);
};

nlohmann::json to_json(const Check& c);

/// Random normalized instance: S symmetric with unit Frobenius norm, columns of X and Y with
/// largest norm 1. Sizes drawn from [2, n_max], [1, M_max], [1, K_max].
struct Instance {
    Mat S;
    Dataset d;
    int K = 1;
};

Instance random_instance(std::uint64_t seed, int n_max = 8, int M_max = 6, int K_max = 4);
Instance random_instance_fixed(std::uint64_t seed, int n, int M, int K);

// ---- inequality sweeps (count instances from base_seed, base_seed + 1, ...) ----

Check sweep_filter_bound(int count, std::uint64_t base_seed, double slack = 1e-9);
Check sweep_lin_bound(int count, std::uint64_t base_seed, double slack = 1e-9);
Check sweep_budget(int count, std::uint64_t base_seed, double slack = 1e-9);
Check sweep_leading_term(int count, std::uint64_t base_seed, double slack = 1e-9);
Check sweep_series_tail(int count, std::uint64_t base_seed, double slack = 1e-9);
Check sweep_optimal_gso(int count, std::uint64_t base_seed, double slack = 1e-9);
Check sweep_training_sandwich(int count, std::uint64_t base_seed, int epochs = 200);
Check sweep_movement(int count, std::uint64_t base_seed, double rel_tol = 0.05);
Check sweep_gen_sandwich(int count, std::uint64_t base_seed, double tol = 1e-9);

// ---- NTK checks ----

Check ntk_filter_oracle(int count, std::uint64_t base_seed, double tol = 1e-10);

/// MC NTK at F_hi within tol of the quadrature NTK; wins counted where err(F_hi) < err(F_lo).
Check mc_convergence(int seeds, std::uint64_t base_seed, int F_lo = 256, int F_hi = 4096, double tol = 0.05,
                     int threads = 1);

/// Drift at F_hi below drift at F_lo; violations count losing seeds.
Check drift_trend(int seeds, std::uint64_t base_seed, int F_lo = 128, int F_hi = 2048, int threads = 1);

// ---- Hermite routines ----

nlohmann::json hermite_constants(int K_first = 3);

/// Sign constancy of g_l, tau_l (l <= L) and monotone ratios (i <= L/2) on [lo, hi].
Check hermite_routines(int L = 21, double lo = 0.1, double hi = 10.0, int points = 200);

// ---- shift-operator comparison on planted data ----

struct CompareSetup {
    int n = 20;
    int len = 400;
    int M_train = 200;
    int M_test = 20;
    int dt = 1;
    int K = 2;
    int width = 50;
    int epochs = 100;
    double anisotropy = 0.1;  // a in A = a u u^T + b R
    double mix = 0.8;         // b
    double noise = 1.0;
    double eta_filter = 0.625;
    double eta_gnn = 0.0125;
    double kappa_filter = 1e-3;
    double kappa_gnn = 0.01;
    training::Optimizer opt_filter = training::Optimizer::gd;
    training::Optimizer opt_gnn = training::Optimizer::adam;
};

/// Train/test split of a planted VAR series for one seed.
struct PlantedSplit {
    Mat series;
    Mat A;
    Dataset train;
    Dataset test;
};

PlantedSplit planted_split(const CompareSetup& s, std::uint64_t seed);

/// C_XY (symmetrized, unit Frobenius) and C_XX (unit Frobenius) from the training pairs.
std::vector<training::NamedGso> cxy_cxx(const Dataset& train);

training::TrainConfig compare_config(const CompareSetup& s, training::ModelKind model, std::uint64_t seed);

/// A seed counts as a win when the C_XY arm has lower training loss at every epoch 1..T and
/// lower final test loss. Violations count the remaining seeds.
Check compare_trend(training::ModelKind model, const CompareSetup& s, int seeds, std::uint64_t base_seed,
                    int threads = 1);

}  // namespace gntk::verify
