#include "verify.hpp"

#include "gntk/alignment.hpp"
#include "gntk/dataio.hpp"
#include "gntk/hermite.hpp"
#include "gntk/models.hpp"
#include "gntk/ntk.hpp"
#include "gntk/shiftops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gntk::verify {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxSeeds = 10;

Mat gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat A(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) A(i, j) = nd(rng);
    return A;
}

Mat unit_symmetric(std::mt19937_64& rng, Eigen::Index n) {
    Mat A = gaussian(rng, n, n);
    Mat S = A + A.transpose();
    return S / S.norm();
}

Mat unit_columns(std::mt19937_64& rng, Eigen::Index n, Eigen::Index M) {
    Mat X = gaussian(rng, n, M);
    return X / X.colwise().norm().maxCoeff();
}

double lambda_max(const Mat& A) {
    Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double rel_margin(double lhs, double rhs) { return (lhs - rhs) / std::max(1.0, std::abs(rhs)); }

}  // namespace

void Check::record(std::uint64_t seed, double margin, bool ok) {
    ++instances;
    worst_margin = std::min(worst_margin, margin);
    if (!ok) {
        ++violations;
        if (failing_seeds.size() < kMaxSeeds) failing_seeds.push_back(seed);
    }
}

json to_json(const Check& c) {
    json j;
    j["name"] = c.name;
    j["instances"] = c.instances;
    j["violations"] = c.violations;
    j["passed"] = c.passed();
    if (c.required >= 0) j["required"] = c.required;
    j["pass"] = c.pass();
    j["worst_margin"] = std::isfinite(c.worst_margin) ? json(c.worst_margin) : json(nullptr);
    j["failing_seeds"] = c.failing_seeds;
    j["detail"] = c.detail;
    return j;
}

Instance random_instance_fixed(std::uint64_t seed, int n, int M, int K) {
    std::mt19937_64 rng(seed);
    Instance in;
    in.K = K;
    in.S = unit_symmetric(rng, n);
    in.d = Dataset(unit_columns(rng, n, M), unit_columns(rng, n, M), true);
    return in;
}

Instance random_instance(std::uint64_t seed, int n_max, int M_max, int K_max) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    int n = std::uniform_int_distribution<int>(2, n_max)(rng);
    int M = std::uniform_int_distribution<int>(1, M_max)(rng);
    int K = std::uniform_int_distribution<int>(1, K_max)(rng);
    return random_instance_fixed(seed, n, M, K);
}

Check sweep_filter_bound(int count, std::uint64_t base_seed, double slack) {
    Check c{"filt_ge_trace_bound"};
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance(s);
        double a = alignment::alignment_filt(in.S, in.d, in.K);
        double l = alignment::alignment_lower_bound(in.S, in.d, in.K).value;
        c.record(s, rel_margin(a, l), a >= l - slack * std::max(1.0, l));
    }
    return c;
}

Check sweep_lin_bound(int count, std::uint64_t base_seed, double slack) {
    Check c{"lin_ge_trace_bound"};
    int scaled_violations = 0;
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance(s);
        double a = alignment::alignment_lin(in.S, in.d, in.K);
        double l = alignment::alignment_lin_lower_bound(in.S, in.d, in.K);
        double ls = alignment::alignment_lin_lower_bound_scaled(in.S, in.d, in.K);
        scaled_violations += a < ls - slack * std::max(1.0, ls);
        c.record(s, rel_margin(a, l), a >= l - slack * std::max(1.0, l));
    }
    c.detail["scaled_form_violations"] = scaled_violations;
    return c;
}

Check sweep_budget(int count, std::uint64_t base_seed, double slack) {
    // Boundary alpha = eta M ||sum_k S^k||_F^2; the implication asks eta ||Theta||_op <= alpha.
    Check c{"budget_implication"};
    const double eta = 0.05;
    int psd_violations = 0, psd_count = 0;
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance(s);
        double lhs = shiftops::constraint_lhs(in.S, in.K);
        double alpha = eta * in.d.M() * lhs * lhs;
        double op = eta * lambda_max(ntk::filter_ntk(in.S, in.d.X, in.K).theta);
        c.record(s, rel_margin(alpha, op), op <= alpha + slack * std::max(1.0, alpha));
        Eigen::SelfAdjointEigenSolver<Mat> es(in.S, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() >= 0.0) {
            ++psd_count;
            psd_violations += op > alpha + slack * std::max(1.0, alpha);
        }
    }
    c.detail["psd_instances"] = psd_count;
    c.detail["psd_violations"] = psd_violations;
    return c;
}

Check sweep_leading_term(int count, std::uint64_t base_seed, double slack) {
    Check c{"leading_term_bound"};
    int step_violations = 0;
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance(s, 6, 4, 3);
        alignment::Lemma4Report r = alignment::check_lemma4(in.S, in.d, in.K, 1.0, slack);
        step_violations += !r.proof_step_pass;
        c.record(s, rel_margin(r.lhs, r.rhs), r.pass);
    }
    c.detail["proof_step_violations"] = step_violations;
    return c;
}

Check sweep_series_tail(int count, std::uint64_t base_seed, double slack) {
    Check c{"series_tail_bound"};
    std::size_t entries = 0;
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance(s, 6, 4, 3);
        Mat Z = ntk::z_vectors(in.S, in.d.X, in.K);
        alignment::Lemma5Report r = alignment::check_lemma5(Z, hermite::kDefaultSeriesL, slack);
        entries += r.entries;
        c.record(s, r.worst_margin, r.pass());
    }
    c.detail["entries"] = entries;
    return c;
}

Check sweep_optimal_gso(int count, std::uint64_t base_seed, double slack) {
    // Boundary ||I + S||_F = b; P = I + S drawn around C (half the instances) or uniformly.
    Check c{"optimal_gso_K2"};
    const double alpha = 2.0, eta = 0.01;
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance(s, 8, 6, 1);
        std::mt19937_64 rng(s + 0x51ed27);
        shiftops::GsoSolveConfig cfg;
        cfg.K = 2;
        cfg.alpha = alpha;
        cfg.eta = eta;
        cfg.M = in.d.M();
        double b = shiftops::budget(cfg);
        shiftops::CrossCovariance C = shiftops::cross_covariance(in.d, shiftops::CxyMode::symmetrized, false);
        double best = alignment::alignment_lower_bound(shiftops::solve_optimal_gso(C, cfg).S, in.d, 2).value;
        Mat G = unit_symmetric(rng, in.d.n());
        double spread = i % 2 ? 1.0 : std::pow(10.0, -1.0 - (i / 2) % 6);
        Mat P = C.C / C.C.norm() + spread * G;
        P *= b / P.norm();
        Mat S = P - Mat::Identity(in.d.n(), in.d.n());
        double v = alignment::alignment_lower_bound(S, in.d, 2).value;
        c.record(s, rel_margin(best, v), v <= best + slack * std::max(1.0, best));
    }
    return c;
}

Check sweep_training_sandwich(int count, std::uint64_t base_seed, int epochs) {
    Check c{"training_error_sandwich"};
    int vacuous = 0, checked = 0;
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance(s);
        training::TrainConfig cfg;
        cfg.eta = 1.0 / lambda_max(ntk::filter_ntk(in.S, in.d.X, in.K).theta);
        cfg.epochs = epochs;
        cfg.seed = s;
        training::BoundCheck b = training::check_theorem_t0(in.S, in.d, in.K, cfg);
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < b.observed.size(); ++t) {
            m = std::min({m, b.observed[t] - b.lower[t] + b.slack, b.upper[t] + b.slack - b.observed[t]});
            vacuous += b.vacuous[t];
            ++checked;
        }
        c.record(s, m, b.violations.empty());
    }
    c.detail["epochs"] = epochs;
    c.detail["vacuous_lower_fraction"] = checked ? static_cast<double>(vacuous) / checked : 0.0;
    return c;
}

Check sweep_movement(int count, std::uint64_t base_seed, double rel_tol) {
    Check c{"parameter_movement"};
    json rows = json::array();
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance_fixed(s, 4, 3, 2);
        Mat theta = ntk::filter_ntk(in.S, in.d.X, in.K).theta;
        training::TrainConfig cfg;
        cfg.eta = 1.0 / lambda_max(theta);
        cfg.epochs = 200000;
        cfg.kappa = 1e-6;
        cfg.grad_tol = 1e-12;
        cfg.seed = s;
        training::TrainTrace t = training::train(training::ModelKind::filter, in.S, in.d, nullptr, in.K, cfg);
        double pred = training::predicted_param_movement(theta, stack_columns(in.d.Y));
        double moved = t.param_movement.back();
        double slack = 10.0 * cfg.kappa * std::sqrt(static_cast<double>(in.K));
        double err = std::abs(moved - pred);
        c.record(s, rel_tol * pred + slack - err, err <= rel_tol * pred + slack);
        rows.push_back({{"seed", s}, {"moved", moved}, {"predicted", pred}, {"epochs", t.epochs_run}});
    }
    c.detail["runs"] = rows;
    return c;
}

Check sweep_gen_sandwich(int count, std::uint64_t base_seed, double tol) {
    // Every NTK flavour the library computes for the instance.
    Check c{"gen_sandwich"};
    int literal_fail = 0, total = 0;
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance(s, 6, 4, 3);
        Vec y = stack_columns(in.d.Y);
        Mat Z = ntk::z_vectors(in.S, in.d.X, in.K);
        models::TwoLayerGnnParams p = models::init_gnn2(8, in.K, models::Activation::tanh, {1.0, s});
        std::vector<Mat> thetas = {
            ntk::filter_ntk(in.S, in.d.X, in.K).theta,
            ntk::empirical_ntk_gnn(in.S, p, in.d.X).theta,
            ntk::gnn_infinite_ntk_second_layer(in.S, ntk::expectation_E_quadrature(Z), in.K).theta,
            ntk::gnn_infinite_ntk_first_layer(in.S, ntk::expectation_E_first_layer(Z), in.K).theta,
            ntk::gnn_monte_carlo_ntk(in.S, in.d.X, in.K, 64, s).theta,
        };
        bool ok = true;
        double m = std::numeric_limits<double>::infinity();
        for (const Mat& th : thetas) {
            training::GenSandwich g = training::gen_sandwich(th, y, tol);
            ok = ok && g.holds;
            literal_fail += !g.literal_holds;
            ++total;
            m = std::min({m, (g.middle - g.lower) / std::max(1e-300, g.middle),
                          (g.upper - g.middle) / std::max(1e-300, g.middle)});
        }
        c.record(s, m, ok);
    }
    c.detail["ntks_checked"] = total;
    c.detail["literal_form_failures"] = literal_fail;
    return c;
}

Check ntk_filter_oracle(int count, std::uint64_t base_seed, double tol) {
    Check c{"ntk_filter_empirical_vs_analytic"};
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance(s, 8, 6, 4);
        double e = rel_frobenius(ntk::empirical_ntk_filter(in.S, in.d.X, in.K).theta,
                                 ntk::filter_ntk(in.S, in.d.X, in.K).theta);
        worst = std::max(worst, e);
        c.record(s, tol - e, e <= tol);
    }
    c.detail["worst_rel_frobenius"] = worst;
    return c;
}

Check mc_convergence(int seeds, std::uint64_t base_seed, int F_lo, int F_hi, double tol, int threads) {
    Check c{"mc_ntk_convergence"};
    int within = 0;
    json rows = json::array();
    for (int i = 0; i < seeds; ++i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance_fixed(s, 5, 10, 2);
        Mat Z = ntk::z_vectors(in.S, in.d.X, in.K);
        Mat ref = ntk::gnn_infinite_ntk_second_layer(in.S, ntk::expectation_E_quadrature(Z, models::Activation::tanh,
                                                                                        64, threads), in.K).theta;
        double lo = rel_frobenius(ntk::gnn_monte_carlo_ntk(in.S, in.d.X, in.K, F_lo, s).theta, ref);
        double hi = rel_frobenius(ntk::gnn_monte_carlo_ntk(in.S, in.d.X, in.K, F_hi, s).theta, ref);
        within += hi <= tol;
        c.record(s, lo - hi, hi < lo);
        rows.push_back({{"seed", s}, {"err_lo", lo}, {"err_hi", hi}});
    }
    c.detail["F_lo"] = F_lo;
    c.detail["F_hi"] = F_hi;
    c.detail["within_tol"] = within;
    c.detail["tol"] = tol;
    c.detail["runs"] = rows;
    return c;
}

Check drift_trend(int seeds, std::uint64_t base_seed, int F_lo, int F_hi, int threads) {
    Check c{"ntk_drift_trend"};
    std::vector<ntk::DriftCurve> curves(seeds);
    parallel_for(seeds, threads, [&](std::size_t i) {
        std::uint64_t s = base_seed + i;
        Instance in = random_instance_fixed(s, 5, 10, 2);
        ntk::DriftConfig cfg;
        cfg.seed = s;
        curves[i] = ntk::ntk_drift(ntk::ModelKind::gnn2, in.S, in.d, in.K, cfg, {F_lo, F_hi});
    });
    json rows = json::array();
    for (int i = 0; i < seeds; ++i) {
        const auto& d = curves[i].drift;
        bool ok = d[1] < d[0] && !curves[i].diverged[0] && !curves[i].diverged[1];
        c.record(base_seed + i, d[0] - d[1], ok);
        rows.push_back({{"seed", base_seed + i}, {"drift_lo", d[0]}, {"drift_hi", d[1]}});
    }
    c.detail["F_lo"] = F_lo;
    c.detail["F_hi"] = F_hi;
    c.detail["runs"] = rows;
    return c;
}

json hermite_constants(int K_first) {
    hermite::BetaResult b = hermite::beta_constant();
    hermite::BetaFirstResult b1 = hermite::beta_first_layer(K_first);
    double sh = hermite::sigma_hat(0.0);
    json j;
    j["beta"] = b.value;
    j["beta_closed_form"] = M_PI / 2.0 - 1.0;
    j["beta_terms"] = b.terms;
    j["beta_partial"] = b.partial;
    j["beta_tail"] = b.tail;
    j["beta_residual"] = b.residual;
    j["beta_first_layer"] = {{"K", K_first}, {"value", b1.value}, {"parseval", b1.parseval},
                             {"max_degree", b1.max_degree}, {"residual", b1.residual}};
    j["sigma_hat_sup"] = sh;
    j["sigma_hat_sup_unnormalized"] = sh * std::sqrt(2.0 * M_PI);
    return j;
}

Check hermite_routines(int L, double lo, double hi, int points) {
    Check c{"hermite_sign_and_monotonicity"};
    // tau_l takes ||z||^2, so its grid is the squared y grid.
    std::vector<double> grid = hermite::linear_grid(lo, hi, points), grid_sq = grid;
    for (double& v : grid_sq) v *= v;
    auto grid_for = [&](hermite::CoeffKind k) -> const std::vector<double>& {
        return k == hermite::CoeffKind::derivative_sech2 ? grid_sq : grid;
    };
    json rows = json::array();
    std::uint64_t id = 0;
    for (int l = 0; l <= L; ++l) {
        for (auto kind : {hermite::CoeffKind::activation_tanh, hermite::CoeffKind::derivative_sech2}) {
            hermite::SignReport r = hermite::verify_sign_constancy(kind, l, grid_for(kind));
            c.record(id++, r.min_abs, r.constant);
            rows.push_back({{"routine", "sign"}, {"kind", hermite::to_string(kind)}, {"degree", l},
                            {"sign", r.sign}, {"constant", r.constant}});
        }
    }
    for (int i = 1; 2 * i <= L; ++i) {
        for (auto kind : {hermite::CoeffKind::activation_tanh, hermite::CoeffKind::derivative_sech2}) {
            hermite::MonotoneReport r = hermite::verify_ratio_monotonicity(kind, i, grid_for(kind));
            c.record(id++, r.worst_step, r.monotone);
            rows.push_back({{"routine", "monotone"}, {"kind", hermite::to_string(kind)}, {"index", i},
                            {"monotone", r.monotone}, {"worst_step", r.worst_step}});
        }
    }
    c.detail["grid"] = {lo, hi, points};
    c.detail["results"] = rows;
    return c;
}

PlantedSplit planted_split(const CompareSetup& s, std::uint64_t seed) {
    dataio::PlantedTransition p = dataio::planted_transition(s.n, s.anisotropy, s.mix, 1000 + seed);
    dataio::VarProcessConfig vc;
    vc.n = s.n;
    vc.T_len = s.len;
    vc.A = p.A;
    vc.noise_scale = s.noise;
    vc.seed = 2000 + seed;
    PlantedSplit out;
    out.series = dataio::generate_var(vc);
    out.A = p.A;
    dataio::PairSplit ps = dataio::extract_pairs(out.series, {s.dt, s.M_train, s.M_test, 3000 + seed});
    out.train = ps.train;
    out.test = ps.test;
    return out;
}

std::vector<training::NamedGso> cxy_cxx(const Dataset& train) {
    return {{"cxy", shiftops::as_shift(shiftops::cross_covariance(train)).matrix()},
            {"cxx", shiftops::covariance(train).matrix()}};
}

training::TrainConfig compare_config(const CompareSetup& s, training::ModelKind model, std::uint64_t seed) {
    training::TrainConfig cfg;
    bool f = model == training::ModelKind::filter;
    cfg.eta = f ? s.eta_filter : s.eta_gnn;
    cfg.kappa = f ? s.kappa_filter : s.kappa_gnn;
    cfg.optimizer = f ? s.opt_filter : s.opt_gnn;
    cfg.epochs = s.epochs;
    cfg.width = s.width;
    cfg.mean_loss = true;
    cfg.seed = seed;
    return cfg;
}

Check compare_trend(training::ModelKind model, const CompareSetup& s, int seeds, std::uint64_t base_seed,
                    int threads) {
    Check c{model == training::ModelKind::filter ? "compare_filter" : "compare_gnn"};
    std::vector<training::CompareReport> reps(seeds);
    parallel_for(seeds, threads, [&](std::size_t i) {
        std::uint64_t seed = base_seed + i;
        PlantedSplit sp = planted_split(s, seed);
        reps[i] = training::compare_gso(model, sp.train, sp.test, s.K, compare_config(s, model, seed),
                                        cxy_cxx(sp.train), 1);
    });
    json rows = json::array();
    for (int i = 0; i < seeds; ++i) {
        const auto& a = reps[i].arms[0];
        const auto& b = reps[i].arms[1];
        int lower = 0;
        for (int t = 1; t <= s.epochs; ++t) lower += a.train_loss[0][t] < b.train_loss[0][t];
        double ta = a.test_loss[0].back(), tb = b.test_loss[0].back();
        bool ok = lower == s.epochs && ta < tb;
        c.record(base_seed + i, tb - ta, ok);
        rows.push_back({{"seed", base_seed + i}, {"epochs_lower", lower}, {"train_cxy", a.train_loss[0].back()},
                        {"train_cxx", b.train_loss[0].back()}, {"test_cxy", ta}, {"test_cxx", tb}});
    }
    c.detail["runs"] = rows;
    return c;
}

}  // namespace gntk::verify
