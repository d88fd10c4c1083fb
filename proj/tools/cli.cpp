#include "cli.hpp"

#include "verify.hpp"

#include "gntk/alignment.hpp"
#include "gntk/dataio.hpp"
#include "gntk/hermite.hpp"
#include "gntk/models.hpp"
#include "gntk/ntk.hpp"
#include "gntk/shiftops.hpp"
#include "gntk/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#ifndef GNTK_VERSION
#define GNTK_VERSION "0.0.0"
#endif

namespace gntk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Input problem detected after parsing (missing file, bad shape).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

struct Common {
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 1;
    bool print_json = false;
};

struct Context {
    std::string subcommand;
    Common common;
    std::string config_snapshot;
    std::string config_file;
    std::string started;
    std::vector<std::string> outputs;
    json seeds = json::object();

    fs::path path(const std::string& name) const { return fs::path(common.out_dir) / name; }

    void write_csv(const std::string& name, const Mat& m, const std::vector<std::string>& header = {}) {
        fs::path p = path(name);
        fs::create_directories(p.parent_path());
        dataio::save_csv(m, p.string(), header);
        outputs.push_back(p.string());
    }

    void write_dataset(const std::string& dir, const Dataset& d) {
        write_csv(dir + "/X.csv", d.X);
        write_csv(dir + "/Y.csv", d.Y);
    }
};

json manifest(const Context& c) {
    json m;
    m["subcommand"] = c.subcommand;
    m["config"] = c.config_snapshot;
    m["config_file"] = c.config_file;
    m["seeds"] = c.seeds;
    m["seeds"]["base"] = c.common.seed;
    m["versions"] = {{"gntk", GNTK_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"cli11", CLI11_VERSION},
                     {"schema", kSchemaVersion}};
    m["timestamps"] = {{"start", c.started}, {"end", utc_now()}};
    m["outputs"] = c.outputs;
    return m;
}

void finish(Context& c, json result, int code) {
    fs::create_directories(c.common.out_dir);
    fs::path rp = c.path("report.json"), mp = c.path("manifest.json");
    c.outputs.push_back(rp.string());
    c.outputs.push_back(mp.string());
    json report;
    report["schema_version"] = kSchemaVersion;
    report["subcommand"] = c.subcommand;
    report["exit_code"] = code;
    report["result"] = std::move(result);
    json m = manifest(c);
    report["manifest"] = m;
    std::ofstream(rp) << report.dump(2) << "\n";
    std::ofstream(mp) << m.dump(2) << "\n";
    if (c.common.print_json) std::cout << report.dump(2) << "\n";
}

// ---- data helpers ----

struct Split {
    Dataset train;
    std::optional<Dataset> test;
};

Dataset load_dir(const fs::path& dir) {
    if (!fs::exists(dir / "X.csv") || !fs::exists(dir / "Y.csv"))
        throw InputError("missing X.csv or Y.csv in " + dir.string());
    return dataio::load_dataset(dir.string());
}

/// A directory holding X.csv/Y.csv, or train/ and optionally test/ subdirectories.
Split load_split(const std::string& dir) {
    fs::path p(dir);
    if (!fs::is_directory(p)) throw InputError("data directory not found: " + dir);
    Split s;
    if (fs::exists(p / "train")) {
        s.train = load_dir(p / "train");
        if (fs::exists(p / "test")) s.test = load_dir(p / "test");
    } else {
        s.train = load_dir(p);
    }
    if (s.test && s.test->n() != s.train.n()) throw InputError("train and test node counts differ");
    return s;
}

Mat resolve_gso(const std::string& name, const Dataset& train) {
    if (name == "cxy") return shiftops::as_shift(shiftops::cross_covariance(train)).matrix();
    if (name == "cxx") return shiftops::covariance(train).matrix();
    if (name == "cxy-raw") return shiftops::cross_covariance(train, shiftops::CxyMode::raw).C;
    if (name == "identity") return Mat::Identity(train.n(), train.n()) / std::sqrt(static_cast<double>(train.n()));
    if (!fs::exists(name)) throw InputError("unknown shift operator (cxy, cxx, cxy-raw, identity or a CSV path): " + name);
    Mat S = dataio::load_csv(name).data;
    if (S.rows() != train.n() || S.cols() != train.n())
        throw InputError("shift operator " + name + " is " + std::to_string(S.rows()) + "x" +
                         std::to_string(S.cols()) + ", data has " + std::to_string(train.n()) + " nodes");
    return S;
}

void require_symmetric(const Mat& S, const std::string& what) {
    if (max_asymmetry(S) > 1e-10) throw InputError(what + " needs a symmetric shift operator");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

Vec eig_desc(const Mat& A) {
    Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
}

Mat trace_matrix(const training::TrainTrace& t) {
    Eigen::Index T = static_cast<Eigen::Index>(t.train_loss.size());
    Mat m(T, 4);
    for (Eigen::Index e = 0; e < T; ++e) {
        m(e, 0) = static_cast<double>(e);
        m(e, 1) = t.train_loss[e];
        m(e, 2) = t.test_loss.empty() ? std::nan("") : t.test_loss[e];
        m(e, 3) = t.param_movement[e];
    }
    return m;
}

const std::vector<std::string> kTraceHeader = {"epoch", "train_loss", "test_loss", "param_movement"};

training::ModelKind parse_model(const std::string& m) {
    return m == "filter" ? training::ModelKind::filter : training::ModelKind::gnn2;
}

std::string model_name(training::ModelKind m) { return m == training::ModelKind::filter ? "filter" : "gnn"; }

// ---- subcommands ----

struct GenDataOpts {
    verify::CompareSetup setup;
};

int cmd_gen_data(Context& c, const GenDataOpts& o) {
    verify::PlantedSplit sp = verify::planted_split(o.setup, c.common.seed);
    c.write_csv("series.csv", sp.series);
    c.write_csv("transition.csv", sp.A);
    c.write_dataset("train", sp.train);
    c.write_dataset("test", sp.test);
    c.seeds["transition"] = 1000 + c.common.seed;
    c.seeds["noise"] = 2000 + c.common.seed;
    c.seeds["pairs"] = 3000 + c.common.seed;
    json r;
    r["n"] = o.setup.n;
    r["len"] = o.setup.len;
    r["dt"] = o.setup.dt;
    r["M_train"] = sp.train.M();
    r["M_test"] = sp.test.M();
    r["spectral_radius"] = dataio::spectral_radius(sp.A);
    r["anisotropy"] = o.setup.anisotropy;
    r["mix"] = o.setup.mix;
    finish(c, r, ok);
    return ok;
}

struct NtkOpts {
    std::string data;
    std::string gso = "cxy";
    int K = 2;
    std::string model = "filter";
    int width = 50;
    std::string act = "tanh";
    bool save_theta = false;
};

int cmd_ntk(Context& c, const NtkOpts& o) {
    Split sp = load_split(o.data);
    const Dataset& d = sp.train;
    Mat S = resolve_gso(o.gso, d);
    require_symmetric(S, "ntk");
    models::Activation act = models::parse_activation(o.act);
    NtkMatrix th;
    if (o.model == "filter") {
        th = ntk::filter_ntk(S, d.X, o.K);
    } else if (o.model == "gnn-empirical") {
        th = ntk::empirical_ntk_gnn(S, models::init_gnn2(o.width, o.K, act, {1.0, c.common.seed}), d.X);
    } else if (o.model == "gnn-mc") {
        th = ntk::gnn_monte_carlo_ntk(S, d.X, o.K, o.width, c.common.seed, models::Layer::second, act);
    } else {
        Mat Z = ntk::z_vectors(S, d.X, o.K);
        if (o.model == "gnn-first")
            th = ntk::gnn_infinite_ntk_first_layer(S, ntk::expectation_E_first_layer(Z, act, 64, c.common.threads), o.K);
        else
            th = ntk::gnn_infinite_ntk_second_layer(S, ntk::expectation_E_quadrature(Z, act, 64, c.common.threads), o.K);
    }
    Vec ev = eig_desc(th.theta);
    double lmax = ev.size() ? ev(0) : 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) rank += ev(i) > training::kPinvCutoff * lmax;
    std::vector<double> head(ev.data(), ev.data() + std::min<Eigen::Index>(10, ev.size()));
    json r;
    r["model"] = o.model;
    r["provenance"] = to_string(th.provenance);
    r["size"] = th.theta.rows();
    r["K"] = o.K;
    r["frobenius"] = th.theta.norm();
    r["operator_norm"] = lmax;
    r["trace"] = th.theta.trace();
    r["eigenvalues_head"] = head;
    r["rank_estimate"] = rank;
    r["min_eig_ratio"] = th.min_eig_ratio();
    r["alignment"] = alignment::alignment(th, stack_columns(d.Y));
    if (o.save_theta) c.write_csv("theta.csv", th.theta);
    finish(c, r, ok);
    return ok;
}

struct AlignOpts {
    std::string data;
    std::string gso = "cxy";
    int K = 2;
    double nu = 1.0;
    double xi = 0.0;
    double alpha = 1.0;
    double eta = 1.0;
    std::string act = "tanh";
};

int cmd_align(Context& c, const AlignOpts& o) {
    Split sp = load_split(o.data);
    const Dataset& d = sp.train;
    Mat S = resolve_gso(o.gso, d);
    require_symmetric(S, "align");
    models::Activation act = models::parse_activation(o.act);
    shiftops::GsoSolveConfig g;
    g.K = o.K;
    g.alpha = o.alpha;
    g.eta = o.eta;
    g.M = d.M();
    alignment::AlignmentReport a = alignment::report(S, d, o.K, o.nu, g, act);
    json r;
    r["A"] = a.A;
    r["A_filt"] = a.A_filt;
    r["A_lin"] = a.A_lin;
    r["A_L"] = a.A_L;
    r["A_L_prime"] = a.A_Lp;
    r["constraint_lhs"] = a.constraint_lhs;
    r["budget"] = a.budget;
    r["xi_observed"] = a.xi_observed;
    r["constants"] = {{"rho", a.rho}, {"beta", a.beta}, {"c", a.c}, {"d", a.d}};

    int failed = 0;
    json checks = json::array();
    auto add = [&](const std::string& name, bool pass, double lhs, double rhs) {
        checks.push_back({{"name", name}, {"pass", pass}, {"lhs", lhs}, {"rhs", rhs}, {"margin", lhs - rhs}});
        failed += !pass;
    };
    add("filt_bound", a.A_filt >= a.A_L - 1e-9 * std::max(1.0, a.A_L), a.A_filt, a.A_L);
    add("lin_bound", a.A_lin >= a.A_Lp - 1e-9 * std::max(1.0, a.A_Lp), a.A_lin, a.A_Lp);
    alignment::Lemma4Report l4 = alignment::check_lemma4(S, d, o.K, o.nu);
    add("leading_term", l4.pass, l4.lhs, l4.rhs);
    alignment::Lemma5Report l5 = alignment::check_lemma5(ntk::z_vectors(S, d.X, o.K));
    add("series_tail", l5.pass(), l5.worst_margin, 0.0);
    double xi = o.xi > 0.0 ? o.xi : a.xi_observed;
    alignment::Theorem3Report t3 = alignment::check_theorem3(S, d, o.K, o.nu, xi, act);
    add("gnn_alignment", t3.holds, t3.A, t3.factor * t3.A_lin);
    r["gnn_alignment_bound"] = {{"factor", t3.factor}, {"vacuous", t3.vacuous}, {"data_factor", t3.data_factor},
                     {"data_vacuous", t3.data_vacuous}, {"data_holds", t3.data_holds}};
    Mat theta = ntk::filter_ntk(S, d.X, o.K).theta;
    Vec y = stack_columns(d.Y);
    if (alignment::alignment(theta, y) > 0.0) {
        training::GenSandwich gs = training::gen_sandwich(theta, y);
        add("gen_sandwich", gs.holds, gs.middle, gs.lower);
        r["gen_sandwich"] = {{"lower", gs.lower}, {"middle", gs.middle}, {"upper", gs.upper},
                             {"literal_holds", gs.literal_holds}};
    }
    r["checks"] = checks;
    r["violations"] = failed;
    int code = failed ? violation : ok;
    finish(c, r, code);
    return code;
}

struct OptimizeOpts {
    std::string data;
    int K = 2;
    double alpha = 1.0;
    double eta = 1.0;
    std::string model = "filter";
    bool exact = false;
};

int cmd_optimize_gso(Context& c, const OptimizeOpts& o) {
    Split sp = load_split(o.data);
    const Dataset& d = sp.train;
    shiftops::GsoSolveConfig g;
    g.K = o.K;
    g.alpha = o.alpha;
    g.eta = o.eta;
    g.M = d.M();
    g.unit_direction = !o.exact;
    shiftops::CrossCovariance C = shiftops::cross_covariance(d, shiftops::CxyMode::symmetrized, false);
    json r;
    shiftops::GsoSolution sol;
    try {
        if (o.model == "filter") {
            sol = shiftops::solve_optimal_gso(C, g);
            r["constraint_lhs"] = shiftops::constraint_lhs(sol.S, o.K);
        } else {
            sol = alignment::solve_optimal_gso_linear_gnn(C.C, o.K, shiftops::solve_mu(C.C, g));
            r["constraint_lhs"] = alignment::constraint_lhs_linear_gnn(sol.S, o.K);
            if (!o.exact) sol.S /= sol.S.norm();
        }
    } catch (const shiftops::NoRealRoot& e) {
        r["error"] = e.what();
        finish(c, r, violation);
        std::cerr << "optimize-gso: " << e.what() << "\n";
        return violation;
    } catch (const shiftops::NegativeEigenvalue& e) {
        r["error"] = e.what();
        finish(c, r, violation);
        std::cerr << "optimize-gso: " << e.what() << "\n";
        return violation;
    }
    c.write_csv("S.csv", sol.S);
    r["model"] = o.model;
    r["mu"] = sol.mu;
    r["residual"] = sol.residual;
    r["budget"] = shiftops::budget(g);
    r["unit_direction"] = !o.exact;
    r["frobenius"] = sol.S.norm();
    r["A_L"] = alignment::alignment_lower_bound(sol.S, d, o.K).value;
    r["A_filt"] = alignment::alignment_filt(sol.S, d, o.K);
    finish(c, r, ok);
    return ok;
}

struct TrainOpts {
    std::string data;
    std::string gso = "cxy";
    std::string model = "filter";
    int K = 2;
    int width = 50;
    double eta = 0.01;
    int epochs = 100;
    double kappa = 1.0;
    std::string optimizer = "gd";
    int batch = 0;
    bool mean_loss = false;
    std::string act = "tanh";
};

int cmd_train(Context& c, const TrainOpts& o) {
    Split sp = load_split(o.data);
    Mat S = resolve_gso(o.gso, sp.train);
    training::TrainConfig cfg;
    cfg.eta = o.eta;
    cfg.epochs = o.epochs;
    cfg.kappa = o.kappa;
    cfg.optimizer = training::parse_optimizer(o.optimizer);
    cfg.batch_size = o.batch;
    cfg.mean_loss = o.mean_loss;
    cfg.width = o.width;
    cfg.act = models::parse_activation(o.act);
    cfg.seed = c.common.seed;
    json r;
    r["model"] = o.model;
    r["gso"] = o.gso;
    try {
        training::TrainTrace t = training::train(parse_model(o.model), S, sp.train, sp.test ? &*sp.test : nullptr,
                                                 o.K, cfg);
        c.write_csv("trace.csv", trace_matrix(t), kTraceHeader);
        c.write_csv("params.csv", Mat(t.params));
        r["epochs_run"] = t.epochs_run;
        r["final_train_loss"] = t.train_loss.back();
        if (!t.test_loss.empty()) r["final_test_loss"] = t.test_loss.back();
        r["param_movement"] = t.param_movement.back();
        if (parse_model(o.model) == training::ModelKind::filter && max_asymmetry(S) <= 1e-10) {
            Mat theta = ntk::filter_ntk(S, sp.train.X, o.K).theta;
            r["predicted_param_movement"] = training::predicted_param_movement(theta, stack_columns(sp.train.Y));
        }
    } catch (const training::Divergence& e) {
        r["diverged_at_epoch"] = e.epoch;
        finish(c, r, violation);
        std::cerr << "train: " << e.what() << "\n";
        return violation;
    }
    finish(c, r, ok);
    return ok;
}

struct CompareOpts {
    std::string data;
    std::string gso = "cxy,cxx";
    std::string model = "both";
    int reps = 1;
    std::optional<double> eta;
    std::optional<double> kappa;
    std::string opt_filter = "gd";
    std::string opt_gnn = "adam";
    verify::CompareSetup setup;
};

int cmd_compare(Context& c, CompareOpts o) {
    if (o.eta) o.setup.eta_filter = o.setup.eta_gnn = *o.eta;
    if (o.kappa) o.setup.kappa_filter = o.setup.kappa_gnn = *o.kappa;
    o.setup.opt_filter = training::parse_optimizer(o.opt_filter);
    o.setup.opt_gnn = training::parse_optimizer(o.opt_gnn);
    Dataset train, test;
    if (o.data.empty()) {
        verify::PlantedSplit ps = verify::planted_split(o.setup, c.common.seed);
        train = ps.train;
        test = ps.test;
        c.write_dataset("data/train", train);
        c.write_dataset("data/test", test);
        c.seeds["data"] = c.common.seed;
    } else {
        Split sp = load_split(o.data);
        if (!sp.test) throw InputError("compare needs train/ and test/ under " + o.data);
        train = sp.train;
        test = *sp.test;
    }
    std::vector<training::NamedGso> gsos;
    for (const std::string& name : split_list(o.gso)) gsos.push_back({name, resolve_gso(name, train)});
    if (gsos.empty()) throw InputError("--gso lists no shift operators");
    std::vector<training::ModelKind> models;
    if (o.model != "gnn") models.push_back(training::ModelKind::filter);
    if (o.model != "filter") models.push_back(training::ModelKind::gnn2);
    json r;
    r["gso"] = split_list(o.gso);
    r["reps"] = o.reps;
    r["K"] = o.setup.K;
    r["width"] = o.setup.width;
    r["epochs"] = o.setup.epochs;
    json per_model = json::object();
    c.seeds["train"] = json::array();
    for (int k = 0; k < o.reps; ++k) c.seeds["train"].push_back(c.common.seed + k);
    for (training::ModelKind m : models) {
        training::TrainConfig cfg = verify::compare_config(o.setup, m, c.common.seed);
        training::CompareReport rep = training::compare_gso(m, train, test, o.setup.K, cfg, gsos, o.reps,
                                                            c.common.threads);
        json arms = json::array();
        for (const training::ArmResult& a : rep.arms) {
            for (int k = 0; k < o.reps; ++k) {
                Eigen::Index T = static_cast<Eigen::Index>(a.train_loss[k].size());
                Mat tr(T, 3);
                for (Eigen::Index e = 0; e < T; ++e) {
                    tr(e, 0) = static_cast<double>(e);
                    tr(e, 1) = a.train_loss[k][e];
                    tr(e, 2) = a.test_loss[k][e];
                }
                c.write_csv("trace_" + model_name(m) + "_" + a.name + "_rep" + std::to_string(k) + ".csv", tr,
                            {"epoch", "train_loss", "test_loss"});
            }
            int div = 0;
            for (bool b : a.diverged) div += b;
            arms.push_back({{"name", a.name},
                            {"mean_train_loss", a.mean_train_loss},
                            {"mean_test_loss", a.mean_test_loss},
                            {"diverged", div}});
        }
        per_model[model_name(m)] = {{"eta", cfg.eta},
                                    {"kappa", cfg.kappa},
                                    {"optimizer", training::to_string(cfg.optimizer)},
                                    {"arms", arms},
                                    {"final_train_gap", rep.final_train_gap},
                                    {"final_test_gap", rep.final_test_gap}};
    }
    r["models"] = per_model;
    finish(c, r, ok);
    return ok;
}

struct VerifyBoundsOpts {
    int count = 500;
    std::string checks = "all";
    int epochs = 200;
    int movement_seeds = 20;
};

int cmd_verify_bounds(Context& c, const VerifyBoundsOpts& o) {
    using Runner = std::function<verify::Check()>;
    std::uint64_t s = c.common.seed;
    const std::vector<std::pair<std::string, Runner>> all = {
        {"filt-bound", [&] { return verify::sweep_filter_bound(o.count, s); }},
        {"lin-bound", [&] { return verify::sweep_lin_bound(o.count, s); }},
        {"budget", [&] { return verify::sweep_budget(o.count, s); }},
        {"leading-term", [&] { return verify::sweep_leading_term(o.count, s); }},
        {"series-tail", [&] { return verify::sweep_series_tail(o.count, s); }},
        {"optimal-gso", [&] { return verify::sweep_optimal_gso(o.count, s); }},
        {"training-sandwich", [&] { return verify::sweep_training_sandwich(std::max(1, o.count / 5), s, o.epochs); }},
        {"movement", [&] { return verify::sweep_movement(o.movement_seeds, s); }},
        {"gen-sandwich", [&] { return verify::sweep_gen_sandwich(std::max(1, o.count / 5), s); }},
    };
    std::vector<std::string> wanted = o.checks == "all" ? std::vector<std::string>{} : split_list(o.checks);
    for (const std::string& w : wanted) {
        bool known = false;
        for (const auto& entry : all) known = known || entry.first == w;
        if (!known) throw InputError("unknown check: " + w);
    }
    json list = json::array();
    int failed = 0;
    for (const auto& [name, runner] : all) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
        verify::Check ch = runner();
        failed += !ch.pass();
        json j = verify::to_json(ch);
        j["check"] = name;
        list.push_back(j);
        std::cerr << name << ": " << ch.violations << "/" << ch.instances << " violations\n";
    }
    json r;
    r["count"] = o.count;
    r["checks"] = list;
    r["failed_checks"] = failed;
    int code = failed ? violation : ok;
    finish(c, r, code);
    return code;
}

struct VerifyHermiteOpts {
    int K = 3;
    int L = hermite::kDefaultSeriesL;
    int points = 200;
    bool constants_only = false;
};

int cmd_verify_hermite(Context& c, const VerifyHermiteOpts& o) {
    json r = verify::hermite_constants(o.K);
    if (o.constants_only) {
        finish(c, r, ok);
        return ok;
    }
    verify::Check ch = verify::hermite_routines(o.L, 0.1, 10.0, o.points);
    r["routines"] = verify::to_json(ch);
    int code = ch.pass() ? ok : violation;
    finish(c, r, code);
    return code;
}

// ---- argument wiring ----

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Base random seed")->capture_default_str();
    sub->add_option("--out-dir", c.out_dir, "Directory for reports and CSV artifacts")->capture_default_str();
    sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_flag("--json", c.print_json, "Print the JSON report to stdout");
}

void add_planted(CLI::App* sub, verify::CompareSetup& s) {
    sub->add_option("--n", s.n, "Nodes")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--len", s.len, "Series length")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--dt", s.dt, "Prediction lag")->check(CLI::NonNegativeNumber)->capture_default_str();
    sub->add_option("--anisotropy", s.anisotropy, "Weight a of the planted rank-one direction")->capture_default_str();
    sub->add_option("--mix", s.mix, "Weight b of the random part of the transition")->capture_default_str();
    sub->add_option("--noise", s.noise, "Innovation scale")->capture_default_str();
    sub->add_option("--m-train", s.M_train, "Training pairs")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--m-test", s.M_test, "Test pairs")->check(CLI::NonNegativeNumber)->capture_default_str();
}

// --config may follow the subcommand; CLI11 reads it only at the top level.
std::vector<std::string> hoist_config(const std::vector<std::string>& args) {
    std::vector<std::string> front, rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            front.push_back(args[i]);
            front.push_back(args[++i]);
        } else if (args[i].rfind("--config=", 0) == 0) {
            front.push_back(args[i]);
        } else {
            rest.push_back(args[i]);
        }
    }
    front.insert(front.end(), rest.begin(), rest.end());
    return front;
}

}  // namespace

int run(const std::vector<std::string>& raw) {
    CLI::App app{"Neural tangent kernels, alignment and shift-operator experiments for graph filters and GNNs",
                 "gntk"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI-style config file; sections are named after subcommands");
    app.allow_config_extras(false);

    Common common;
    GenDataOpts gen;
    NtkOpts nt;
    AlignOpts al;
    OptimizeOpts op;
    TrainOpts tr;
    CompareOpts cm;
    VerifyBoundsOpts vb;
    VerifyHermiteOpts vh;
    const std::vector<std::string> models = {"filter", "gnn"};
    const std::vector<std::string> acts = {"tanh", "identity", "sigmoid", "relu", "leaky_relu"};
    const std::vector<std::string> opts = {"gd", "adam"};

    auto* g = app.add_subcommand("gen-data", "Simulate a planted VAR(1) series and split it into pairs");
    add_common(g, common);
    add_planted(g, gen.setup);

    auto* n = app.add_subcommand("ntk", "Compute an NTK on a dataset");
    add_common(n, common);
    n->add_option("--data", nt.data, "Dataset directory")->required();
    n->add_option("--gso", nt.gso, "cxy, cxx, identity or a CSV path")->capture_default_str();
    n->add_option("--k", nt.K, "Filter taps")->check(CLI::PositiveNumber)->capture_default_str();
    n->add_option("--model", nt.model)
        ->check(CLI::IsMember({"filter", "gnn", "gnn-first", "gnn-mc", "gnn-empirical"}))
        ->capture_default_str();
    n->add_option("--width", nt.width, "Width for gnn-mc and gnn-empirical")->check(CLI::PositiveNumber)
        ->capture_default_str();
    n->add_option("--act", nt.act)->check(CLI::IsMember(acts))->capture_default_str();
    n->add_flag("--save-theta", nt.save_theta, "Write theta.csv");

    auto* a = app.add_subcommand("align", "Alignment functionals and bound checks");
    add_common(a, common);
    a->add_option("--data", al.data, "Dataset directory")->required();
    a->add_option("--gso", al.gso)->capture_default_str();
    a->add_option("--k", al.K)->check(CLI::PositiveNumber)->capture_default_str();
    a->add_option("--nu", al.nu, "Operator-norm bound on S")->check(CLI::PositiveNumber)->capture_default_str();
    a->add_option("--xi", al.xi, "Requested alignment ratio; 0 uses the measured one")->capture_default_str();
    a->add_option("--alpha", al.alpha)->check(CLI::PositiveNumber)->capture_default_str();
    a->add_option("--eta", al.eta)->check(CLI::PositiveNumber)->capture_default_str();
    a->add_option("--act", al.act)->check(CLI::IsMember(acts))->capture_default_str();

    auto* o = app.add_subcommand("optimize-gso", "Solve for the alignment-optimal shift operator");
    add_common(o, common);
    o->add_option("--data", op.data, "Dataset directory")->required();
    o->add_option("--k", op.K)->check(CLI::PositiveNumber)->capture_default_str();
    o->add_option("--alpha", op.alpha)->check(CLI::PositiveNumber)->capture_default_str();
    o->add_option("--eta", op.eta)->check(CLI::PositiveNumber)->capture_default_str();
    o->add_option("--model", op.model)->check(CLI::IsMember({"filter", "linear-gnn"}))->capture_default_str();
    o->add_flag("--exact", op.exact, "Keep the budget scale instead of unit Frobenius norm");

    auto* t = app.add_subcommand("train", "Train one model and write its loss trace");
    add_common(t, common);
    t->add_option("--data", tr.data, "Dataset directory (X.csv/Y.csv or train/ and test/)")->required();
    t->add_option("--gso", tr.gso)->capture_default_str();
    t->add_option("--model", tr.model)->check(CLI::IsMember(models))->capture_default_str();
    t->add_option("--k", tr.K)->check(CLI::PositiveNumber)->capture_default_str();
    t->add_option("--width", tr.width)->check(CLI::PositiveNumber)->capture_default_str();
    t->add_option("--eta", tr.eta)->check(CLI::PositiveNumber)->capture_default_str();
    t->add_option("--epochs", tr.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
    t->add_option("--kappa", tr.kappa, "Initialization scale")->check(CLI::NonNegativeNumber)->capture_default_str();
    t->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember(opts))->capture_default_str();
    t->add_option("--batch", tr.batch, "Minibatch size, 0 for full batch")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    t->add_flag("--mean-loss", tr.mean_loss, "Divide the loss by the number of samples");
    t->add_option("--act", tr.act)->check(CLI::IsMember(acts))->capture_default_str();

    auto* c = app.add_subcommand("compare", "Train every model with each shift operator and compare losses");
    add_common(c, common);
    add_planted(c, cm.setup);
    c->add_option("--data", cm.data, "Directory with train/ and test/; generated when omitted");
    c->add_option("--gso", cm.gso, "Comma-separated shift operators")->capture_default_str();
    c->add_option("--model", cm.model)->check(CLI::IsMember({"filter", "gnn", "both"}))->capture_default_str();
    c->add_option("--reps", cm.reps)->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--k", cm.setup.K)->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--width", cm.setup.width)->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--epochs", cm.setup.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
    c->add_option("--eta", cm.eta, "Learning rate for both models");
    c->add_option("--kappa", cm.kappa, "Initialization scale for both models");
    c->add_option("--eta-filter", cm.setup.eta_filter)->capture_default_str();
    c->add_option("--eta-gnn", cm.setup.eta_gnn)->capture_default_str();
    c->add_option("--kappa-filter", cm.setup.kappa_filter)->capture_default_str();
    c->add_option("--kappa-gnn", cm.setup.kappa_gnn)->capture_default_str();
    c->add_option("--optimizer-filter", cm.opt_filter)->check(CLI::IsMember(opts))->capture_default_str();
    c->add_option("--optimizer-gnn", cm.opt_gnn)->check(CLI::IsMember(opts))->capture_default_str();

    auto* b = app.add_subcommand("verify-bounds", "Randomized sweeps of the alignment and training bounds");
    add_common(b, common);
    b->add_option("--count", vb.count, "Instances per sweep")->check(CLI::PositiveNumber)->capture_default_str();
    b->add_option("--checks", vb.checks,
                  "all or a list of filt-bound, lin-bound, budget, leading-term, series-tail, optimal-gso, "
                  "training-sandwich, movement, "
                  "gen-sandwich")
        ->capture_default_str();
    b->add_option("--epochs", vb.epochs, "Epochs for the training sandwich")->check(CLI::PositiveNumber)
        ->capture_default_str();
    b->add_option("--movement-seeds", vb.movement_seeds)->check(CLI::PositiveNumber)->capture_default_str();

    auto* h = app.add_subcommand("verify-hermite", "Hermite constants and coefficient verification routines");
    add_common(h, common);
    h->add_option("--k", vh.K, "K for the first-layer constant")->check(CLI::PositiveNumber)->capture_default_str();
    h->add_option("--L", vh.L, "Highest degree checked")->check(CLI::NonNegativeNumber)->capture_default_str();
    h->add_option("--points", vh.points, "Grid points on [0.1, 10]")->check(CLI::PositiveNumber)
        ->capture_default_str();
    h->add_flag("--constants-only", vh.constants_only, "Skip the sign and monotonicity routines");

    if (raw.empty()) {
        std::cerr << app.help();
        return usage;
    }
    std::vector<std::string> args = hoist_config(raw);
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return ok;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e);
        return ok;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    CLI::App* sub = app.get_subcommands().front();
    Context ctx;
    ctx.subcommand = sub->get_name();
    ctx.common = common;
    ctx.started = utc_now();
    ctx.config_snapshot = sub->config_to_str(true, false);
    if (auto* copt = app.get_config_ptr(); copt && copt->count()) ctx.config_file = copt->as<std::string>();
    try {
        if (ctx.subcommand == "gen-data") return cmd_gen_data(ctx, gen);
        if (ctx.subcommand == "ntk") return cmd_ntk(ctx, nt);
        if (ctx.subcommand == "align") return cmd_align(ctx, al);
        if (ctx.subcommand == "optimize-gso") return cmd_optimize_gso(ctx, op);
        if (ctx.subcommand == "train") return cmd_train(ctx, tr);
        if (ctx.subcommand == "compare") return cmd_compare(ctx, cm);
        if (ctx.subcommand == "verify-bounds") return cmd_verify_bounds(ctx, vb);
        if (ctx.subcommand == "verify-hermite") return cmd_verify_hermite(ctx, vh);
    } catch (const alignment::AssumptionNotMet& e) {
        std::cerr << ctx.subcommand << ": " << e.what() << "\n";
        return violation;
    } catch (const InputError& e) {
        std::cerr << ctx.subcommand << ": " << e.what() << "\n";
        return usage;
    } catch (const dataio::CsvError& e) {
        std::cerr << ctx.subcommand << ": " << e.what() << "\n";
        return usage;
    } catch (const dataio::EmptyInput& e) {
        std::cerr << ctx.subcommand << ": " << e.what() << "\n";
        return usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << ctx.subcommand << ": " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        std::cerr << ctx.subcommand << ": " << e.what() << "\n";
        return violation;
    }
    return usage;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace gntk::cli
