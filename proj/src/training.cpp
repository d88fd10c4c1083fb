#include "gntk/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace gntk::training {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Flat-parameter view of either model.
struct Model {
    ModelKind kind;
    const Mat& S;
    int K;
    int F;
    models::Activation act;

    Vec init(const TrainConfig& cfg) const {
        models::InitConfig ic{cfg.kappa, cfg.seed};
        if (kind == ModelKind::filter) return models::init_filter(K, ic).h;
        return models::flatten(models::init_gnn2(F, K, act, ic));
    }

    Mat forward(const Vec& p, const Mat& X) const {
        if (kind == ModelKind::filter) return models::filter_forward_batch(S, p, X);
        return models::gnn2_forward_batch(S, models::unflatten(p, F, K, act), X);
    }

    // Gradient of 0.5 sum ||f - y||^2 given R = f(X) - Y.
    Vec grad(const Vec& p, const Mat& X, const Mat& R) const {
        if (kind == ModelKind::filter) {
            Vec g(K);
            Mat P = X;
            for (int k = 0; k < K; ++k) {
                g(k) = P.cwiseProduct(R).sum();
                if (k + 1 < K) P = S * P;
            }
            return g;
        }
        return models::flatten(models::gnn2_gradient(S, models::unflatten(p, F, K, act), X, R));
    }
};

Model make_model(ModelKind kind, const Mat& S, int K, const TrainConfig& cfg) {
    if (K < 1) throw PreconditionError("train: K must be >= 1");
    if (kind == ModelKind::gnn2 && cfg.width < 1) throw PreconditionError("train: width must be >= 1");
    return Model{kind, S, K, cfg.width, cfg.act};
}

Mat select_columns(const Mat& A, const std::vector<Eigen::Index>& idx, std::size_t from, std::size_t to) {
    Mat out(A.rows(), static_cast<Eigen::Index>(to - from));
    for (std::size_t j = from; j < to; ++j) out.col(static_cast<Eigen::Index>(j - from)) = A.col(idx[j]);
    return out;
}

Eigen::SelfAdjointEigenSolver<Mat> eig(const Mat& theta) {
    return Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (theta + theta.transpose()));
}

}  // namespace

Optimizer parse_optimizer(const std::string& s) {
    if (s == "gd") return Optimizer::gd;
    if (s == "adam") return Optimizer::adam;
    throw PreconditionError("unknown optimizer '" + s + "' (expected gd or adam)");
}

std::string to_string(Optimizer o) { return o == Optimizer::gd ? "gd" : "adam"; }

Divergence::Divergence(int e) : std::runtime_error("training diverged at epoch " + std::to_string(e)), epoch(e) {}

double loss(const Mat& F, const Mat& Y, bool mean) {
    double l = 0.5 * (F - Y).squaredNorm();
    return mean && Y.cols() > 0 ? l / static_cast<double>(Y.cols()) : l;
}

Vec objective_gradient(ModelKind kind, const Mat& S, const Dataset& d, int K, const TrainConfig& cfg,
                       const Vec& params) {
    Model m = make_model(kind, S, K, cfg);
    Vec g = m.grad(params, d.X, m.forward(params, d.X) - d.Y);
    if (cfg.mean_loss) g /= static_cast<double>(d.M());
    return g;
}

double objective_value(ModelKind kind, const Mat& S, const Dataset& d, int K, const TrainConfig& cfg,
                       const Vec& params) {
    Model m = make_model(kind, S, K, cfg);
    return loss(m.forward(params, d.X), d.Y, cfg.mean_loss);
}

TrainTrace train(ModelKind kind, const Mat& S, const Dataset& tr, const Dataset* test, int K,
                 const TrainConfig& cfg) {
    if (!(cfg.eta > 0.0)) throw PreconditionError("train: eta must be positive");
    if (cfg.epochs < 0) throw PreconditionError("train: epochs must be >= 0");
    if (S.rows() != tr.n()) throw DimensionError("train: S does not match the data");
    Model m = make_model(kind, S, K, cfg);
    TrainTrace t;
    Vec p = m.init(cfg);
    t.params0 = p;
    auto record = [&]() {
        t.train_loss.push_back(loss(m.forward(p, tr.X), tr.Y, cfg.mean_loss));
        if (test) t.test_loss.push_back(loss(m.forward(p, test->X), test->Y, cfg.mean_loss));
        t.param_movement.push_back((p - t.params0).norm());
    };
    record();
    const double limit = 1e6 * std::max(t.train_loss[0], 1e-12);
    const std::size_t M = static_cast<std::size_t>(tr.M());
    const std::size_t bs = cfg.batch_size <= 0 ? M : std::min<std::size_t>(cfg.batch_size, M);
    std::vector<Eigen::Index> idx(M);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 shuffler(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    Vec am = Vec::Zero(p.size()), av = Vec::Zero(p.size());
    long step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (bs < M) std::shuffle(idx.begin(), idx.end(), shuffler);
        bool stop = false;
        for (std::size_t from = 0; from < M; from += bs) {
            std::size_t to = std::min(M, from + bs);
            Vec g;
            if (bs == M) {
                g = m.grad(p, tr.X, m.forward(p, tr.X) - tr.Y);
            } else {
                Mat Xb = select_columns(tr.X, idx, from, to), Yb = select_columns(tr.Y, idx, from, to);
                g = m.grad(p, Xb, m.forward(p, Xb) - Yb);
            }
            if (cfg.mean_loss) g /= static_cast<double>(to - from);
            if (cfg.grad_tol > 0.0 && bs == M && g.norm() <= cfg.grad_tol) {
                stop = true;
                break;
            }
            ++step;
            if (cfg.optimizer == Optimizer::gd) {
                p -= cfg.eta * g;
            } else {
                am = cfg.adam_beta1 * am + (1.0 - cfg.adam_beta1) * g;
                av = cfg.adam_beta2 * av + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
                double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
                double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
                p.array() -= cfg.eta * (am.array() / c1) / ((av.array() / c2).sqrt() + cfg.adam_eps);
            }
        }
        if (stop) break;
        record();
        t.epochs_run = epoch;
        double l = t.train_loss.back();
        if (!std::isfinite(l) || l > limit) throw Divergence(epoch);
    }
    t.params = p;
    return t;
}

LinearizedTrace linearized_dynamics(const Mat& theta, const Vec& y, const Vec& f0, double eta, int T) {
    if (theta.rows() != y.size() || f0.size() != y.size()) throw DimensionError("linearized_dynamics: shape mismatch");
    if (T < 0) throw PreconditionError("linearized_dynamics: T must be >= 0");
    auto es = eig(theta);
    Vec c = es.eigenvectors().transpose() * (f0 - y);
    Vec q = (1.0 - eta * es.eigenvalues().array()).matrix();
    LinearizedTrace out;
    out.nonconvergent = theta.size() > 0 && eta * es.eigenvalues().maxCoeff() > 1.0;
    for (int t = 0; t <= T; ++t) {
        out.residual_norm.push_back(c.norm());
        c = c.cwiseProduct(q);
    }
    return out;
}

BoundCheck check_theorem_t0(const Mat& S, const Dataset& d, int K, const TrainConfig& cfg) {
    const double nM = static_cast<double>(d.X.size());
    BoundCheck b;
    b.kappa = cfg.eps_budget * std::sqrt(cfg.delta_budget / nM);
    b.slack = cfg.c_slack * cfg.eps_budget;
    b.eta = cfg.eta;
    Mat theta = ntk::filter_ntk(S, d.X, K).theta;
    b.lambda_max = eig(theta).eigenvalues().maxCoeff();
    if (cfg.eta * b.lambda_max > 1.0 + 1e-12) throw PreconditionError("check_theorem_t0: eta lambda_max exceeds 1");
    TrainConfig c = cfg;
    c.kappa = b.kappa;
    c.mean_loss = false;
    c.optimizer = Optimizer::gd;
    c.batch_size = 0;
    c.grad_tol = 0.0;
    TrainTrace tr = train(ModelKind::filter, S, d, nullptr, K, c);
    Vec y = stack_columns(d.Y);
    double yy = y.squaredNorm(), A = y.dot(theta * y);
    for (int t = 1; t <= cfg.epochs; ++t) {
        double obs = 2.0 * tr.train_loss[t];
        double lo = yy - 2.0 * t * cfg.eta * A, up = yy - cfg.eta * A;
        b.lower.push_back(lo);
        b.observed.push_back(obs);
        b.upper.push_back(up);
        b.vacuous.push_back(lo < 0.0);
        if (obs < lo - b.slack || obs > up + b.slack) b.violations.push_back(t);
    }
    return b;
}

double pinv_quadratic(const Mat& theta, const Vec& y) {
    if (theta.rows() != y.size()) throw DimensionError("pinv_quadratic: shape mismatch");
    if (y.size() == 0) return 0.0;
    auto es = eig(theta);
    double lmax = es.eigenvalues().maxCoeff();
    if (!(lmax > 0.0)) return 0.0;
    Vec c = es.eigenvectors().transpose() * y;
    double s = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i)
        if (es.eigenvalues()(i) > kPinvCutoff * lmax) s += c(i) * c(i) / es.eigenvalues()(i);
    return s;
}

double predicted_param_movement(const Mat& theta, const Vec& y) { return std::sqrt(pinv_quadratic(theta, y)); }

GenSandwich gen_sandwich(const Mat& theta, const Vec& y, double tol) {
    if (theta.rows() != y.size()) throw DimensionError("gen_sandwich: shape mismatch");
    auto es = eig(theta);
    GenSandwich g;
    g.lambda_max = y.size() ? es.eigenvalues().maxCoeff() : 0.0;
    Vec c = es.eigenvectors().transpose() * y;
    double a = 0.0;
    g.lambda_min_pos = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        double l = es.eigenvalues()(i);
        if (g.lambda_max > 0.0 && l > kPinvCutoff * g.lambda_max) {
            double w = c(i) * c(i);
            g.projected += w;
            g.middle += w / l;
            a += w * l;
            g.lambda_min_pos = std::min(g.lambda_min_pos, l);
        }
    }
    g.alignment = a;
    if (!(a > 0.0)) throw PreconditionError("gen_sandwich: zero alignment");
    double ratio = g.lambda_max / g.lambda_min_pos;
    g.lower = g.projected * g.projected / a;
    g.upper = ratio * g.lower;
    g.literal_lower = y.squaredNorm() / a;
    g.literal_upper = ratio * g.literal_lower;
    g.holds = g.lower <= g.middle * (1.0 + tol) && g.middle <= g.upper * (1.0 + tol);
    g.literal_holds = g.literal_lower <= g.middle * (1.0 + tol) && g.middle <= g.literal_upper * (1.0 + tol);
    return g;
}

namespace {

double max_shift_sq(const Mat& S, const Dataset& d, int K) {
    double m = 0.0;
    Mat P = d.X;
    for (int k = 0; k < K; ++k) {
        m = std::max(m, P.colwise().squaredNorm().maxCoeff());
        if (k + 1 < K) P = S * P;
    }
    return m;
}

}  // namespace

double rademacher_bound_value(const Mat& S, const Dataset& d, int K, double B, double rho) {
    if (B < 0.0) throw PreconditionError("rademacher_bound_value: B must be >= 0");
    if (K < 1) throw PreconditionError("rademacher_bound_value: K must be >= 1");
    return B * rho * std::sqrt(2.0 * K * max_shift_sq(S, d, K) / static_cast<double>(d.M()));
}

GeneralizationBound generalization_bound(const Mat& S, const Dataset& d, int K, const TrainConfig& cfg, double rho,
                                         double movement) {
    GeneralizationBound g;
    Mat theta = ntk::filter_ntk(S, d.X, K).theta;
    Vec y = stack_columns(d.Y);
    g.sandwich = gen_sandwich(theta, y);
    g.movement = movement > 0.0 ? movement : std::sqrt(g.sandwich.middle);
    if (rho > 0.0) {
        g.rho = rho;
    } else {
        // Minimum-norm least-squares fit: f = P y.
        Mat J = ntk::z_vectors(S, d.X, K);
        Vec h = J.completeOrthogonalDecomposition().solve(y);
        Mat R = unstack(Vec(J * h - y), d.n());
        g.rho = R.colwise().norm().maxCoeff();
    }
    g.max_shift_sq = max_shift_sq(S, d, K);
    const double M = static_cast<double>(d.M());
    g.complexity_term = 2.0 * rademacher_bound_value(S, d, K, g.movement, g.rho);
    g.concentration_term = 4.0 * g.rho * g.rho * std::sqrt(2.0 * std::log(4.0 / cfg.delta_budget) / M);
    g.value = g.complexity_term + g.concentration_term;
    return g;
}

CompareReport compare_gso(ModelKind model, const Dataset& train_set, const Dataset& test, int K,
                          const TrainConfig& cfg, const std::vector<NamedGso>& gsos, int reps, int threads) {
    if (reps < 1) throw PreconditionError("compare_gso: reps must be >= 1");
    if (gsos.empty()) throw PreconditionError("compare_gso: no shift operators given");
    CompareReport rep;
    rep.model = model;
    rep.reps = reps;
    const std::size_t E = static_cast<std::size_t>(cfg.epochs) + 1;
    for (const NamedGso& g : gsos) {
        ArmResult a;
        a.name = g.name;
        a.train_loss.assign(reps, std::vector<double>(E, kNaN));
        a.test_loss.assign(reps, std::vector<double>(E, kNaN));
        a.diverged.assign(reps, false);
        rep.arms.push_back(std::move(a));
    }
    std::vector<char> diverged(gsos.size() * reps, 0);
    parallel_for(gsos.size() * reps, threads, [&](std::size_t job) {
        std::size_t arm = job / reps, r = job % reps;
        TrainConfig c = cfg;
        c.seed = cfg.seed + r;
        try {
            TrainTrace t = train(model, gsos[arm].S, train_set, &test, K, c);
            std::copy(t.train_loss.begin(), t.train_loss.end(), rep.arms[arm].train_loss[r].begin());
            std::copy(t.test_loss.begin(), t.test_loss.end(), rep.arms[arm].test_loss[r].begin());
        } catch (const Divergence&) {
            diverged[job] = 1;
        }
    });
    for (std::size_t arm = 0; arm < gsos.size(); ++arm) {
        ArmResult& a = rep.arms[arm];
        for (int r = 0; r < reps; ++r) a.diverged[r] = diverged[arm * reps + r] != 0;
        a.mean_train_loss.assign(E, 0.0);
        a.mean_test_loss.assign(E, 0.0);
        for (std::size_t e = 0; e < E; ++e) {
            double s = 0.0, st = 0.0;
            int cnt = 0;
            for (int r = 0; r < reps; ++r) {
                if (a.diverged[r]) continue;
                s += a.train_loss[r][e];
                st += a.test_loss[r][e];
                ++cnt;
            }
            a.mean_train_loss[e] = cnt ? s / cnt : kNaN;
            a.mean_test_loss[e] = cnt ? st / cnt : kNaN;
        }
    }
    if (gsos.size() >= 2) {
        for (int r = 0; r < reps; ++r) {
            rep.final_test_gap.push_back(rep.arms[1].test_loss[r].back() - rep.arms[0].test_loss[r].back());
            rep.final_train_gap.push_back(rep.arms[1].train_loss[r].back() - rep.arms[0].train_loss[r].back());
        }
    }
    return rep;
}

}  // namespace gntk::training
