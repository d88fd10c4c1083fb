#include "gntk/dataio.hpp"

#include <boost/tokenizer.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace gntk::dataio {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& cell, double* out) {
    std::string t = trim(cell);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [p, ec] = std::from_chars(first, t.data() + t.size(), *out);
    return ec == std::errc() && p == t.data() + t.size();
}

std::vector<std::string> split_row(const std::string& line) {
    using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
    Tok tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
    return std::vector<std::string>(tok.begin(), tok.end());
}

}  // namespace

double spectral_radius(const Mat& A) {
    if (A.size() == 0) return 0.0;
    return Eigen::EigenSolver<Mat>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

Mat generate_var(const VarProcessConfig& cfg) {
    if (cfg.n < 1 || cfg.T_len < 1) throw PreconditionError("generate_var: need n >= 1 and T_len >= 1");
    if (cfg.A.rows() != cfg.n || cfg.A.cols() != cfg.n) throw DimensionError("generate_var: A must be n x n");
    if (!(cfg.noise_scale > 0.0)) throw PreconditionError("generate_var: noise_scale must be positive");
    double r = spectral_radius(cfg.A);
    if (!(r < 1.0)) throw PreconditionError("generate_var: spectral radius " + std::to_string(r) + " >= 1");
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd;
    Vec z = Vec::Zero(cfg.n), w(cfg.n);
    Mat out(cfg.n, cfg.T_len);
    for (Eigen::Index t = 0; t < kBurnIn + cfg.T_len; ++t) {
        for (Eigen::Index a = 0; a < cfg.n; ++a) w(a) = nd(rng);
        z = cfg.A * z + cfg.noise_scale * w;
        if (t >= kBurnIn) out.col(t - kBurnIn) = z;
    }
    return out;
}

PlantedTransition planted_transition(Eigen::Index n, double a, double b, std::uint64_t seed) {
    if (n < 1) throw PreconditionError("planted_transition: n must be >= 1");
    if (a < 0.0 || b < 0.0 || !(a + b < 1.0)) throw PreconditionError("planted_transition: need a, b >= 0 and a + b < 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    PlantedTransition p;
    p.u = Vec(n);
    for (Eigen::Index i = 0; i < n; ++i) p.u(i) = nd(rng);
    p.u.normalize();
    Mat R(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) R(i, j) = nd(rng);
    double op = Eigen::JacobiSVD<Mat>(R).singularValues()(0);
    p.A = a * p.u * p.u.transpose() + (op > 0.0 ? b / op : 0.0) * R;
    return p;
}

PairSplit extract_pairs(const Mat& series, const PairExtractionConfig& cfg) {
    if (cfg.dt < 0) throw PreconditionError("extract_pairs: dt must be >= 0");
    if (cfg.M_train < 1 || cfg.M_test < 0) throw PreconditionError("extract_pairs: need M_train >= 1, M_test >= 0");
    const Eigen::Index avail = series.cols() - cfg.dt;
    if (avail < cfg.M_train + cfg.M_test)
        throw PreconditionError("extract_pairs: series of length " + std::to_string(series.cols()) +
                                " too short for " + std::to_string(cfg.M_train + cfg.M_test) + " pairs at dt " +
                                std::to_string(cfg.dt));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(avail));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    PairSplit s;
    s.train_idx.assign(idx.begin(), idx.begin() + cfg.M_train);
    s.test_idx.assign(idx.begin() + cfg.M_train, idx.begin() + cfg.M_train + cfg.M_test);
    auto build = [&](const std::vector<Eigen::Index>& ids, Mat& X, Mat& Y) {
        X.resize(series.rows(), static_cast<Eigen::Index>(ids.size()));
        Y.resize(series.rows(), static_cast<Eigen::Index>(ids.size()));
        for (std::size_t j = 0; j < ids.size(); ++j) {
            X.col(j) = series.col(ids[j]);
            Y.col(j) = series.col(ids[j] + cfg.dt);
        }
    };
    Mat Xtr, Ytr, Xte, Yte;
    build(s.train_idx, Xtr, Ytr);
    build(s.test_idx, Xte, Yte);
    double m = 0.0;
    for (const Mat* A : {&Xtr, &Ytr, &Xte, &Yte})
        if (A->cols() > 0) m = std::max(m, A->colwise().norm().maxCoeff());
    if (!(m > 0.0)) throw PreconditionError("extract_pairs: all sampled columns are zero");
    s.scale = m;
    s.train = Dataset(Xtr / m, Ytr / m, true);
    s.test = Dataset(Xte / m, Yte / m, true);
    return s;
}

CsvError::CsvError(const std::string& msg, std::size_t r, std::size_t c)
    : std::runtime_error(msg + " (row " + std::to_string(r) + ", column " + std::to_string(c) + ")"), row(r), column(c) {}

CsvTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    CsvTable t;
    std::size_t lineno = 0, width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_row(line);
        std::vector<double> vals(cells.size());
        bool numeric = true;
        std::size_t bad = 0;
        for (std::size_t c = 0; c < cells.size(); ++c)
            if (!parse_number(cells[c], &vals[c])) {
                numeric = false;
                if (!bad) bad = c + 1;
            }
        if (first) {
            first = false;
            width = cells.size();
            if (!numeric) {
                for (auto& c : cells) t.header.push_back(trim(c));
                continue;
            }
        }
        if (cells.size() != width)
            throw CsvError("ragged row: expected " + std::to_string(width) + " cells, got " +
                               std::to_string(cells.size()),
                           lineno, std::min(cells.size(), width) + 1);
        if (!numeric) throw CsvError("non-numeric cell '" + trim(cells[bad - 1]) + "'", lineno, bad);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw EmptyInput("CSV input has no data rows");
    t.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) t.data(i, j) = rows[i][j];
    return t;
}

CsvTable load_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

std::string format_csv(const Mat& data, const std::vector<std::string>& header) {
    std::string out;
    char buf[40];
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
        out += '\n';
    }
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", data(i, j));
            if (j) out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

void save_csv(const Mat& data, const std::string& path, const std::vector<std::string>& header) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << format_csv(data, header);
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    Mat X = load_csv((fs::path(dir) / "X.csv").string()).data;
    Mat Y = load_csv((fs::path(dir) / "Y.csv").string()).data;
    if (X.rows() != Y.rows() || X.cols() != Y.cols()) throw DimensionError("load_dataset: X and Y shapes differ");
    Dataset d(X, Y);
    d.normalized = d.max_input_norm() <= 1.0 + 1e-12;
    return d;
}

void save_dataset(const Dataset& d, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_csv(d.X, (fs::path(dir) / "X.csv").string());
    save_csv(d.Y, (fs::path(dir) / "Y.csv").string());
}

}  // namespace gntk::dataio
