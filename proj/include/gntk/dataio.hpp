#pragma once

#include "gntk/core.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gntk::dataio {

struct VarProcessConfig {
    Eigen::Index n = 0;
    Eigen::Index T_len = 0;
    Mat A;
    double noise_scale = 1.0;
    std::uint64_t seed = 0;
};

constexpr int kBurnIn = 100;

double spectral_radius(const Mat& A);

/// z(t+1) = A z(t) + noise_scale w_t after a discarded burn-in. Columns are time points.
Mat generate_var(const VarProcessConfig& cfg);

struct PlantedTransition {
    Mat A;
    Vec u;  // dominant direction
};

/// A = a u u^T + b R with R a random matrix of unit spectral norm; needs a + b < 1.
PlantedTransition planted_transition(Eigen::Index n, double a, double b, std::uint64_t seed);

struct PairExtractionConfig {
    int dt = 1;
    Eigen::Index M_train = 0;
    Eigen::Index M_test = 0;
    std::uint64_t seed = 0;
};

struct PairSplit {
    Dataset train;
    Dataset test;
    std::vector<Eigen::Index> train_idx;
    std::vector<Eigen::Index> test_idx;
    double scale = 1.0;  // the common divisor
};

/// Random distinct start times t, x = z(t), y = z(t + dt). One global scalar makes the largest
/// column norm over train and test, inputs and outputs, equal to 1.
PairSplit extract_pairs(const Mat& series, const PairExtractionConfig& cfg);

struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed CSV content; row and column are 1-based (0 when not applicable).
struct CsvError : std::runtime_error {
    std::size_t row;
    std::size_t column;
    CsvError(const std::string& msg, std::size_t r, std::size_t c);
};

struct CsvTable {
    Mat data;
    std::vector<std::string> header;  // empty when the file had none
};

CsvTable parse_csv(const std::string& text);
CsvTable load_csv(const std::string& path);

std::string format_csv(const Mat& data, const std::vector<std::string>& header = {});
void save_csv(const Mat& data, const std::string& path, const std::vector<std::string>& header = {});

/// X.csv and Y.csv inside a directory.
Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& d, const std::string& dir);

}  // namespace gntk::dataio
