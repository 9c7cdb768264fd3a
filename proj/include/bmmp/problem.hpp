#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bmmp/linalg.hpp"

namespace bmmp {

// Uniform prior on the nonzero signal entries.
struct SignalPrior {
    double a = 0.0;
    double b = 1.0;

    double mean() const { return 0.5 * (a + b); }
    double stddev() const { return (b - a) / std::sqrt(12.0); }
    // v_x = sqrt(m_x^2 + sigma_x^2)
    double vx() const {
        const double m = mean(), s = stddev();
        return std::sqrt(m * m + s * s);
    }
};

struct SensingModel {
    int m = 0;
    int n = 0;
    double sigma = 0.0;    // entry std of the sensing matrix
    double sigma_w = 0.0;  // noise std
};

struct ProblemInstance {
    Matrix phi;
    Vector y;
    Vector x_true;
    std::vector<int> support_true;  // sorted ascending
    int k = 0;
    SensingModel model;
    SignalPrior prior;
    std::optional<double> snr_db;  // nullopt = noiseless
    std::uint64_t seed = 0;
};

// m x n matrix with i.i.d. N(0, sigma^2) entries, column-major fill order.
Matrix gen_matrix(const SensingModel& model, std::uint64_t seed);

// k-sparse signal: support uniform over k-subsets of {0..n-1}, nonzeros
// i.i.d. from the prior. Support is returned sorted.
std::pair<Vector, std::vector<int>> gen_signal(int n, int k, const SignalPrior& prior,
                                               std::uint64_t seed);

// y = Phi x + w with w i.i.d. N(0, sigma_w^2).
Vector synthesize(const Matrix& phi, const Vector& x_true, double sigma_w, std::uint64_t seed);

// sigma_w matching SNR := E||Phi x||^2 / E||w||^2 in dB.
double sigma_w_from_snr(const Matrix& phi, const Vector& x_true, double snr_db);

// Residual threshold ||y|| * 10^(-snr_db/20); noiseless runs use the
// numerical floor 1e-7 * ||y||.
double default_epsilon(double y_norm, std::optional<double> snr_db);

// Full instance from model parameters; sub-streams for the matrix, signal
// and noise are derived from the one seed.
ProblemInstance make_instance(int m, int n, int k, const SignalPrior& prior,
                              std::optional<double> snr_db, std::uint64_t seed);

// JSON file with a schema_version field; matrices as base64 little-endian
// doubles. The noise vector is regenerated from the stored seed on load.
void save_instance(const ProblemInstance& inst, const std::string& path);
ProblemInstance load_instance(const std::string& path);

}  // namespace bmmp
