#pragma once

#include <string>
#include <vector>

#include "bmmp/detector.hpp"
#include "bmmp/linalg.hpp"
#include "bmmp/problem.hpp"
#include "bmmp/sbl.hpp"

namespace bmmp {

struct SolverConfig {
    int k = 0;                  // target sparsity
    int g = 4;                  // number of support candidates
    double epsilon = 0.0;       // residual threshold
    double lambda = 0.0;        // stored epsilon^2/m; seeds the SBL eta^2
    EstimateMode mode = EstimateMode::Noiseless;
    CorrelationKind correlation = CorrelationKind::RaOrmp;
    SignalPrior prior;
    double sigma = 0.0;
    double sigma_w = 0.0;
    int max_extended_size = 0;  // 0 means m
    int replace_size = -1;      // -1 means floor(k/2)
    int gomp_t = 2;
    bool early_exit = true;     // stop remaining candidates once one meets epsilon
};

struct CandidateTrace {
    int t = 0;
    std::vector<std::vector<int>> extended_sets;
    std::vector<std::vector<int>> temp_supports;
    std::vector<double> residual_norms;
    std::vector<int> final_support;
    double final_residual = 0.0;
};

struct RecoveryResult {
    Vector x_hat;
    std::vector<int> support_hat;  // sorted ascending
    double residual_norm = 0.0;
    int chosen_candidate = 0;      // 1-based candidate id; 0 for single-candidate solvers
    std::vector<CandidateTrace> traces;
    int iterations = 0;
    double wall_time_s = 0.0;
};

// Scoring rule for the baseline family: raw residual correlation or the
// MAP log-likelihood ratio (with the correlation kind from the config).
enum class Selector { Raw, Map };

RecoveryResult bmmp(const Matrix& phi, const Vector& y, const SolverConfig& config);
RecoveryResult omp(const Matrix& phi, const Vector& y, const SolverConfig& config);
RecoveryResult gomp(const Matrix& phi, const Vector& y, const SolverConfig& config,
                    Selector selector);
RecoveryResult sp(const Matrix& phi, const Vector& y, const SolverConfig& config,
                  Selector selector);
RecoveryResult cosamp(const Matrix& phi, const Vector& y, const SolverConfig& config,
                      Selector selector);

// Least-squares coefficients on the support scattered into an n-vector.
Vector reconstruct_signal(const Matrix& phi, const Vector& y, const std::vector<int>& support);

// Solver registry. Names: bmmp, bmmp-u, bmmp-um, bmmp-ume (cumulative
// ablations: no subset replacement, then g=1, then extended size capped at
// k), omp, gomp, sp, cosamp, map-omp, map-gomp, map-sp, map-cosamp.
bool is_known_solver(const std::string& name);
const std::vector<std::string>& solver_names();
RecoveryResult solve_by_name(const std::string& name, const Matrix& phi, const Vector& y,
                             SolverConfig config);

// Fills model-derived config fields (k, epsilon, lambda, mode, prior, sigma,
// sigma_w) and the per-solver correlation default: RA-ORMP for bmmp*, the
// normalized-OMP correlation for the map-* baselines.
SolverConfig make_solver_config(const ProblemInstance& inst, const std::string& solver_name);

}  // namespace bmmp
