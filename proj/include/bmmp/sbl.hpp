#pragma once

#include "bmmp/linalg.hpp"

namespace bmmp {

// Hyperparameter state of the evidence minimization: per-coefficient prior
// variances gamma and noise std eta.
struct SblState {
    Vector gamma;
    double eta = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool converged = true;
};

struct SblConfig {
    int max_iter = 200;
    double tol = 1e-6;  // relative objective change
    double gamma_floor = 1e-12;
};

// Evidence cost log|Sigma_y| + y^T Sigma_y^{-1} y with
// Sigma_y = eta^2 I + Phi D(gamma) Phi^T, evaluated through the a x a form
// (determinant lemma + Woodbury) for efficiency.
double sbl_objective(const Matrix& phi_sub, const Vector& y, const Vector& gamma, double eta);

// Fixed-point (EM) updates of gamma and eta^2 until the relative objective
// change drops below tol or max_iter is hit; returns the best state seen,
// with converged=false on a max_iter exit.
SblState sbl_fit(const Matrix& phi_sub, const Vector& y, const SblConfig& config,
                 const SblState& init);

// (Phi^T Phi + eta^2 D(gamma)^{-1})^{-1} Phi^T y.
Vector ridge_solve(const Matrix& phi_sub, const Vector& y, const Vector& gamma, double eta);

enum class EstimateMode { Noiseless, Noisy };

// Coefficients on a support: plain least squares in noiseless mode, SBL
// ridge in noisy mode. lambda seeds the initial eta^2 in noisy mode.
Vector estimate_on_support(const Matrix& phi_sub, const Vector& y, EstimateMode mode,
                           double lambda);

}  // namespace bmmp
