#include "bmmp/sbl.hpp"

#include <cmath>
#include <stdexcept>

namespace bmmp {

namespace {

struct Posterior {
    Vector mean;
    Vector var_diag;  // diagonal of the posterior covariance
};

void check_hyper(const Matrix& phi_sub, const Vector& gamma, double eta) {
    if (phi_sub.cols() < 1)
        throw std::invalid_argument("sbl: empty support");
    if (gamma.size() != phi_sub.cols())
        throw std::invalid_argument("sbl: gamma length mismatch");
    if (eta <= 0.0 || (gamma.array() <= 0.0).any())
        throw std::invalid_argument("sbl: hyperparameters must be positive");
}

// Posterior of the coefficients through the symmetrized a x a system
// G = S^T S + eta^2 I with S = Phi D(gamma)^{1/2}; G is positive definite
// for eta > 0 regardless of the rank of Phi.
Posterior posterior_moments(const Matrix& phi_sub, const Vector& y, const Vector& gamma,
                            double eta) {
    const Vector root = gamma.cwiseSqrt();
    const Matrix s = phi_sub * root.asDiagonal();
    Matrix g = s.transpose() * s;
    g.diagonal().array() += eta * eta;
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("sbl: covariance factorization failed");
    Posterior post;
    post.mean = root.asDiagonal() * llt.solve(s.transpose() * y);
    const Matrix g_inv = llt.solve(Matrix::Identity(g.rows(), g.cols()));
    post.var_diag = eta * eta * gamma.cwiseProduct(g_inv.diagonal());
    return post;
}

}  // namespace

double sbl_objective(const Matrix& phi_sub, const Vector& y, const Vector& gamma, double eta) {
    check_hyper(phi_sub, gamma, eta);
    const Eigen::Index m = phi_sub.rows();
    const Eigen::Index a = phi_sub.cols();
    const Matrix s = phi_sub * gamma.cwiseSqrt().asDiagonal();
    Matrix g = s.transpose() * s;
    g.diagonal().array() += eta * eta;
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("sbl_objective: factorization failed");
    const Matrix l = llt.matrixL();
    double log_det = 2.0 * static_cast<double>(m - a) * std::log(eta);
    for (Eigen::Index i = 0; i < a; ++i)
        log_det += 2.0 * std::log(l(i, i));
    const Vector c = s.transpose() * y;
    const double quad = (y.squaredNorm() - c.dot(llt.solve(c))) / (eta * eta);
    return log_det + quad;
}

SblState sbl_fit(const Matrix& phi_sub, const Vector& y, const SblConfig& config,
                 const SblState& init) {
    check_hyper(phi_sub, init.gamma, init.eta);
    const double m = static_cast<double>(phi_sub.rows());
    const double a = static_cast<double>(phi_sub.cols());
    const double eta2_floor = 1e-12 * y.squaredNorm() / m;

    SblState state = init;
    state.objective = sbl_objective(phi_sub, y, state.gamma, state.eta);
    state.iterations = 0;
    state.converged = true;
    SblState best = state;

    double prev_objective = state.objective;
    for (int iter = 0; iter < config.max_iter; ++iter) {
        const Posterior post = posterior_moments(phi_sub, y, state.gamma, state.eta);
        const double sum_ratio = (post.var_diag.array() / state.gamma.array()).sum();
        state.gamma = (post.mean.array().square() + post.var_diag.array())
                          .max(config.gamma_floor)
                          .matrix();
        const double resid = (y - phi_sub * post.mean).squaredNorm();
        const double denom = std::max(m - a + sum_ratio, 1e-12);
        state.eta = std::sqrt(std::max(resid / denom, eta2_floor));
        state.objective = sbl_objective(phi_sub, y, state.gamma, state.eta);
        state.iterations = iter + 1;
        if (state.objective < best.objective) {
            best = state;
        }
        const double change = std::abs(state.objective - prev_objective);
        if (change < config.tol * std::max(1.0, std::abs(prev_objective))) {
            best.iterations = state.iterations;
            return best;
        }
        prev_objective = state.objective;
    }
    best.iterations = state.iterations;
    best.converged = config.max_iter == 0;
    return best;
}

Vector ridge_solve(const Matrix& phi_sub, const Vector& y, const Vector& gamma, double eta) {
    check_hyper(phi_sub, gamma, eta);
    return posterior_moments(phi_sub, y, gamma, eta).mean;
}

Vector estimate_on_support(const Matrix& phi_sub, const Vector& y, EstimateMode mode,
                           double lambda) {
    if (phi_sub.cols() < 1)
        throw std::invalid_argument("estimate_on_support: empty support");
    if (mode == EstimateMode::Noiseless)
        return least_squares(phi_sub, y);
    SblState init;
    init.gamma = Vector::Ones(phi_sub.cols());
    const double m = static_cast<double>(phi_sub.rows());
    init.eta = std::sqrt(std::max(lambda, 1e-6 * y.squaredNorm() / m));
    const SblState fitted = sbl_fit(phi_sub, y, SblConfig{}, init);
    return ridge_solve(phi_sub, y, fitted.gamma, fitted.eta);
}

}  // namespace bmmp
