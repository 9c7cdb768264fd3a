#include "bmmp/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace bmmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative floor applied to var0/var1 in units of sigma^2 v_x^2.
constexpr double kVarianceFloor = 1e-12;

}  // namespace

double residual_sparsity(double residual_norm, int m, int d, double sigma, double v_x,
                         double sigma_w) {
    if (d >= m)
        throw std::invalid_argument("residual_sparsity: requires d < m");
    if (sigma <= 0.0 || v_x <= 0.0)
        throw std::invalid_argument("residual_sparsity: sigma and v_x must be positive");
    const double per_dof = residual_norm * residual_norm / static_cast<double>(m - d);
    return std::max(per_dof - sigma_w * sigma_w, 0.0) / (sigma * sigma * v_x * v_x);
}

double chi_mean_tau(int m, int d) {
    if (d >= m)
        throw std::invalid_argument("chi_mean_tau: requires d < m");
    const double dof = static_cast<double>(m - d);
    return std::exp(0.5 * std::numbers::ln2 + std::lgamma(0.5 * (1.0 + dof)) -
                    std::lgamma(0.5 * dof));
}

HypothesisStats hypothesis_stats(double residual_norm, int m, int d, double sigma, double v_x,
                                 double sigma_w) {
    HypothesisStats stats;
    stats.m = m;
    stats.d = d;
    stats.psi = residual_sparsity(residual_norm, m, d, sigma, v_x, sigma_w);
    stats.tau = chi_mean_tau(m, d);
    const double sv2 = sigma * sigma * v_x * v_x;
    const double noise = sigma_w * sigma_w;
    const double floor = kVarianceFloor * sv2;
    stats.var0 = std::max(stats.psi * sv2 + noise, floor);
    stats.var1 = std::max((stats.psi - 1.0) * sv2 + noise, floor);
    return stats;
}

double log_erfc(double x) {
    // erfc stays normal up to x ~ 26; switch to the asymptotic expansion
    // well before that.
    if (x <= 25.0)
        return std::log(std::erfc(x));
    const double x2 = x * x;
    const double series = -0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
    return -x2 - std::log(x * std::sqrt(std::numbers::pi)) + std::log1p(series);
}

double log_erf_diff(double lo, double hi) {
    if (!(lo < hi))
        throw std::invalid_argument("log_erf_diff: requires lo < hi");
    if (lo >= 0.0) {
        // erf(hi) - erf(lo) = erfc(lo) - erfc(hi)
        const double delta = log_erfc(hi) - log_erfc(lo);
        return log_erfc(lo) + std::log(-std::expm1(delta));
    }
    if (hi <= 0.0) {
        // mirror the negative axis
        const double delta = log_erfc(-lo) - log_erfc(-hi);
        return log_erfc(-hi) + std::log(-std::expm1(delta));
    }
    // signs differ: no cancellation in erf(hi) + erf(-lo)
    return std::log(std::erf(hi) + std::erf(-lo));
}

double log_likelihood_uniform(double z, const HypothesisStats& stats, double sigma, double a,
                              double b) {
    if (a >= b)
        throw std::invalid_argument("log_likelihood_uniform: requires a < b");
    const double scale = sigma * stats.tau;
    const double sqrt2_var1 = std::sqrt(2.0 * stats.var1);
    const double lo = (scale * a - z) / sqrt2_var1;
    const double hi = (scale * b - z) / sqrt2_var1;
    return z * z / (2.0 * stats.var0) + log_erf_diff(lo, hi);
}

std::optional<double> correlation(const OrthoBasis& basis, const Vector& phi_col,
                                  const Vector& residual, CorrelationKind kind) {
    if (phi_col.size() != basis.ambient_dim() || residual.size() != basis.ambient_dim())
        throw std::invalid_argument("correlation: dimension mismatch");
    if (kind == CorrelationKind::NormalizedOmp) {
        const double norm = phi_col.norm();
        if (norm == 0.0)
            return std::nullopt;
        return residual.dot(phi_col) / norm;
    }
    auto nc = basis.normalized_complement(phi_col);
    if (!nc)
        return std::nullopt;
    return residual.dot(*nc);
}

std::vector<IndexScore> score_indices(const Matrix& phi, const OrthoBasis& basis,
                                      const Vector& residual, CorrelationKind kind,
                                      const SignalPrior& prior, const HypothesisStats& stats,
                                      double sigma) {
    const Eigen::Index n = phi.cols();
    std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
    for (int idx : basis.indices())
        in_basis[static_cast<std::size_t>(idx)] = 1;

    // r is the basis residual, so r . P_perp(phi_q) = r . phi_q.
    const Vector r_phi = phi.transpose() * residual;
    const Vector col_sq = phi.colwise().squaredNorm();
    Vector span_sq = Vector::Zero(n);
    if (kind == CorrelationKind::RaOrmp && basis.size() > 0) {
        const Matrix coeffs = basis.q().transpose() * phi;
        span_sq = coeffs.colwise().squaredNorm();
    }

    std::vector<IndexScore> scores;
    scores.reserve(static_cast<std::size_t>(n) - basis.indices().size());
    for (Eigen::Index q = 0; q < n; ++q) {
        if (in_basis[static_cast<std::size_t>(q)])
            continue;
        IndexScore score;
        score.index = static_cast<int>(q);
        double denom;
        if (kind == CorrelationKind::RaOrmp) {
            const double comp_sq = std::max(col_sq[q] - span_sq[q], 0.0);
            denom = std::sqrt(comp_sq);
            if (denom <= basis.rank_tol() * std::sqrt(col_sq[q]))
                score.degenerate = true;
        } else {
            denom = std::sqrt(col_sq[q]);
            if (denom == 0.0)
                score.degenerate = true;
        }
        if (score.degenerate) {
            score.z = 0.0;
            score.theta = -kInf;
        } else {
            score.z = r_phi[q] / denom;
            score.theta = log_likelihood_uniform(score.z, stats, sigma, prior.a, prior.b);
        }
        scores.push_back(score);
    }
    return scores;
}

std::vector<int> select_top(const std::vector<IndexScore>& scores, int v) {
    std::vector<const IndexScore*> viable;
    viable.reserve(scores.size());
    for (const auto& s : scores)
        if (!s.degenerate)
            viable.push_back(&s);
    std::sort(viable.begin(), viable.end(), [](const IndexScore* a, const IndexScore* b) {
        if (a->theta != b->theta)
            return a->theta > b->theta;
        return a->index < b->index;
    });
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(v, 0)),
                                            viable.size());
    std::vector<int> selected(take);
    for (std::size_t i = 0; i < take; ++i)
        selected[i] = viable[i]->index;
    std::sort(selected.begin(), selected.end());
    return selected;
}

}  // namespace bmmp
