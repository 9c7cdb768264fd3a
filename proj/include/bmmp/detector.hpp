#pragma once

#include <optional>
#include <vector>

#include "bmmp/linalg.hpp"
#include "bmmp/problem.hpp"

namespace bmmp {

// Which correlation feeds the likelihood ratio: the residual against the
// normalized orthogonal complement of a column (RA-ORMP style), or against
// the plain normalized column (normalized-OMP style).
enum class CorrelationKind { RaOrmp, NormalizedOmp };

// Quantities shared by every score at a fixed partial support of size d.
struct HypothesisStats {
    double psi = 0.0;   // estimate of |Omega \ Delta|
    double tau = 0.0;   // chi mean with m-d degrees of freedom
    double var0 = 0.0;  // null-hypothesis variance
    double var1 = 0.0;  // true-hypothesis variance
    int d = 0;
    int m = 0;
};

struct IndexScore {
    int index = -1;
    double z = 0.0;
    double theta = 0.0;
    bool degenerate = false;  // column lies in span(Phi_Delta); never selected
};

// max(||r||^2/(m-d) - sigma_w^2, 0) / (sigma^2 v_x^2).
double residual_sparsity(double residual_norm, int m, int d, double sigma, double v_x,
                         double sigma_w);

// sqrt(2) * Gamma((1+m-d)/2) / Gamma((m-d)/2), evaluated in log-Gamma space.
double chi_mean_tau(int m, int d);

HypothesisStats hypothesis_stats(double residual_norm, int m, int d, double sigma, double v_x,
                                 double sigma_w);

// ln(erfc(x)) without underflow for large positive x.
double log_erfc(double x);

// ln(erf(hi) - erf(lo)) for lo < hi, stable when both tails are extreme.
double log_erf_diff(double lo, double hi);

// Log-likelihood ratio that an index with correlation z is in the support,
// under the uniform(a, b) prior. Defined up to an additive constant
// independent of z; larger means more likely in the support.
double log_likelihood_uniform(double z, const HypothesisStats& stats, double sigma, double a,
                              double b);

// Correlation of one column with the residual; residual must be the basis
// residual P_perp y. nullopt signals a degenerate RA-ORMP complement.
std::optional<double> correlation(const OrthoBasis& basis, const Vector& phi_col,
                                  const Vector& residual, CorrelationKind kind);

// One score per column not in the basis, sorted by ascending index.
std::vector<IndexScore> score_indices(const Matrix& phi, const OrthoBasis& basis,
                                      const Vector& residual, CorrelationKind kind,
                                      const SignalPrior& prior, const HypothesisStats& stats,
                                      double sigma);

// Indices of the v largest theta values among non-degenerate scores; ties
// break by ascending index. Takes all non-degenerate scores when fewer
// than v remain.
std::vector<int> select_top(const std::vector<IndexScore>& scores, int v);

}  // namespace bmmp
