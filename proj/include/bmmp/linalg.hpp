#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

namespace bmmp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Incremental orthonormal basis of span(Phi_Delta) together with the index
// set Delta. Columns are orthogonalized by modified Gram-Schmidt with one
// reorthogonalization pass; the triangular factor is kept so least-squares
// coefficients come from back-substitution instead of normal equations.
class OrthoBasis {
public:
    explicit OrthoBasis(Eigen::Index ambient_dim, double rank_tol = 1e-10);

    Eigen::Index ambient_dim() const { return ambient_dim_; }
    Eigen::Index size() const { return static_cast<Eigen::Index>(indices_.size()); }
    const std::vector<int>& indices() const { return indices_; }
    double rank_tol() const { return rank_tol_; }

    // m x |Delta| matrix with orthonormal columns.
    const Matrix& q() const { return q_; }

    // Appends a column; returns false (basis unchanged) when the orthogonal
    // complement of the column is below rank_tol * ||column||.
    bool extend(int index, const Vector& column);

    // v - Q Q^T v.
    Vector project_complement(const Vector& v) const;

    // Unit vector along the complement, or nullopt when the complement
    // vanishes relative to rank_tol.
    std::optional<Vector> normalized_complement(const Vector& v) const;

    // (P_perp y, ||P_perp y||).
    std::pair<Vector, double> residual(const Vector& y) const;

    // Coefficients (in indices() order) minimizing ||Phi_Delta x - y||,
    // via R x = Q^T y.
    Vector solve_least_squares(const Vector& y) const;

private:
    Eigen::Index ambient_dim_;
    double rank_tol_;
    Matrix q_;  // ambient_dim x r
    Matrix r_;  // r x r upper triangular
    std::vector<int> indices_;
};

// Least squares on an explicit full-column-rank submatrix. Throws
// std::invalid_argument on rank deficiency; never regularizes.
Vector least_squares(const Matrix& phi_sub, const Vector& y);

}  // namespace bmmp
