#include "bmmp/linalg.hpp"

#include <algorithm>
#include <stdexcept>

namespace bmmp {

OrthoBasis::OrthoBasis(Eigen::Index ambient_dim, double rank_tol)
    : ambient_dim_(ambient_dim), rank_tol_(rank_tol) {
    if (ambient_dim < 1)
        throw std::invalid_argument("OrthoBasis: ambient_dim must be >= 1");
    if (rank_tol < 0.0)
        throw std::invalid_argument("OrthoBasis: rank_tol must be >= 0");
    q_.resize(ambient_dim, 0);
    r_.resize(0, 0);
}

bool OrthoBasis::extend(int index, const Vector& column) {
    if (column.size() != ambient_dim_)
        throw std::invalid_argument("OrthoBasis::extend: dimension mismatch");
    if (std::find(indices_.begin(), indices_.end(), index) != indices_.end())
        throw std::invalid_argument("OrthoBasis::extend: duplicate index");

    const Eigen::Index r = size();
    Vector coef = Vector::Zero(r);
    Vector w = column;
    if (r > 0) {
        coef = q_.transpose() * w;
        w.noalias() -= q_ * coef;
        // one reorthogonalization pass
        Vector coef2 = q_.transpose() * w;
        w.noalias() -= q_ * coef2;
        coef += coef2;
    }
    const double norm = w.norm();
    if (norm <= rank_tol_ * column.norm())
        return false;

    q_.conservativeResize(Eigen::NoChange, r + 1);
    q_.col(r) = w / norm;
    Matrix r_new = Matrix::Zero(r + 1, r + 1);
    r_new.topLeftCorner(r, r) = r_;
    r_new.block(0, r, r, 1) = coef;
    r_new(r, r) = norm;
    r_ = std::move(r_new);
    indices_.push_back(index);
    return true;
}

Vector OrthoBasis::project_complement(const Vector& v) const {
    if (v.size() != ambient_dim_)
        throw std::invalid_argument("OrthoBasis::project_complement: dimension mismatch");
    if (size() == 0)
        return v;
    Vector w = v;
    w.noalias() -= q_ * (q_.transpose() * v);
    w.noalias() -= q_ * (q_.transpose() * w);
    return w;
}

std::optional<Vector> OrthoBasis::normalized_complement(const Vector& v) const {
    Vector w = project_complement(v);
    const double norm = w.norm();
    if (norm <= rank_tol_ * v.norm())
        return std::nullopt;
    return Vector(w / norm);
}

std::pair<Vector, double> OrthoBasis::residual(const Vector& y) const {
    Vector r = project_complement(y);
    const double norm = r.norm();
    return {std::move(r), norm};
}

Vector OrthoBasis::solve_least_squares(const Vector& y) const {
    if (y.size() != ambient_dim_)
        throw std::invalid_argument("OrthoBasis::solve_least_squares: dimension mismatch");
    if (size() == 0)
        return Vector(0);
    Vector rhs = q_.transpose() * y;
    return r_.triangularView<Eigen::Upper>().solve(rhs);
}

Vector least_squares(const Matrix& phi_sub, const Vector& y) {
    if (phi_sub.rows() != y.size())
        throw std::invalid_argument("least_squares: dimension mismatch");
    if (phi_sub.cols() > phi_sub.rows())
        throw std::invalid_argument("least_squares: more columns than rows");
    OrthoBasis basis(phi_sub.rows());
    for (Eigen::Index j = 0; j < phi_sub.cols(); ++j) {
        if (!basis.extend(static_cast<int>(j), phi_sub.col(j)))
            throw std::invalid_argument("least_squares: rank-deficient input");
    }
    return basis.solve_least_squares(y);
}

}  // namespace bmmp
