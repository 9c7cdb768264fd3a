#include "bmmp/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bmmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void validate_config(const Matrix& phi, const Vector& y, const SolverConfig& config) {
    if (phi.rows() != y.size())
        throw std::invalid_argument("solver: dimension mismatch between phi and y");
    if (config.k < 0 || config.k >= phi.rows())
        throw std::invalid_argument("solver: requires 0 <= k < m");
    if (config.g < 1)
        throw std::invalid_argument("solver: requires g >= 1");
    if (config.epsilon < 0.0)
        throw std::invalid_argument("solver: epsilon must be >= 0");
    if (config.replace_size > config.k)
        throw std::invalid_argument("solver: replace_size must be <= k");
}

Matrix columns(const Matrix& phi, const std::vector<int>& indices) {
    Matrix sub(phi.rows(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j)
        sub.col(static_cast<Eigen::Index>(j)) = phi.col(indices[j]);
    return sub;
}

OrthoBasis build_basis(const Matrix& phi, const std::vector<int>& indices) {
    OrthoBasis basis(phi.rows());
    for (int idx : indices)
        basis.extend(idx, phi.col(idx));  // dependent columns are skipped
    return basis;
}

double support_residual_norm(const Matrix& phi, const Vector& y,
                             const std::vector<int>& support) {
    return build_basis(phi, support).residual(y).second;
}

// Indices of the count largest |values| entries; ties by ascending index.
// values[j] belongs to global index indices[j].
std::vector<int> top_by_magnitude(const std::vector<int>& indices, const Vector& values,
                                  int count) {
    std::vector<std::size_t> order(indices.size());
    for (std::size_t j = 0; j < order.size(); ++j)
        order[j] = j;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ma = std::abs(values[static_cast<Eigen::Index>(a)]);
        const double mb = std::abs(values[static_cast<Eigen::Index>(b)]);
        if (ma != mb)
            return ma > mb;
        return indices[a] < indices[b];
    });
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(count, 0)),
                                            order.size());
    std::vector<int> out(take);
    for (std::size_t j = 0; j < take; ++j)
        out[j] = indices[order[j]];
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<IndexScore> map_scores(const Matrix& phi, const OrthoBasis& basis,
                                   const Vector& residual, double residual_norm,
                                   const SolverConfig& config) {
    if (config.sigma <= 0.0)
        throw std::invalid_argument("solver: MAP scoring requires sigma > 0");
    const HypothesisStats stats =
        hypothesis_stats(residual_norm, static_cast<int>(phi.rows()),
                         static_cast<int>(basis.size()), config.sigma, config.prior.vx(),
                         config.sigma_w);
    return score_indices(phi, basis, residual, config.correlation, config.prior, stats,
                         config.sigma);
}

// Extends the basis by up to v columns ranked by |r . phi_q|; dependent
// columns are passed over in rank order. Returns the number accepted.
int extend_by_raw_correlation(const Matrix& phi, OrthoBasis& basis, const Vector& residual,
                              int v) {
    const Eigen::Index n = phi.cols();
    std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
    for (int idx : basis.indices())
        in_basis[static_cast<std::size_t>(idx)] = 1;
    const Vector corr = phi.transpose() * residual;
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index q = 0; q < n; ++q)
        if (!in_basis[static_cast<std::size_t>(q)])
            order.push_back(static_cast<int>(q));
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ma = std::abs(corr[a]);
        const double mb = std::abs(corr[b]);
        if (ma != mb)
            return ma > mb;
        return a < b;
    });
    int accepted = 0;
    for (int idx : order) {
        if (accepted == v)
            break;
        if (basis.extend(idx, phi.col(idx)))
            ++accepted;
    }
    return accepted;
}

int extend_by_map(const Matrix& phi, OrthoBasis& basis, const Vector& residual,
                  double residual_norm, const SolverConfig& config, int v) {
    const auto scores = map_scores(phi, basis, residual, residual_norm, config);
    const auto selected = select_top(scores, v);
    int accepted = 0;
    for (int idx : selected)
        if (basis.extend(idx, phi.col(idx)))
            ++accepted;
    return accepted;
}

RecoveryResult finalize(const Matrix& phi, const Vector& y, std::vector<int> support,
                        std::vector<CandidateTrace> traces, int chosen, int iterations,
                        Clock::time_point start) {
    std::sort(support.begin(), support.end());
    RecoveryResult result;
    result.x_hat = reconstruct_signal(phi, y, support);
    result.support_hat = std::move(support);
    result.residual_norm = support_residual_norm(phi, y, result.support_hat);
    result.chosen_candidate = chosen;
    result.traces = std::move(traces);
    result.iterations = iterations;
    result.wall_time_s = seconds_since(start);
    return result;
}

RecoveryResult trivial_zero_result(const Matrix& phi, Clock::time_point start) {
    RecoveryResult result;
    result.x_hat = Vector::Zero(phi.cols());
    result.wall_time_s = seconds_since(start);
    return result;
}

// Coefficient estimate on the current extended set, in basis index order.
Vector extended_estimate(const Matrix& phi, const Vector& y, const std::vector<int>& delta,
                         const SolverConfig& config) {
    return estimate_on_support(columns(phi, delta), y, config.mode, config.lambda);
}

}  // namespace

Vector reconstruct_signal(const Matrix& phi, const Vector& y, const std::vector<int>& support) {
    Vector x = Vector::Zero(phi.cols());
    if (support.empty())
        return x;
    const Vector coeffs = least_squares(columns(phi, support), y);
    for (std::size_t j = 0; j < support.size(); ++j)
        x[support[j]] = coeffs[static_cast<Eigen::Index>(j)];
    return x;
}

RecoveryResult bmmp(const Matrix& phi, const Vector& y, const SolverConfig& config) {
    const auto start = Clock::now();
    validate_config(phi, y, config);
    if (config.k == 0)
        return trivial_zero_result(phi, start);

    const int m = static_cast<int>(phi.rows());
    const int cap = config.max_extended_size > 0 ? std::min(config.max_extended_size, m) : m;
    const int reseed_size = config.replace_size >= 0 ? config.replace_size : config.k / 2;
    constexpr int kMaxOuterIterations = 200;

    std::vector<CandidateTrace> traces;
    int total_iterations = 0;
    bool met_epsilon = false;

    for (int t = 1; t <= config.g && !met_epsilon; ++t) {
        CandidateTrace trace;
        trace.t = t;

        std::vector<int> delta_seed;  // empty on candidate entry
        std::vector<int> sup_prev, sup_cur;
        double res_prev = kInf, res_cur = kInf;
        int i = 1;

        while (i == 1 || res_cur < res_prev) {
            // grow the extended support estimate
            OrthoBasis basis = build_basis(phi, delta_seed);
            auto [residual, res_norm] = basis.residual(y);
            bool first_batch = basis.size() == 0;
            while (static_cast<int>(basis.size()) < cap &&
                   (first_batch || res_norm > config.epsilon)) {
                first_batch = false;
                const int v = std::min(t, cap - static_cast<int>(basis.size()));
                if (extend_by_map(phi, basis, residual, res_norm, config, v) == 0)
                    break;  // every remaining column is degenerate
                std::tie(residual, res_norm) = basis.residual(y);
            }
            const std::vector<int> delta = basis.indices();
            {
                std::vector<int> sorted_delta = delta;
                std::sort(sorted_delta.begin(), sorted_delta.end());
                trace.extended_sets.push_back(std::move(sorted_delta));
            }

            std::vector<int> omega_bar;
            delta_seed.clear();
            if (!delta.empty()) {
                const Vector coeffs = extended_estimate(phi, y, delta, config);
                omega_bar = top_by_magnitude(delta, coeffs, config.k);
                delta_seed = top_by_magnitude(delta, coeffs, reseed_size);
            }
            const double omega_res = support_residual_norm(phi, y, omega_bar);
            trace.temp_supports.push_back(omega_bar);
            trace.residual_norms.push_back(omega_res);

            sup_prev = std::move(sup_cur);
            res_prev = res_cur;
            sup_cur = omega_bar;
            res_cur = omega_res;
            ++i;
            ++total_iterations;
            if (i > kMaxOuterIterations) {
                sup_prev = sup_cur;
                res_prev = res_cur;
                break;
            }
        }

        trace.final_support = sup_prev;
        trace.final_residual = res_prev;
        traces.push_back(std::move(trace));

        if (config.early_exit && res_prev <= config.epsilon)
            met_epsilon = true;
    }

    // minimal-residual candidate, smallest t on ties
    int chosen = 0;
    double best_res = kInf;
    for (std::size_t c = 0; c < traces.size(); ++c) {
        if (traces[c].final_residual < best_res) {
            best_res = traces[c].final_residual;
            chosen = static_cast<int>(c) + 1;
        }
    }
    if (chosen == 0)
        chosen = 1;  // defensive: comparisons with non-finite residuals all fail
    // copy before std::move(traces): argument evaluation order is unspecified
    std::vector<int> winner = traces[static_cast<std::size_t>(chosen - 1)].final_support;
    return finalize(phi, y, std::move(winner), std::move(traces), chosen, total_iterations,
                    start);
}

RecoveryResult omp(const Matrix& phi, const Vector& y, const SolverConfig& config) {
    const auto start = Clock::now();
    validate_config(phi, y, config);
    if (config.k == 0)
        return trivial_zero_result(phi, start);

    OrthoBasis basis(phi.rows());
    auto [residual, res_norm] = basis.residual(y);
    CandidateTrace trace;
    trace.t = 1;
    int iterations = 0;
    while (static_cast<int>(basis.size()) < config.k && res_norm > config.epsilon) {
        if (extend_by_raw_correlation(phi, basis, residual, 1) == 0)
            break;
        std::tie(residual, res_norm) = basis.residual(y);
        trace.residual_norms.push_back(res_norm);
        ++iterations;
    }
    std::vector<int> support = basis.indices();
    std::sort(support.begin(), support.end());
    trace.final_support = support;
    trace.final_residual = res_norm;
    trace.temp_supports.push_back(support);
    return finalize(phi, y, std::move(support), {std::move(trace)}, 0, iterations, start);
}

RecoveryResult gomp(const Matrix& phi, const Vector& y, const SolverConfig& config,
                    Selector selector) {
    const auto start = Clock::now();
    validate_config(phi, y, config);
    if (config.k == 0)
        return trivial_zero_result(phi, start);
    const int t = config.gomp_t;
    if (t < 1 || t > config.k)
        throw std::invalid_argument("gomp: requires 1 <= t <= k");

    const int m = static_cast<int>(phi.rows());
    const int max_steps = std::min(config.k, m / t);
    const int cap = t * max_steps;

    OrthoBasis basis(phi.rows());
    auto [residual, res_norm] = basis.residual(y);
    CandidateTrace trace;
    trace.t = 1;
    int iterations = 0;
    while (iterations < max_steps && static_cast<int>(basis.size()) < cap &&
           res_norm > config.epsilon) {
        const int v = std::min(t, cap - static_cast<int>(basis.size()));
        int accepted;
        if (selector == Selector::Raw)
            accepted = extend_by_raw_correlation(phi, basis, residual, v);
        else
            accepted = extend_by_map(phi, basis, residual, res_norm, config, v);
        if (accepted == 0)
            break;
        std::tie(residual, res_norm) = basis.residual(y);
        trace.residual_norms.push_back(res_norm);
        ++iterations;
    }

    std::vector<int> delta = basis.indices();
    std::vector<int> support;
    if (static_cast<int>(delta.size()) > config.k) {
        const Vector coeffs = extended_estimate(phi, y, delta, config);
        support = top_by_magnitude(delta, coeffs, config.k);
    } else {
        support = delta;
        std::sort(support.begin(), support.end());
    }
    {
        std::sort(delta.begin(), delta.end());
        trace.extended_sets.push_back(std::move(delta));
    }
    trace.final_support = support;
    trace.final_residual = support_residual_norm(phi, y, support);
    trace.temp_supports.push_back(support);
    return finalize(phi, y, std::move(support), {std::move(trace)}, 0, iterations, start);
}

namespace {

// Shared SP/CoSaMP loop: candidates_per_iter new indices are merged into the
// current support, coefficients are estimated on the union, and the k
// largest magnitudes form the next support while the residual decreases.
RecoveryResult pursuit_with_replacement(const Matrix& phi, const Vector& y,
                                        const SolverConfig& config, Selector selector,
                                        int candidates_per_iter, const char* name) {
    const auto start = Clock::now();
    validate_config(phi, y, config);
    if (config.k == 0)
        return trivial_zero_result(phi, start);
    const int m = static_cast<int>(phi.rows());
    if (config.k + candidates_per_iter > m)
        throw std::invalid_argument(std::string(name) +
                                    ": extended support size exceeds m (infeasible)");

    constexpr int kMaxIterations = 100;
    CandidateTrace trace;
    trace.t = 1;

    // initial support from the raw measurement residual
    std::vector<int> support;
    {
        OrthoBasis basis(phi.rows());
        auto [residual, res_norm] = basis.residual(y);
        if (selector == Selector::Raw)
            extend_by_raw_correlation(phi, basis, residual, config.k);
        else
            extend_by_map(phi, basis, residual, res_norm, config, config.k);
        support = basis.indices();
        std::sort(support.begin(), support.end());
    }
    double res_cur = support_residual_norm(phi, y, support);
    trace.temp_supports.push_back(support);
    trace.residual_norms.push_back(res_cur);

    int iterations = 0;
    while (iterations < kMaxIterations && res_cur > config.epsilon) {
        OrthoBasis basis = build_basis(phi, support);
        auto [residual, res_norm] = basis.residual(y);
        if (selector == Selector::Raw)
            extend_by_raw_correlation(phi, basis, residual, candidates_per_iter);
        else
            extend_by_map(phi, basis, residual, res_norm, config, candidates_per_iter);
        const std::vector<int> merged = basis.indices();
        if (merged.empty())
            break;
        {
            std::vector<int> sorted_merged = merged;
            std::sort(sorted_merged.begin(), sorted_merged.end());
            trace.extended_sets.push_back(std::move(sorted_merged));
        }
        const Vector coeffs = extended_estimate(phi, y, merged, config);
        const std::vector<int> next = top_by_magnitude(merged, coeffs, config.k);
        const double res_next = support_residual_norm(phi, y, next);
        ++iterations;
        if (res_next < res_cur) {
            support = next;
            res_cur = res_next;
            trace.temp_supports.push_back(support);
            trace.residual_norms.push_back(res_cur);
        } else {
            break;
        }
    }
    trace.final_support = support;
    trace.final_residual = res_cur;
    return finalize(phi, y, std::move(support), {std::move(trace)}, 0, iterations, start);
}

}  // namespace

RecoveryResult sp(const Matrix& phi, const Vector& y, const SolverConfig& config,
                  Selector selector) {
    return pursuit_with_replacement(phi, y, config, selector, config.k, "sp");
}

RecoveryResult cosamp(const Matrix& phi, const Vector& y, const SolverConfig& config,
                      Selector selector) {
    return pursuit_with_replacement(phi, y, config, selector, 2 * config.k, "cosamp");
}

namespace {

const std::vector<std::string> kSolverNames = {
    "bmmp", "bmmp-u", "bmmp-um", "bmmp-ume", "omp",     "gomp",
    "sp",   "cosamp", "map-omp", "map-gomp", "map-sp",  "map-cosamp",
};

}  // namespace

bool is_known_solver(const std::string& name) {
    return std::find(kSolverNames.begin(), kSolverNames.end(), name) != kSolverNames.end();
}

const std::vector<std::string>& solver_names() { return kSolverNames; }

RecoveryResult solve_by_name(const std::string& name, const Matrix& phi, const Vector& y,
                             SolverConfig config) {
    if (name == "bmmp")
        return bmmp(phi, y, config);
    if (name == "bmmp-u") {
        config.replace_size = 0;
        return bmmp(phi, y, config);
    }
    if (name == "bmmp-um") {
        config.replace_size = 0;
        config.g = 1;
        return bmmp(phi, y, config);
    }
    if (name == "bmmp-ume") {
        config.replace_size = 0;
        config.g = 1;
        config.max_extended_size = config.k;
        return bmmp(phi, y, config);
    }
    if (name == "omp")
        return omp(phi, y, config);
    if (name == "gomp")
        return gomp(phi, y, config, Selector::Raw);
    if (name == "sp")
        return sp(phi, y, config, Selector::Raw);
    if (name == "cosamp")
        return cosamp(phi, y, config, Selector::Raw);
    if (name == "map-omp") {
        config.gomp_t = 1;
        return gomp(phi, y, config, Selector::Map);
    }
    if (name == "map-gomp")
        return gomp(phi, y, config, Selector::Map);
    if (name == "map-sp")
        return sp(phi, y, config, Selector::Map);
    if (name == "map-cosamp")
        return cosamp(phi, y, config, Selector::Map);
    throw std::invalid_argument("unknown solver: " + name);
}

SolverConfig make_solver_config(const ProblemInstance& inst, const std::string& solver_name) {
    SolverConfig config;
    config.k = inst.k;
    config.mode = inst.snr_db.has_value() ? EstimateMode::Noisy : EstimateMode::Noiseless;
    config.epsilon = default_epsilon(inst.y.norm(), inst.snr_db);
    config.lambda = config.epsilon * config.epsilon / static_cast<double>(inst.model.m);
    config.prior = inst.prior;
    config.sigma = inst.model.sigma;
    config.sigma_w = inst.model.sigma_w;
    config.correlation = solver_name.rfind("bmmp", 0) == 0 ? CorrelationKind::RaOrmp
                                                           : CorrelationKind::NormalizedOmp;
    return config;
}

}  // namespace bmmp
