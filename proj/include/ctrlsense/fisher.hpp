#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctrlsense/errors.hpp"
#include "ctrlsense/linalg.hpp"
#include "ctrlsense/sensing.hpp"

namespace ctrlsense {

/// Quadratic-form decomposition of ln f(y|x+h,u) - ln f(y|x,u):
///   half_log_det_ratio - 1/2 (y^T A y - 2 y^T b + c)
struct ScoreTerms {
    Matrix A;                        // Q_{x+h}^{-1} - Q_x^{-1}
    Vector b;                        // Q_{x+h}^{-1} m_{x+h} - Q_x^{-1} m_x
    double c = 0.0;                  // m_{x+h}^T Q_{x+h}^{-1} m_{x+h} - m_x^T Q_x^{-1} m_x
    double half_log_det_ratio = 0.0; // ln sqrt(|Q_x| / |Q_{x+h}|)
};

inline void check_test_point(std::size_t n, std::size_t x, int h) {
    const auto target = static_cast<long long>(x) + h;
    if (x >= n) throw InvalidTestPoint("state " + std::to_string(x + 1) + " out of range");
    if (h == 0 || target < 0 || target >= static_cast<long long>(n))
        throw InvalidTestPoint("test point h = " + std::to_string(h) + " is invalid for state " + std::to_string(x + 1) +
                               " of " + std::to_string(n));
}

inline ScoreTerms score_terms(const ObservationModel& model, std::size_t x, int h, std::size_t u) {
    check_test_point(model.states(), x, h);
    const auto& gx = model.component(x, u);
    const auto& gh = model.component(static_cast<std::size_t>(static_cast<long long>(x) + h), u);
    const Matrix inv_x = spd_inverse(gx.cov, "covariance");
    const Matrix inv_h = spd_inverse(gh.cov, "covariance");
    ScoreTerms t;
    t.A = inv_h - inv_x;
    const Vector wx = inv_x * gx.mean;
    const Vector wh = inv_h * gh.mean;
    t.b = wh - wx;
    t.c = gh.mean.dot(wh) - gx.mean.dot(wx);
    t.half_log_det_ratio = 0.5 * (gx.log_det - gh.log_det);
    return t;
}

/// (1/h) ln f(y|x+h,u)/f(y|x,u), evaluated through the quadratic form.
inline double generalized_score(const ScoreTerms& t, const Vector& y, int h) {
    const double quad = y.dot(t.A * y) - 2.0 * y.dot(t.b) + t.c;
    return (t.half_log_det_ratio - 0.5 * quad) / static_cast<double>(h);
}

inline double generalized_score(const ObservationModel& model, const Vector& y, std::size_t x, int h, std::size_t u) {
    if (static_cast<std::size_t>(y.size()) != model.dim(u))
        throw DimensionMismatch("observation", model.dim(u), static_cast<std::size_t>(y.size()));
    return generalized_score(score_terms(model, x, h, u), y, h);
}

/// E[S] under y ~ N(m_x, Q_x); equals -KL(f(.|x,u) || f(.|x+h,u)) / h.
inline double expected_score(const ObservationModel& model, std::size_t x, int h, std::size_t u) {
    const ScoreTerms t = score_terms(model, x, h, u);
    const auto& g = model.component(x, u);
    const double mu = t.half_log_det_ratio - 0.5 * (t.A * g.cov).trace() - 0.5 * g.mean.dot(t.A * g.mean) +
                      g.mean.dot(t.b) - 0.5 * t.c;
    return mu / static_cast<double>(h);
}

/// Var[S] under y ~ N(m_x, Q_x):
///   (1/h^2) [ 1/2 tr((A Q_x)^2) + (A m_x - b)^T Q_x (A m_x - b) ].
/// S is affine in the quadratic form 1/2 y^T A y - y^T b, whose Gaussian
/// variance expands to exactly these two terms.
inline double generalized_fisher_info(const ObservationModel& model, std::size_t x, int h, std::size_t u) {
    const ScoreTerms t = score_terms(model, x, h, u);
    const auto& g = model.component(x, u);
    const Matrix AQ = t.A * g.cov;
    const Vector r = t.A * g.mean - t.b;
    const double var = 0.5 * (AQ * AQ).trace() + r.dot(g.cov * r);
    const double h2 = static_cast<double>(h) * static_cast<double>(h);
    // exact variance; a negative value can only be rounding
    return std::max(0.0, var / h2);
}

/// E[S^2], the uncentered second moment. Diagnostic only: the generalized
/// score has nonzero mean, so this is not the variance.
inline double score_second_moment(const ObservationModel& model, std::size_t x, int h, std::size_t u) {
    const double m = expected_score(model, x, h, u);
    return generalized_fisher_info(model, x, h, u) + m * m;
}

/// Offsets h != 0 with x + h a valid state, ascending.
inline std::vector<int> enumerate_test_points(std::size_t n, std::size_t x) {
    std::vector<int> hs;
    for (long long target = 0; target < static_cast<long long>(n); ++target)
        if (target != static_cast<long long>(x)) hs.push_back(static_cast<int>(target - static_cast<long long>(x)));
    return hs;
}

namespace instrumentation {
/// Number of phi() evaluations since process start.
inline std::atomic<std::size_t>& phi_evaluations() {
    static std::atomic<std::size_t> count{0};
    return count;
}
} // namespace instrumentation

struct PhiValue {
    double value = 0.0;
    int best_h = 0;
};

/// max over valid h of the generalized Fisher information at (x, u).
/// Ties prefer the smaller |h|, then the smaller h.
inline PhiValue phi(const ObservationModel& model, std::size_t x, std::size_t u) {
    instrumentation::phi_evaluations().fetch_add(1, std::memory_order_relaxed);
    PhiValue best{-1.0, 0};
    for (int h : enumerate_test_points(model.states(), x)) {
        const double v = generalized_fisher_info(model, x, h, u);
        const bool better = v > best.value ||
                            (v == best.value && (std::abs(h) < std::abs(best.best_h) ||
                                                 (std::abs(h) == std::abs(best.best_h) && h < best.best_h)));
        if (better) best = {v, h};
    }
    return best;
}

/// Offline lookup table for the greedy Fisher policy: phi(x, u) for every
/// state and control, plus the maximizing control per state.
struct FisherTable {
    Matrix phi;                            // n x alpha
    std::vector<std::vector<int>> best_h;  // n x alpha
    std::vector<std::size_t> best_control; // n
    std::size_t phi_evaluations = 0;

    std::size_t states() const noexcept { return static_cast<std::size_t>(phi.rows()); }
    std::size_t controls() const noexcept { return static_cast<std::size_t>(phi.cols()); }
};

/// Index of the largest entry in row x of phi, lowest control index on ties.
inline std::size_t argmax_control(const Matrix& phi_values, std::size_t x) {
    const auto row = phi_values.row(static_cast<Eigen::Index>(x));
    Eigen::Index best = 0;
    for (Eigen::Index u = 1; u < row.size(); ++u)
        if (row[u] > row[best]) best = u;
    return static_cast<std::size_t>(best);
}

inline FisherTable build_fisher_table(const ObservationModel& model) {
    const auto n = model.states();
    const auto alpha = model.num_controls();
    FisherTable table;
    table.phi.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(alpha));
    table.best_h.assign(n, std::vector<int>(alpha, 0));
    const auto before = instrumentation::phi_evaluations().load();
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t u = 0; u < alpha; ++u) {
            const PhiValue p = phi(model, x, u);
            table.phi(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u)) = p.value;
            table.best_h[x][u] = p.best_h;
        }
    table.phi_evaluations = instrumentation::phi_evaluations().load() - before;
    table.best_control.resize(n);
    for (std::size_t x = 0; x < n; ++x) table.best_control[x] = argmax_control(table.phi, x);
    return table;
}

} // namespace ctrlsense
