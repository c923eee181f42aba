#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ctrlsense/belief_grid.hpp"
#include "ctrlsense/errors.hpp"
#include "ctrlsense/kalman.hpp"
#include "ctrlsense/markov.hpp"
#include "ctrlsense/parallel.hpp"
#include "ctrlsense/random.hpp"
#include "ctrlsense/sensing.hpp"

namespace ctrlsense {

/// h(e_i, p, u) = 1 - tr(G^T G Q_i^u) - || p + G (m_i^u - y_pred) ||^2 for
/// i = 1..n, with G and y_pred the filter gain and predicted observation at
/// predicted belief p. p^T h is the expected squared error of the filtered
/// estimate after one measurement under u.
inline Vector dp_stage_cost_vector(const ObservationModel& model, const Vector& p_pred, std::size_t u) {
    const GainTerms t = compute_gain(model, p_pred, u);
    const auto n = model.states();
    Vector h(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& g = model.component(i, u);
        const double tr = (t.gain * g.cov).cwiseProduct(t.gain).sum();
        const Vector v = p_pred + t.gain * (g.mean - t.y_pred);
        h[static_cast<Eigen::Index>(i)] = 1.0 - tr - v.squaredNorm();
    }
    return h;
}

inline double dp_stage_cost(const ObservationModel& model, const Vector& p_pred, std::size_t u) {
    return p_pred.dot(dp_stage_cost_vector(model, p_pred, u));
}

/// One stage of the quantized DP: for every grid point, the bracket value of
/// each control, its Monte-Carlo standard error, and the minimizer.
struct StageTable {
    Matrix bracket;    // points x alpha
    Matrix bracket_se; // points x alpha (0 for the terminal stage)
    std::vector<std::size_t> best_control;
    std::vector<double> value;

    std::size_t points() const noexcept { return value.size(); }
};

inline void finalize_stage(StageTable& t) {
    const auto points = static_cast<std::size_t>(t.bracket.rows());
    t.best_control.resize(points);
    t.value.resize(points);
    for (std::size_t k = 0; k < points; ++k) {
        const auto row = t.bracket.row(static_cast<Eigen::Index>(k));
        Eigen::Index best = 0;
        for (Eigen::Index u = 1; u < row.size(); ++u)
            if (row[u] < row[best]) best = u;
        t.best_control[k] = static_cast<std::size_t>(best);
        t.value[k] = row[best];
    }
}

/// Terminal stage: J_L(p) = min_u p^T h(p, u).
inline StageTable dp_terminal(const ObservationModel& model, const BeliefGrid& grid, std::size_t threads = 1) {
    const auto alpha = model.num_controls();
    StageTable t;
    t.bracket.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(alpha));
    t.bracket_se = Matrix::Zero(t.bracket.rows(), t.bracket.cols());
    parallel_for(grid.size(), threads, [&](std::size_t k) {
        const Vector p = grid.point(k);
        for (std::size_t u = 0; u < alpha; ++u)
            t.bracket(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(u)) = dp_stage_cost(model, p, u);
    });
    finalize_stage(t);
    return t;
}

/// Exact Bayes map used inside the DP recursion:
///   p' = P r(y,u) p / (1^T r(y,u) p), computed in log space.
/// `logw` is scratch of size n. Returns the normalized posterior before prediction in `post`.
inline void bayes_posterior(const ObservationModel& model, const Vector& p, const Vector& y, std::size_t u,
                            Vector& logw, Vector& post, Vector& scratch) {
    const auto n = static_cast<Eigen::Index>(model.states());
    logw.resize(n);
    post.resize(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (p[j] <= 0.0) {
            logw[j] = -std::numeric_limits<double>::infinity();
            continue;
        }
        logw[j] = log_pdf(model.component(static_cast<std::size_t>(j), u), y, scratch) + std::log(p[j]);
        mx = std::max(mx, logw[j]);
    }
    if (!std::isfinite(mx)) throw DegenerateLikelihood("likelihood underflow: 1^T r(y,u) p = 0");
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        post[j] = std::isfinite(logw[j]) ? std::exp(logw[j] - mx) : 0.0;
        s += post[j];
    }
    post /= s;
}

/// Backup: bracket(p,u) = p^T h(p,u) + E_y[J_{k+1}(nearest(P r p / 1^T r p))],
/// where y is drawn from the belief mixture sum_i p_i f(.|i,u) (the exact
/// marginal, so the continuation is a plain sample mean). Each (point, control)
/// pair uses its own derived RNG stream.
inline StageTable dp_backup(const ObservationModel& model, const TransitionMatrix& P, const BeliefGrid& grid,
                            const StageTable& next, std::size_t mc_samples, std::uint64_t seed,
                            std::uint64_t stage_key = 0, std::size_t threads = 1) {
    const auto alpha = model.num_controls();
    StageTable t;
    t.bracket.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(alpha));
    t.bracket_se.resize(t.bracket.rows(), t.bracket.cols());
    parallel_for(grid.size(), threads, [&](std::size_t k) {
        const Vector p = grid.point(k);
        Vector logw, post, scratch, z, y, nxt;
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t u = 0; u < alpha; ++u) {
            const double stage = dp_stage_cost(model, p, u);
            double sum = 0.0, sum_sq = 0.0;
            if (mc_samples > 0) {
                Rng gen = make_stream(seed, {stream::dp, stage_key, k, u});
                const auto d = static_cast<Eigen::Index>(model.dim(u));
                z.resize(d);
                for (std::size_t m = 0; m < mc_samples; ++m) {
                    const std::size_t i = sample_categorical(p, gen);
                    const auto& g = model.component(i, u);
                    for (Eigen::Index r = 0; r < d; ++r) z[r] = normal(gen);
                    y.noalias() = g.mean + g.chol.triangularView<Eigen::Lower>() * z;
                    bayes_posterior(model, p, y, u, logw, post, scratch);
                    nxt.noalias() = P.matrix() * post;
                    const double v = next.value[grid.nearest(nxt)];
                    sum += v;
                    sum_sq += v * v;
                }
            }
            const double M = static_cast<double>(mc_samples);
            const double mean = mc_samples > 0 ? sum / M : 0.0;
            const double var = mc_samples > 1 ? std::max(0.0, (sum_sq - M * mean * mean) / (M - 1.0)) : 0.0;
            t.bracket(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(u)) = stage + mean;
            t.bracket_se(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(u)) =
                mc_samples > 0 ? std::sqrt(var / M) : 0.0;
        }
    });
    finalize_stage(t);
    return t;
}

/// Finite-horizon DP policy over the quantized predicted-belief simplex.
/// stages[k-1] is the stage-k table, k = 1..L; stage L is terminal.
struct DpPolicy {
    BeliefGrid grid;
    std::vector<StageTable> stages;
    std::size_t mc_samples = 0;
    std::uint64_t seed = 0;

    std::size_t horizon() const noexcept { return stages.size(); }

    const StageTable& stage(std::size_t k) const { return stages.at(k - 1); }

    /// Stage to consult when `remaining` measurements (this one included)
    /// are left in the episode: the last measurement uses the terminal stage,
    /// and anything further out than the horizon uses stage 1.
    std::size_t stage_for_remaining(std::size_t remaining) const {
        const auto L = horizon();
        if (remaining >= L) return 1;
        return L - remaining + 1;
    }
};

inline DpPolicy dp_solve(const ObservationModel& model, const TransitionMatrix& P, std::size_t horizon,
                         std::size_t resolution, std::size_t mc_samples, std::uint64_t seed, std::size_t threads = 1) {
    if (horizon < 1) throw ConfigError("DP horizon must be >= 1");
    if (P.size() != model.states()) throw DimensionMismatch("transition matrix", model.states(), P.size());
    DpPolicy policy;
    policy.grid = BeliefGrid(model.states(), resolution);
    policy.mc_samples = mc_samples;
    policy.seed = seed;
    policy.stages.resize(horizon);
    policy.stages[horizon - 1] = dp_terminal(model, policy.grid, threads);
    for (std::size_t k = horizon - 1; k >= 1; --k)
        policy.stages[k - 1] = dp_backup(model, P, policy.grid, policy.stages[k], mc_samples, seed, k, threads);
    return policy;
}

} // namespace ctrlsense
