#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctrlsense/errors.hpp"
#include "ctrlsense/markov.hpp"
#include "ctrlsense/sensing.hpp"

namespace ctrlsense {

/// Covariance of the indicator vector of a state drawn from p: diag(p) - p p^T.
inline Matrix conditional_covariance(const Vector& p) {
    Matrix S = -p * p.transpose();
    S.diagonal() += p;
    return S;
}

/// Belief-weighted blend of the per-state observation covariances under u.
inline Matrix mixture_covariance(const ObservationModel& model, const Vector& p_pred, std::size_t u) {
    if (static_cast<std::size_t>(p_pred.size()) != model.states())
        throw DimensionMismatch("predicted belief", model.states(), static_cast<std::size_t>(p_pred.size()));
    const auto d = static_cast<Eigen::Index>(model.dim(u));
    Matrix Q = Matrix::Zero(d, d);
    bool negative = false;
    for (std::size_t i = 0; i < model.states(); ++i) {
        const double w = p_pred[static_cast<Eigen::Index>(i)];
        if (w == 0.0) continue;
        negative |= w < 0.0;
        Q.noalias() += w * model.cov(i, u);
    }
    if (negative && Eigen::LLT<Matrix>(Q).info() != Eigen::Success)
        throw NonPDMixture("mixture covariance is not positive definite (negative belief weights; "
                           "use posterior mode 'project' or 'renormalize')");
    return Q;
}

/// Gain-side quantities of one correction step, computed from the predicted
/// belief alone (no observation needed). Shared by the filter and the DP
/// stage cost.
struct GainTerms {
    Matrix gain;     // G_k, n x d(u)
    Vector y_pred;   // y_{k|k-1} = M(u) p
    Matrix pred_cov; // Sigma_{k|k-1}
};

inline GainTerms compute_gain(const ObservationModel& model, const Vector& p_pred, std::size_t u) {
    GainTerms t;
    const Matrix M = model.mean_matrix(u);
    t.pred_cov = conditional_covariance(p_pred);
    t.y_pred = M * p_pred;
    const Matrix MS = M * t.pred_cov; // d x n, equals (Sigma M^T)^T
    Matrix S = MS * M.transpose() + mixture_covariance(model, p_pred, u);
    S = 0.5 * (S + S.transpose());
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) throw SingularInnovation("innovation covariance is singular");
    t.gain = llt.solve(MS).transpose();
    return t;
}

struct FilterState {
    Vector predicted;     // p_{k|k-1}
    Vector posterior;     // raw p_{k|k}
    Matrix gain;          // G_k
    Vector predicted_obs; // y_{k|k-1}
    Matrix pred_cov;      // Sigma_{k|k-1}
};

/// Correction step: p_{k|k} = p_{k|k-1} + G_k (y - y_{k|k-1}).
inline FilterState filter_update(const ObservationModel& model, const Vector& p_pred, const Vector& y, std::size_t u) {
    if (static_cast<std::size_t>(y.size()) != model.dim(u))
        throw DimensionMismatch("observation", model.dim(u), static_cast<std::size_t>(y.size()));
    GainTerms t = compute_gain(model, p_pred, u);
    FilterState fs;
    fs.predicted = p_pred;
    fs.posterior = p_pred + t.gain * (y - t.y_pred);
    fs.gain = std::move(t.gain);
    fs.predicted_obs = std::move(t.y_pred);
    fs.pred_cov = std::move(t.pred_cov);
    return fs;
}

/// Prediction followed by correction.
inline FilterState filter_step(const ObservationModel& model, const TransitionMatrix& P, const Vector& p_prev,
                               const Vector& y, std::size_t u) {
    return filter_update(model, predict_belief(P, p_prev), y, u);
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
inline Vector project_to_simplex(const Vector& v) {
    const auto n = v.size();
    if ((v.array() >= 0.0).all() && std::abs(v.sum() - 1.0) <= 1e-12) return v;
    std::vector<double> s(v.data(), v.data() + n);
    std::sort(s.begin(), s.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumsum += s[static_cast<std::size_t>(j)];
        const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (s[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t declare_state(const Vector& p) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return static_cast<std::size_t>(best);
}

/// How the raw posterior is turned into the belief carried to the next step.
enum class PosteriorMode { raw, renormalize, project };

inline std::string to_string(PosteriorMode m) {
    switch (m) {
    case PosteriorMode::raw: return "raw";
    case PosteriorMode::renormalize: return "renormalize";
    case PosteriorMode::project: return "project";
    }
    return "project";
}

inline PosteriorMode parse_posterior_mode(const std::string& s) {
    if (s == "raw") return PosteriorMode::raw;
    if (s == "renormalize") return PosteriorMode::renormalize;
    if (s == "project") return PosteriorMode::project;
    throw ConfigError("posterior_mode must be one of raw|renormalize|project, got '" + s + "'");
}

inline Vector carry_belief(const Vector& raw, PosteriorMode mode) {
    switch (mode) {
    case PosteriorMode::raw: return raw;
    case PosteriorMode::renormalize: {
        Vector c = raw.cwiseMax(0.0);
        const double s = c.sum();
        if (s <= 0.0) return Vector::Constant(raw.size(), 1.0 / static_cast<double>(raw.size()));
        return c / s;
    }
    case PosteriorMode::project: return project_to_simplex(raw);
    }
    return raw;
}

} // namespace ctrlsense
