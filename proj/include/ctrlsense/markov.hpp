#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ctrlsense/errors.hpp"
#include "ctrlsense/random.hpp"

namespace ctrlsense {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kStochasticTol = 1e-9;

struct StateSpace {
    std::size_t n = 0;
    std::vector<std::string> labels;

    StateSpace() = default;
    explicit StateSpace(std::size_t count, std::vector<std::string> names = {})
        : n(count), labels(std::move(names)) {
        if (n < 2) throw ConfigError("state space needs at least 2 states");
        if (!labels.empty() && labels.size() != n)
            throw DimensionMismatch("state labels", n, labels.size());
    }

    std::string label(std::size_t i) const {
        return labels.empty() ? std::to_string(i + 1) : labels[i];
    }
};

/// Throws NonStochastic / NegativeEntry unless P is square, entrywise in
/// [0,1], and every column sums to one within 1e-9.
inline void validate_transition_matrix(const Matrix& P) {
    if (P.rows() != P.cols())
        throw DimensionMismatch("transition matrix columns", static_cast<std::size_t>(P.rows()),
                                static_cast<std::size_t>(P.cols()));
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
        const double sum = P.col(j).sum();
        if (std::abs(sum - 1.0) > kStochasticTol) throw NonStochastic(static_cast<std::size_t>(j), sum);
    }
    for (Eigen::Index j = 0; j < P.cols(); ++j)
        for (Eigen::Index i = 0; i < P.rows(); ++i)
            if (!(P(i, j) >= 0.0 && P(i, j) <= 1.0))
                throw NegativeEntry("transition matrix entry (" + std::to_string(i + 1) + "," +
                                    std::to_string(j + 1) + ") = " + std::to_string(P(i, j)) +
                                    " outside [0,1]");
}

/// Column-stochastic transition matrix: entry (j, i) = P(x_{k+1} = j | x_k = i).
class TransitionMatrix {
public:
    TransitionMatrix() = default;
    explicit TransitionMatrix(Matrix P) : P_(std::move(P)) { validate_transition_matrix(P_); }

    static TransitionMatrix identity(std::size_t n) {
        return TransitionMatrix(Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(P_.rows()); }
    const Matrix& matrix() const noexcept { return P_; }
    double operator()(std::size_t to, std::size_t from) const {
        return P_(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from));
    }

private:
    Matrix P_;
};

/// Throws unless p has n entries summing to one and none negative.
inline void validate_distribution(const Vector& p, std::size_t n, const std::string& what) {
    if (static_cast<std::size_t>(p.size()) != n) throw DimensionMismatch(what, n, static_cast<std::size_t>(p.size()));
    if ((p.array() < 0.0).any()) throw NegativeEntry(what + " has a negative entry");
    if (std::abs(p.sum() - 1.0) > kStochasticTol)
        throw ConfigError(what + " sums to " + std::to_string(p.sum()) + ", not 1");
}

/// One-step prediction P * p.
inline Vector predict_belief(const TransitionMatrix& P, const Vector& p) {
    if (static_cast<std::size_t>(p.size()) != P.size())
        throw DimensionMismatch("belief", P.size(), static_cast<std::size_t>(p.size()));
    return P.matrix() * p;
}

struct Trajectory {
    std::vector<std::size_t> states; // x_0 .. x_L, 0-based
    std::uint64_t seed = 0;
};

/// Draws an index from a discrete distribution by inverse CDF on one uniform.
/// Deterministic given the generator state; zero-weight entries are never drawn.
template <class Gen>
std::size_t sample_categorical(const Vector& weights, Gen& gen) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double total = weights.sum();
    const double u = unif(gen) * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = static_cast<std::size_t>(i);
        if (u < acc) return static_cast<std::size_t>(i);
    }
    return last_positive;
}

inline Trajectory sample_trajectory(const TransitionMatrix& P, const Vector& initial, std::size_t steps,
                                    std::uint64_t seed) {
    validate_transition_matrix(P.matrix());
    validate_distribution(initial, P.size(), "initial distribution");
    Rng gen = make_stream(seed, {stream::trajectory});
    Trajectory traj;
    traj.seed = seed;
    traj.states.reserve(steps + 1);
    std::size_t x = sample_categorical(initial, gen);
    traj.states.push_back(x);
    for (std::size_t k = 0; k < steps; ++k) {
        x = sample_categorical(Vector(P.matrix().col(static_cast<Eigen::Index>(x))), gen);
        traj.states.push_back(x);
    }
    return traj;
}

/// Stationary vector of P (eigenvector for eigenvalue 1, normalized to sum 1).
inline Vector stationary_distribution(const TransitionMatrix& P) {
    const auto n = static_cast<Eigen::Index>(P.size());
    // Solve (P - I) s = 0 with the sum constraint replacing the last row.
    Matrix A = P.matrix() - Matrix::Identity(n, n);
    A.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs[n - 1] = 1.0;
    return A.colPivHouseholderQr().solve(rhs);
}

} // namespace ctrlsense
