#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "ctrlsense/errors.hpp"

namespace ctrlsense {

inline constexpr double kCholeskyJitter = 1e-10;

/// Lower Cholesky factor of a symmetric matrix. On failure, retries once
/// with kCholeskyJitter * I added to the diagonal, then throws.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& S, const std::string& what) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::MatrixXd jittered = S;
    jittered.diagonal().array() += kCholeskyJitter;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    throw CholeskyFailure(what + " is not numerically positive definite");
}

inline double log_det_from_cholesky(const Eigen::MatrixXd& L) {
    return 2.0 * L.diagonal().array().log().sum();
}

/// S^{-1} via its Cholesky factor (used where an explicit inverse is part of
/// the formula, e.g. the precision differences in the Fisher terms).
inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& S, const std::string& what) {
    const Eigen::MatrixXd L = cholesky_lower(S, what);
    Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(S.rows(), S.cols());
    L.triangularView<Eigen::Lower>().solveInPlace(inv);
    L.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
    return 0.5 * (inv + inv.transpose());
}

inline bool is_symmetric(const Eigen::MatrixXd& S, double tol) {
    return S.rows() == S.cols() && (S - S.transpose()).cwiseAbs().maxCoeff() <= tol;
}

} // namespace ctrlsense
