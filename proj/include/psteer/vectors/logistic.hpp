#pragma once

// Binary logistic regression with L1 or L2 penalty, minimizing
//
//   (1/n) Σ log(1 + exp(−y_i (w·x_i + b)))  +  R(w) / (C n),
//
// with y_i ∈ {−1, +1}, R(w) = ½‖w‖² (L2) or ‖w‖₁ (L1), and an unpenalized
// intercept b (held at 0 when not fitted). Same minimizer as the usual
// C·Σ loss + R(w) form; the scaling keeps the gradient tolerance
// independent of n.

#include "psteer/core.hpp"

namespace psteer::vectors {

struct LogisticOptions {
    Regularization penalty = Regularization::L2;
    bool fit_intercept = true;
    double C = 1.0;
    int max_iterations = 10000;
    double tolerance = 1e-3;
};

struct LogisticModel {
    Vector weights;
    double intercept = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string solver;

    template <typename Derived>
    double decision(const Eigen::MatrixBase<Derived>& x) const {
        return weights.dot(x.template cast<double>()) + intercept;
    }
    template <typename Derived>
    double probability(const Eigen::MatrixBase<Derived>& x) const {
        const double z = decision(x);
        return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
    /// Fraction of rows classified correctly (label 1 iff probability ≥ 0.5).
    double accuracy(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& labels) const;
};

/// Fits on rows of X with labels in {0, 1}. Non-convergence is reported, not thrown.
LogisticModel fit_logistic(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& labels,
                           const LogisticOptions& options);

/// Stacks up (label 1) over down (label 0).
std::pair<Matrix, Vector> stack_labeled(const Eigen::Ref<const Matrix>& up, const Eigen::Ref<const Matrix>& down);

}  // namespace psteer::vectors
