#include "psteer/vectors/logistic.hpp"

#include <cmath>
#include <deque>

namespace psteer::vectors {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Smooth data term (1/n) Σ softplus(−y z) over θ = [w; b].
class DataTerm {
public:
    DataTerm(const Eigen::Ref<const Matrix>& X, const Vector& signs, bool fit_intercept)
        : X_(X), y_(signs), fit_intercept_(fit_intercept), n_(static_cast<double>(X.rows())) {}

    double value_and_gradient(const Vector& theta, Vector& grad) const {
        const Eigen::Index d = X_.cols();
        const Vector z = X_ * theta.head(d) + Vector::Constant(X_.rows(), theta[d]);
        Vector r(X_.rows());
        double f = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double m = y_[i] * z[i];
            f += softplus(-m);
            r[i] = -y_[i] * sigmoid(-m);
        }
        grad.resize(d + 1);
        grad.head(d).noalias() = X_.transpose() * r / n_;
        grad[d] = fit_intercept_ ? r.sum() / n_ : 0.0;
        return f / n_;
    }

    double value(const Vector& theta) const {
        const Eigen::Index d = X_.cols();
        const Vector z = X_ * theta.head(d) + Vector::Constant(X_.rows(), theta[d]);
        double f = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) f += softplus(-y_[i] * z[i]);
        return f / n_;
    }

private:
    const Eigen::Ref<const Matrix>& X_;
    const Vector& y_;
    bool fit_intercept_;
    double n_;
};

LogisticModel fit_l2_lbfgs(const DataTerm& data, Eigen::Index d, double lambda, const LogisticOptions& opt) {
    constexpr int kHistory = 10;
    Vector theta = Vector::Zero(d + 1);
    Vector grad;

    auto objective = [&](const Vector& t, Vector& g) {
        double f = data.value_and_gradient(t, g);
        f += 0.5 * lambda * t.head(d).squaredNorm();
        g.head(d) += lambda * t.head(d);
        return f;
    };

    double f = objective(theta, grad);
    std::deque<std::pair<Vector, Vector>> history;  // (s, y)
    LogisticModel model;
    model.solver = "lbfgs";
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        if (grad.lpNorm<Eigen::Infinity>() <= opt.tolerance) {
            model.converged = true;
            break;
        }
        // two-loop recursion
        Vector q = grad;
        std::vector<double> alphas(history.size());
        for (std::size_t i = history.size(); i-- > 0;) {
            const auto& [s, y] = history[i];
            alphas[i] = s.dot(q) / y.dot(s);
            q -= alphas[i] * y;
        }
        if (!history.empty()) {
            const auto& [s, y] = history.back();
            q *= s.dot(y) / y.squaredNorm();
        } else {
            q /= std::max(1.0, grad.norm());
        }
        for (std::size_t i = 0; i < history.size(); ++i) {
            const auto& [s, y] = history[i];
            const double beta = y.dot(q) / y.dot(s);
            q += s * (alphas[i] - beta);
        }
        Vector direction = -q;
        double slope = grad.dot(direction);
        if (slope >= 0) {  // not a descent direction; fall back to steepest descent
            history.clear();
            direction = -grad / std::max(1.0, grad.norm());
            slope = grad.dot(direction);
        }

        double step = 1.0;
        Vector next, next_grad;
        double next_f = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            next = theta + step * direction;
            next_f = objective(next, next_grad);
            if (next_f <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Vector s = next - theta;
        Vector y = next_grad - grad;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            history.emplace_back(std::move(s), std::move(y));
            if (history.size() > kHistory) history.pop_front();
        }
        theta = std::move(next);
        grad = std::move(next_grad);
        f = next_f;
    }
    if (!model.converged && grad.lpNorm<Eigen::Infinity>() <= opt.tolerance) model.converged = true;
    model.iterations = it;
    model.weights = theta.head(d);
    model.intercept = theta[d];
    return model;
}

// Worst violation of the L1 optimality conditions at theta.
double l1_violation(const Vector& theta, const Vector& grad, Eigen::Index d, double lambda) {
    double worst = std::abs(grad[d]);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double v = theta[j] != 0.0 ? std::abs(grad[j] + lambda * (theta[j] > 0 ? 1.0 : -1.0))
                                         : std::max(std::abs(grad[j]) - lambda, 0.0);
        worst = std::max(worst, v);
    }
    return worst;
}

LogisticModel fit_l1_fista(const DataTerm& data, Eigen::Index d, double lambda, const LogisticOptions& opt) {
    Vector x = Vector::Zero(d + 1);
    Vector y = x;
    double t = 1.0;
    double lipschitz = 1.0;
    Vector grad_y, grad_x;

    auto prox = [&](const Vector& v, double step) {
        Vector out = v;
        const double thr = step * lambda;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double a = std::abs(v[j]) - thr;
            out[j] = a > 0 ? std::copysign(a, v[j]) : 0.0;
        }
        return out;
    };
    auto penalized = [&](const Vector& v, double smooth) { return smooth + lambda * v.head(d).lpNorm<1>(); };

    LogisticModel model;
    model.solver = "fista";
    double fx = data.value_and_gradient(x, grad_x);
    if (l1_violation(x, grad_x, d, lambda) <= opt.tolerance) {
        model.converged = true;
        model.weights = Vector::Zero(d);
        return model;
    }
    double objective_x = penalized(x, fx);
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        const double fy = data.value_and_gradient(y, grad_y);
        Vector next;
        for (int ls = 0; ls < 60; ++ls) {
            next = prox(y - grad_y / lipschitz, 1.0 / lipschitz);
            const Vector diff = next - y;
            if (data.value(next) <= fy + grad_y.dot(diff) + 0.5 * lipschitz * diff.squaredNorm() + 1e-15) break;
            lipschitz *= 2.0;
        }
        const double f_next = data.value_and_gradient(next, grad_x);
        const double objective_next = penalized(next, f_next);

        const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
        if (objective_next > objective_x) {
            // adaptive restart
            y = x;
            t = 1.0;
            continue;
        }
        y = next + ((t - 1.0) / t_next) * (next - x);
        x = std::move(next);
        t = t_next;
        objective_x = objective_next;
        lipschitz = std::max(lipschitz * 0.9, 1e-12);
        if (l1_violation(x, grad_x, d, lambda) <= opt.tolerance) {
            model.converged = true;
            ++it;
            break;
        }
    }
    model.iterations = it;
    model.weights = x.head(d);
    model.intercept = x[d];
    return model;
}

}  // namespace

double LogisticModel::accuracy(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& labels) const {
    if (X.rows() == 0) return 0.0;
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const bool predicted = probability(X.row(i).transpose()) >= 0.5;
        correct += predicted == (labels[i] > 0.5);
    }
    return static_cast<double>(correct) / static_cast<double>(X.rows());
}

LogisticModel fit_logistic(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& labels,
                           const LogisticOptions& options) {
    if (X.rows() != labels.size()) throw ContractViolation("fit_logistic: rows and labels differ in length");
    if (X.rows() == 0) throw InsufficientDataError("fit_logistic: no rows");
    if (!(options.C > 0)) throw ContractViolation("fit_logistic: C must be positive");
    if (!X.allFinite()) throw ContractViolation("fit_logistic: non-finite input");

    Vector signs(labels.size());
    for (Eigen::Index i = 0; i < labels.size(); ++i) signs[i] = labels[i] > 0.5 ? 1.0 : -1.0;
    const double lambda = 1.0 / (options.C * static_cast<double>(X.rows()));
    const DataTerm data(X, signs, options.fit_intercept);
    return options.penalty == Regularization::L2 ? fit_l2_lbfgs(data, X.cols(), lambda, options)
                                                 : fit_l1_fista(data, X.cols(), lambda, options);
}

std::pair<Matrix, Vector> stack_labeled(const Eigen::Ref<const Matrix>& up, const Eigen::Ref<const Matrix>& down) {
    if (up.cols() != down.cols()) throw ContractViolation("up and down differ in dimension");
    Matrix X(up.rows() + down.rows(), up.cols());
    X.topRows(up.rows()) = up;
    X.bottomRows(down.rows()) = down;
    Vector y(X.rows());
    y.head(up.rows()).setOnes();
    y.tail(down.rows()).setZero();
    return {std::move(X), std::move(y)};
}

}  // namespace psteer::vectors
