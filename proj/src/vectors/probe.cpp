#include "psteer/vectors/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace psteer::vectors {

std::string SteeringVector::id() const {
    return construct + "/" + to_string(method) + "/" + std::to_string(layer) + "/" + to_string(direction);
}

SteeringVector hyperplane_vector(const LogisticModel& probe, const Vector& centroid, Direction direction,
                                 Method method, const VectorMeta& meta) {
    const double w2 = probe.weights.squaredNorm();
    if (!(w2 > 0.0)) throw DegenerateDirectionError("probe weights are zero");
    const double t = (probe.weights.dot(centroid) + probe.intercept) / w2;

    SteeringVector v;
    v.construct = meta.construct;
    v.layer = meta.layer;
    v.corpus_hash = meta.corpus_hash;
    v.method = method;
    v.direction = direction;
    v.components = t * probe.weights;
    v.tail = centroid - v.components;
    v.norm_model_units = v.components.norm();
    if (!(v.norm_model_units > 0.0))
        throw DegenerateDirectionError("centroid lies on the decision boundary for " + to_string(direction));
    return v;
}

std::pair<SteeringPair, ProbeReport> derive_probe(const Eigen::Ref<const Matrix>& up,
                                                  const Eigen::Ref<const Matrix>& down, Regularization reg,
                                                  Intercept intercept, const VectorMeta& meta,
                                                  const ProbeOptions& options) {
    if (up.rows() != down.rows() || up.rows() < 2)
        throw InsufficientDataError("derive_probe needs |up| = |down| >= 2");
    const auto [X, y] = stack_labeled(up, down);
    LogisticOptions lo;
    lo.penalty = reg;
    lo.fit_intercept = intercept == Intercept::LI;
    lo.C = options.C;
    lo.max_iterations = options.max_iterations;
    lo.tolerance = options.tolerance;
    const LogisticModel probe = fit_logistic(X, y, lo);

    // Relative to the data scale so that up == down reliably counts as degenerate.
    const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
    if (probe.weights.norm() <= 1e-10 / scale) throw DegenerateDirectionError("probe weights vanish");

    const Method method = probe_method(reg, intercept);
    const Vector mu_up = up.colwise().mean().transpose();
    const Vector mu_down = down.colwise().mean().transpose();
    SteeringPair pair{hyperplane_vector(probe, mu_up, Direction::up, method, meta),
                      hyperplane_vector(probe, mu_down, Direction::down, method, meta)};

    ProbeReport report;
    report.method = method;
    report.layer = meta.layer;
    report.train_accuracy = probe.accuracy(X, y);
    report.iterations_used = probe.iterations;
    report.converged = probe.converged;
    report.C = options.C;
    report.solver = probe.solver;
    return {std::move(pair), report};
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> stratified_split(Eigen::Index n, double fraction,
                                                                                 std::uint64_t seed) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    // Fisher-Yates with our own draws: std::shuffle's draw pattern is implementation-defined.
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    std::vector<Eigen::Index> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<Eigen::Index> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

std::vector<ProbeReport> separability_report(const Eigen::Ref<const Matrix>& up,
                                             const Eigen::Ref<const Matrix>& down, double train_fraction,
                                             std::uint64_t seed, int layer, const ProbeOptions& options) {
    if (up.rows() < 5 || down.rows() < 5) throw InsufficientDataError("separability_report needs >= 5 rows per class");
    if (up.cols() != down.cols()) throw ContractViolation("up and down differ in dimension");

    const auto [up_train, up_test] = stratified_split(up.rows(), train_fraction, seed);
    const auto [down_train, down_test] = stratified_split(down.rows(), train_fraction, seed + 1);
    const Matrix up_tr = up(up_train, Eigen::all), up_te = up(up_test, Eigen::all);
    const Matrix dn_tr = down(down_train, Eigen::all), dn_te = down(down_test, Eigen::all);
    const auto [X_train, y_train] = stack_labeled(up_tr, dn_tr);
    const auto [X_test, y_test] = stack_labeled(up_te, dn_te);

    std::vector<ProbeReport> reports;
    for (auto reg : {Regularization::L1, Regularization::L2}) {
        for (auto icpt : {Intercept::LI, Intercept::ZI}) {
            LogisticOptions lo;
            lo.penalty = reg;
            lo.fit_intercept = icpt == Intercept::LI;
            lo.C = options.C;
            lo.max_iterations = options.max_iterations;
            lo.tolerance = options.tolerance;
            const LogisticModel probe = fit_logistic(X_train, y_train, lo);
            ProbeReport r;
            r.method = probe_method(reg, icpt);
            r.layer = layer;
            r.train_accuracy = probe.accuracy(X_train, y_train);
            r.test_accuracy = X_test.rows() > 0 ? std::optional(probe.accuracy(X_test, y_test)) : std::nullopt;
            r.iterations_used = probe.iterations;
            r.converged = probe.converged;
            r.C = options.C;
            r.solver = probe.solver;
            r.seed = seed;
            reports.push_back(r);
        }
    }
    return reports;
}

}  // namespace psteer::vectors
