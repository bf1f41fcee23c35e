#pragma once

// Probe-normal steering vectors (L1LI, L1ZI, L2LI, L2ZI).
//
// A logistic probe separates ↑ (label 1) from ↓ (label 0). For each
// direction the vector is the orthogonal displacement from the hyperplane
// {x : w·x + b = 0} to that direction's centroid, so its tail is the foot of
// the perpendicular and its head the centroid.

#include "psteer/vectors/logistic.hpp"
#include "psteer/vectors/steering_vector.hpp"

#include <optional>
#include <vector>

namespace psteer::vectors {

struct ProbeOptions {
    double C = 1.0;
    int max_iterations = 10000;
    double tolerance = 1e-3;
};

struct ProbeReport {
    Method method = Method::L2LI;
    int layer = 0;
    double train_accuracy = 0.0;
    std::optional<double> test_accuracy;
    int iterations_used = 0;
    bool converged = false;
    double C = 1.0;
    std::string solver;
    std::optional<std::uint64_t> seed;
};

/// Displacement from the hyperplane to `centroid`, as a steering vector.
SteeringVector hyperplane_vector(const LogisticModel& probe, const Vector& centroid, Direction direction,
                                 Method method, const VectorMeta& meta);

std::pair<SteeringPair, ProbeReport> derive_probe(const Eigen::Ref<const Matrix>& up,
                                                  const Eigen::Ref<const Matrix>& down, Regularization reg,
                                                  Intercept intercept, const VectorMeta& meta = {},
                                                  const ProbeOptions& options = {});

/// Stratified train/test probes for all four (reg, intercept) settings.
std::vector<ProbeReport> separability_report(const Eigen::Ref<const Matrix>& up,
                                             const Eigen::Ref<const Matrix>& down, double train_fraction = 0.8,
                                             std::uint64_t seed = 0, int layer = 0,
                                             const ProbeOptions& options = {});

/// Stratified split of `n` indices: the first round(n * fraction) of a seeded shuffle train.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> stratified_split(Eigen::Index n, double fraction,
                                                                                 std::uint64_t seed);

}  // namespace psteer::vectors
