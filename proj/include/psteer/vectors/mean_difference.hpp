#pragma once

#include "psteer/vectors/steering_vector.hpp"

namespace psteer::vectors {

/// Mean-difference pair from ↑ and ↓ activation rows.
///
/// v↑ = (μ(up) − μ(down)) / 2 with its tail at the centroid midpoint, so the
/// head lands on μ(up); v↓ = −v↑ shares the tail and lands on μ(down). The
/// method is MDS for statement-prefill activations and MDB for Yes/No ones.
template <typename DerivedUp, typename DerivedDown>
SteeringPair derive_md(const Eigen::MatrixBase<DerivedUp>& up, const Eigen::MatrixBase<DerivedDown>& down,
                       ExtractionMode source_mode, const VectorMeta& meta = {}) {
    if (up.rows() == 0 || down.rows() == 0) throw InsufficientDataError("derive_md: empty activation set");
    if (up.cols() != down.cols()) throw ContractViolation("derive_md: up and down differ in dimension");

    const Vector mu_up = up.template cast<double>().colwise().mean().transpose();
    const Vector mu_down = down.template cast<double>().colwise().mean().transpose();
    const Vector half = (mu_up - mu_down) / 2.0;
    const double norm = half.norm();
    if (!(norm > 0.0)) throw DegenerateDirectionError("derive_md: centroids coincide");

    SteeringPair pair;
    pair.up.construct = meta.construct;
    pair.up.layer = meta.layer;
    pair.up.corpus_hash = meta.corpus_hash;
    pair.up.method = source_mode == ExtractionMode::s ? Method::MDS : Method::MDB;
    pair.up.direction = Direction::up;
    pair.up.components = half;
    pair.up.tail = (mu_up + mu_down) / 2.0;
    pair.up.norm_model_units = norm;

    pair.down = pair.up;
    pair.down.direction = Direction::down;
    pair.down.components = -half;
    return pair;
}

}  // namespace psteer::vectors
