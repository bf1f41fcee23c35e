#pragma once

#include "psteer/core.hpp"

#include <string>

namespace psteer::vectors {

/// A layer-specific steering direction whose length is one centroid unit:
/// the distance from the tail reference point to the direction's centroid.
struct SteeringVector {
    std::string construct;
    Method method = Method::MDS;
    int layer = 0;
    Direction direction = Direction::up;
    Vector components;
    Vector tail;
    double norm_model_units = 0.0;
    std::string corpus_hash;

    Vector head() const { return tail + components; }

    /// "construct/method/layer/direction", unique within a store.
    std::string id() const;
};

struct SteeringPair {
    SteeringVector up;
    SteeringVector down;

    const SteeringVector& operator[](Direction d) const { return d == Direction::up ? up : down; }
};

/// Labels the derived vectors carry.
struct VectorMeta {
    std::string construct;
    int layer = 0;
    std::string corpus_hash;
};

/// alpha * v.components; one alpha unit moves the activation by norm_model_units.
inline Vector injection_term(const SteeringVector& v, double alpha) { return alpha * v.components; }

}  // namespace psteer::vectors
