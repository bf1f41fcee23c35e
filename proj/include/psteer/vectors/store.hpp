#pragma once

// On-disk vector store: vectors.json (metadata, tails) plus vectors.f32
// (components, float32 little-endian, one row per entry in manifest order).

#include "psteer/vectors/steering_vector.hpp"

#include <filesystem>
#include <map>
#include <vector>

namespace psteer::vectors {

class VectorStore {
public:
    /// Inserts or replaces the vector with the same id.
    void put(SteeringVector v);
    void put(const SteeringPair& pair) {
        put(pair.up);
        put(pair.down);
    }

    const SteeringVector* find(const std::string& id) const;
    const SteeringVector* find(const std::string& construct, Method method, int layer, Direction direction) const;
    /// Throws ContractViolation naming the missing id.
    const SteeringVector& at(const std::string& id) const;

    std::vector<const SteeringVector*> all() const;
    std::vector<std::string> constructs() const;
    std::size_t size() const { return vectors_.size(); }
    bool empty() const { return vectors_.empty(); }

    void save(const std::filesystem::path& dir) const;
    /// Loaded components are float32-rounded; norm_model_units is recomputed from them.
    static VectorStore load(const std::filesystem::path& dir);

private:
    std::map<std::string, SteeringVector> vectors_;
};

}  // namespace psteer::vectors
