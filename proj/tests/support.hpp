#pragma once

#include "psteer/backend/mock.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

namespace psteer::testing {

inline std::unique_ptr<backend::MockModel> mock(const nlohmann::json& scenario) {
    return std::make_unique<backend::MockModel>(scenario);
}

inline std::filesystem::path fixture(const std::string& name) {
    const char* dir = std::getenv("PSTEER_FIXTURES");
    return std::filesystem::path(dir ? dir : "tests/fixtures") / name;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto dir = std::filesystem::temp_directory_path() / ("psteer_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(dir);
    return dir;
}

/// n x d matrix of N(center, sigma^2) rows.
inline Matrix gaussian_cluster(std::mt19937_64& rng, int n, const Vector& center, double sigma) {
    std::normal_distribution<double> normal(0.0, sigma);
    Matrix m(n, center.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < center.size(); ++j) m(i, j) = center[j] + normal(rng);
    return m;
}

inline Vector random_unit(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> normal;
    Vector v(d);
    for (int j = 0; j < d; ++j) v[j] = normal(rng);
    return v.normalized();
}

}  // namespace psteer::testing
