#pragma once

// Little-endian float32 blobs and JSONL files.

#include "psteer/core.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace psteer::io {

void put_f32(std::ostream& out, double x);

/// Appends the values of `m` in row-major order as float32 little-endian.
template <typename Derived>
void write_f32(std::ostream& out, const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(out, static_cast<double>(m(r, c)));
}

/// Reads rows x cols float32 values (row-major) starting at the stream position.
Matrix read_f32(std::istream& in, Eigen::Index rows, Eigen::Index cols);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Every non-empty line parsed as JSON.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Appends one line and flushes it to disk before returning.
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& j);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

nlohmann::json to_json(const Eigen::Ref<const Vector>& v);
Vector vector_from_json(const nlohmann::json& j);

}  // namespace psteer::io
