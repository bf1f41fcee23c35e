#pragma once

// Run directories: runs/<run_id>/ holds one command's artifacts plus a
// manifest that lists every file with its digest.

#include "psteer/core.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace psteer::workbench {

inline constexpr const char* kCodeVersion = "psteer 0.1.0";

enum class RunStatus { complete, partial };
std::string to_string(RunStatus s);

struct RunManifest {
    std::string run_id;
    std::string command;
    std::string code_version = kCodeVersion;
    nlohmann::json config;
    std::map<std::string, std::string> inputs;     // config key -> digest of the file or directory it names
    std::map<std::string, std::string> artifacts;  // path relative to the run dir -> digest
    std::optional<std::uint64_t> seed;
    RunStatus status = RunStatus::complete;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

/// "<command>-<12 hex digest of config and input digests>" unless the config names one.
std::string run_id_for(const std::string& command, const nlohmann::json& config,
                       const std::map<std::string, std::string>& inputs = {});

/// Digest of a file, or of a directory's (relative path, file digest) list.
std::string digest_path(const std::filesystem::path& path);

class Run {
public:
    /// Digests `inputs` (config key -> path) up front. Throws ConfigError when
    /// the run dir holds a manifest for a different command, config or input content.
    Run(const std::filesystem::path& runs_root, std::string command, nlohmann::json config,
        const std::map<std::string, std::filesystem::path>& inputs = {});

    const std::string& id() const { return manifest_.run_id; }
    const std::filesystem::path& dir() const { return dir_; }
    /// A complete manifest with this config already exists.
    bool already_complete() const { return already_complete_; }

    /// Registers `rel` (file or directory) as an artifact and returns its absolute path.
    std::filesystem::path artifact(const std::string& rel);
    void seed(std::uint64_t s) { manifest_.seed = s; }

    /// Hashes every registered artifact file and writes manifest.json.
    const RunManifest& finish(RunStatus status);

private:
    std::filesystem::path dir_;
    RunManifest manifest_;
    std::set<std::string> registered_;
    bool already_complete_ = false;
};

/// Problems found under a runs root: files no manifest lists, listed files
/// that are missing or modified, and run dirs without a manifest.
std::vector<std::string> fsck(const std::filesystem::path& runs_root);

}  // namespace psteer::workbench
