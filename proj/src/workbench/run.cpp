#include "psteer/workbench/run.hpp"

#include "psteer/io.hpp"

#include <algorithm>

namespace psteer::workbench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunStatus s) { return s == RunStatus::complete ? "complete" : "partial"; }

json RunManifest::to_json() const {
    return {{"format", "psteer-run/1"},
            {"run_id", run_id},
            {"command", command},
            {"code_version", code_version},
            {"config", config},
            {"inputs", inputs},
            {"artifacts", artifacts},
            {"seed", seed ? json(*seed) : json(nullptr)},
            {"status", to_string(status)}};
}

RunManifest RunManifest::from_json(const json& j) {
    try {
        RunManifest m;
        m.run_id = j.at("run_id").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.code_version = j.value("code_version", "");
        m.config = j.at("config");
        m.inputs = j.value("inputs", std::map<std::string, std::string>{});
        m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
        if (j.contains("seed") && !j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
        const auto status = j.value("status", "complete");
        if (status != "complete" && status != "partial") throw ConfigError("unknown run status '" + status + "'");
        m.status = status == "complete" ? RunStatus::complete : RunStatus::partial;
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad run manifest: ") + e.what());
    }
}

std::string run_id_for(const std::string& command, const json& config, const std::map<std::string, std::string>& inputs) {
    if (config.contains("run_id")) {
        const auto id = config.at("run_id").get<std::string>();
        if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..")
            throw ConfigError("run_id '" + id + "' is not a plain directory name");
        return id;
    }
    std::string material = config.dump();
    for (const auto& [path, digest] : inputs) material += "\n" + path + " " + digest;
    return command + "-" + sha256_hex(material).substr(0, 12);
}

std::string digest_path(const fs::path& path) {
    if (fs::is_regular_file(path)) return sha256_hex(io::read_text(path));
    if (!fs::is_directory(path)) throw ConfigError(path.string() + " does not exist");
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& e : fs::recursive_directory_iterator(path))
        if (e.is_regular_file())
            entries.emplace_back(fs::relative(e.path(), path).generic_string(), sha256_hex(io::read_text(e.path())));
    std::sort(entries.begin(), entries.end());
    std::string listing;
    for (const auto& [rel, digest] : entries) listing += rel + " " + digest + "\n";
    return sha256_hex(listing);
}

Run::Run(const fs::path& runs_root, std::string command, json config, const std::map<std::string, fs::path>& inputs) {
    for (const auto& [key, path] : inputs) manifest_.inputs[key] = digest_path(path);
    manifest_.run_id = run_id_for(command, config, manifest_.inputs);
    manifest_.command = std::move(command);
    manifest_.config = std::move(config);
    dir_ = runs_root / manifest_.run_id;
    const auto path = dir_ / "manifest.json";
    if (fs::exists(path)) {
        const auto existing = RunManifest::from_json(io::read_json(path));
        if (existing.command != manifest_.command || existing.config != manifest_.config ||
            existing.inputs != manifest_.inputs)
            throw ConfigError("run " + manifest_.run_id + " already exists with a different command, config or inputs");
        already_complete_ = existing.status == RunStatus::complete;
    }
    fs::create_directories(dir_);
}

fs::path Run::artifact(const std::string& rel) {
    const fs::path p = fs::path(rel).lexically_normal();
    if (p.is_absolute() || p.empty() || *p.begin() == "..") throw ContractViolation("artifact path escapes the run: " + rel);
    if (p == "manifest.json") throw ContractViolation("manifest.json is reserved");
    registered_.insert(p.generic_string());
    return dir_ / p;
}

const RunManifest& Run::finish(RunStatus status) {
    manifest_.status = status;
    manifest_.artifacts.clear();
    for (const auto& rel : registered_) {
        const auto p = dir_ / rel;
        if (fs::is_directory(p)) {
            for (const auto& e : fs::recursive_directory_iterator(p))
                if (e.is_regular_file())
                    manifest_.artifacts[fs::relative(e.path(), dir_).generic_string()] = sha256_hex(io::read_text(e.path()));
        } else if (fs::is_regular_file(p)) {
            manifest_.artifacts[rel] = sha256_hex(io::read_text(p));
        }
    }
    io::write_json(dir_ / "manifest.json", manifest_.to_json());
    return manifest_;
}

std::vector<std::string> fsck(const fs::path& runs_root) {
    std::vector<std::string> problems;
    if (!fs::is_directory(runs_root)) return {runs_root.string() + ": not a directory"};
    std::vector<fs::path> runs;
    for (const auto& e : fs::directory_iterator(runs_root)) {
        if (e.is_directory()) runs.push_back(e.path());
        else problems.push_back(e.path().string() + ": orphan file outside any run");
    }
    std::sort(runs.begin(), runs.end());
    for (const auto& dir : runs) {
        const auto path = dir / "manifest.json";
        if (!fs::exists(path)) {
            problems.push_back(dir.string() + ": no manifest");
            continue;
        }
        RunManifest m;
        try {
            m = RunManifest::from_json(io::read_json(path));
        } catch (const Error& e) {
            problems.push_back(path.string() + ": " + e.what());
            continue;
        }
        if (m.run_id != dir.filename().string())
            problems.push_back(path.string() + ": run_id " + m.run_id + " does not match its directory");
        std::vector<std::string> on_disk;
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file()) on_disk.push_back(fs::relative(e.path(), dir).generic_string());
        std::sort(on_disk.begin(), on_disk.end());
        for (const auto& rel : on_disk)
            if (rel != "manifest.json" && !m.artifacts.count(rel))
                problems.push_back((dir / rel).string() + ": orphan artifact");
        for (const auto& [rel, digest] : m.artifacts) {
            const auto p = dir / rel;
            if (!fs::is_regular_file(p)) problems.push_back(p.string() + ": listed but missing");
            else if (sha256_hex(io::read_text(p)) != digest) problems.push_back(p.string() + ": modified since the run");
        }
    }
    return problems;
}

}  // namespace psteer::workbench
