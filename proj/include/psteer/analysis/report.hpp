#pragma once

// Analysis report over a run: JSON, CSV tables and static SVG plots.

#include "psteer/analysis/analysis.hpp"

#include <filesystem>

namespace psteer::analysis {

/// Judge-scored mean SJT score per trait for one steering method ("P2", "MDS", "PM").
struct MethodMeans {
    std::map<std::string, double> up;
    std::map<std::string, double> down;
};

struct ModelInputs {
    std::vector<std::pair<sweep::SweepConfig, std::vector<sweep::SweepRecord>>> sweeps;
    std::vector<std::pair<sweep::ReplayConfig, std::vector<sweep::ReplayRecord>>> replays;
    /// Persona-prompted means per instrument, trait and direction.
    std::map<Instrument, std::map<std::pair<std::string, Direction>, double>> p2;
    std::map<std::string, MethodMeans> comparisons;
};

struct ReportInputs {
    std::map<std::string, ModelInputs> models;
    std::vector<std::string> traits = ocean();
};

/// Reads every sweep, replay and comparison file found (recursively) under
/// `dir`, grouped by model id.
ReportInputs load_run(const std::filesystem::path& dir);

nlohmann::json build_report(const ReportInputs& inputs);

/// report.json, tables/*.csv and plots/*.{csv,svg} under `dir`.
void write_report(const nlohmann::json& report, const std::filesystem::path& dir);

/// Comparison file written by the compare step: {"kind": "comparison", "model_id", "methods": {...}, "p2": {...}}.
nlohmann::json comparison_json(const std::string& model_id, const std::map<std::string, MethodMeans>& methods,
                               const std::map<Instrument, std::map<std::pair<std::string, Direction>, double>>& p2);

}  // namespace psteer::analysis
