#pragma once

// Fluency-gated injection-strength sweeps and the equidistant cross-trait
// replay. Both persist one JSONL file per configuration: a manifest line
// followed by one record per alpha step, appended and synced before the next
// step starts.

#include "psteer/psychometrics/psychometrics.hpp"
#include "psteer/vectors/store.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace psteer::sweep {

enum class Instrument { sjt, inventory };
std::string to_string(Instrument i);

struct SweepConfig {
    std::string model_id;
    Method method = Method::MDS;
    int layer = 0;
    int stride = 1;
    std::string trait;
    Direction direction = Direction::up;
    int alpha_start = 1;
    int alpha_step = 1;
    int alpha_cap = 512;
    std::string inventory_ref;
    std::string sjt_ref;
    // Trait label in the inventory; empty means `trait`.
    std::string inventory_trait;
    psychometrics::GateThresholds gate;
    psychometrics::SjtOptions sjt;

    /// Throws ConfigError on a broken invariant.
    void validate() const;
    /// "model__method__l<layer>__s<stride>__trait__dir"
    std::string file_stem() const;
    nlohmann::json to_json() const;
    static SweepConfig from_json(const nlohmann::json& j);
};

struct FluencyStats {
    double mean = 0.0;
    double min = 0.0;
    std::size_t scored = 0;
};

struct SweepRecord {
    double alpha = 0.0;
    psychometrics::SjtResult sjt;
    FluencyStats fluency;
    psychometrics::InventoryResult inventory;
    std::optional<double> sjt_score;
    std::optional<double> inventory_score;
    std::optional<psychometrics::GateResult> gate;  // absent on the alpha = 0 baseline
    bool valid_sjt = false;
    bool valid_inventory = false;
    bool stop = false;

    bool valid(Instrument i) const { return i == Instrument::sjt ? valid_sjt : valid_inventory; }
    std::optional<double> score(Instrument i) const { return i == Instrument::sjt ? sjt_score : inventory_score; }
    std::string signature() const;

    nlohmann::json to_json() const;
    static SweepRecord from_json(const nlohmann::json& j);
};

/// What a sweep step needs besides the model. Classifiers are keyed by trait.
struct Instruments {
    const vectors::VectorStore& store;
    const psychometrics::Inventory& inventory;
    const corpus::SjtBattery& battery;
    const std::map<std::string, psychometrics::ConstructClassifier>& classifiers;
    clients::Embedder& embedder;
    clients::FluencyScorer& fluency;
};

enum class SweepStatus { stopped, capped };

struct SweepResult {
    std::vector<SweepRecord> records;  // records[0] is the baseline
    SweepStatus status = SweepStatus::stopped;
    psychometrics::GateRule stop_rule = psychometrics::GateRule::none;
    std::size_t resumed_records = 0;  // records read back from an existing file

    bool completed_with_cap() const { return status == SweepStatus::capped; }
};

struct PersistOptions {
    std::optional<std::filesystem::path> path;
    /// Continue an existing file whose manifest matches; otherwise an existing
    /// file is a ConfigError.
    bool resume = false;
};

/// Baseline at alpha 0, then alpha_start, +alpha_step, ... until the gate
/// fails or alpha_cap is reached. Backend failures throw CheckpointError after
/// everything measured so far has been persisted.
SweepResult run_sweep(const SweepConfig& config, backend::LanguageModel& model, const Instruments& instruments,
                      const PersistOptions& persist = {});

/// Marks each non-baseline record valid per instrument iff its gate passed
/// and its score moved past the baseline in `direction`.
void apply_validity(std::vector<SweepRecord>& records, Direction direction);

struct ScorePoint {
    double alpha = 0.0;
    double score = 0.0;
};

/// Valid steps per instrument, recomputed from gate results and scores.
std::map<Instrument, std::vector<ScorePoint>> validity_filter(const std::vector<SweepRecord>& records,
                                                              Direction direction);

/// Reads a sweep file. A trailing partial line is ignored.
std::pair<SweepConfig, std::vector<SweepRecord>> load_sweep(const std::filesystem::path& path);

// Equidistant replay

/// n points from 0 to alpha_star inclusive; a single {0} when alpha_star is 0.
std::vector<double> replay_grid(double alpha_star, int n = 10);

struct ReplayConfig {
    std::string model_id;
    Method method = Method::MDS;
    int layer = 0;
    int stride = 1;
    std::string trait;
    Direction direction = Direction::up;
    double alpha_star = 0.0;
    int points = 10;
    std::vector<std::string> traits = {"O", "C", "E", "A", "N"};
    std::string sjt_ref;
    psychometrics::GateThresholds gate;
    psychometrics::SjtOptions sjt;

    void validate() const;
    std::string file_stem() const;
    nlohmann::json to_json() const;
    static ReplayConfig from_json(const nlohmann::json& j);
};

struct ReplayRecord {
    double alpha = 0.0;
    std::map<std::string, double> scores;  // SJT score per measured trait
    FluencyStats fluency;                  // target trait's SJTs only
    psychometrics::GateResult gate;        // logged, never stops the replay
    psychometrics::SjtResult sjt;

    nlohmann::json to_json() const;
    static ReplayRecord from_json(const nlohmann::json& j);
};

struct ReplayResult {
    std::vector<ReplayRecord> records;
    bool degenerate = false;  // alpha_star == 0
};

ReplayResult equidistant_replay(const ReplayConfig& config, backend::LanguageModel& model,
                                const Instruments& instruments, const PersistOptions& persist = {});

std::pair<ReplayConfig, std::vector<ReplayRecord>> load_replay(const std::filesystem::path& path);

}  // namespace psteer::sweep
