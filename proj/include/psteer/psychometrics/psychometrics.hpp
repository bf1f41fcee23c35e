#pragma once

// Administering and scoring inventories and SJT batteries, construct
// classifiers, the fluency gate and the external SJT judge.

#include "psteer/backend/model.hpp"
#include "psteer/corpus/clients.hpp"
#include "psteer/corpus/curation.hpp"
#include "psteer/corpus/synthesis.hpp"
#include "psteer/extraction/extraction.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace psteer::psychometrics {

/// Letter to Likert points before reverse keying. Default A=5 .. E=1.
struct LikertKey {
    std::map<std::string, int> points = {{"A", 5}, {"B", 4}, {"C", 3}, {"D", 2}, {"E", 1}};

    std::vector<std::string> letters() const;
    /// Throws ContractViolation for an unknown letter.
    int score(const std::string& letter, bool reverse_keyed) const;

    static LikertKey from_json(const nlohmann::json& j);
};

inline int reverse_key(int x) { return 6 - x; }

struct InventoryItem {
    std::string item_id;
    std::string text;  // second person without the subject, e.g. "Worry about things."
    std::string trait;
    bool reverse_keyed = false;
};

struct Inventory {
    std::string id;
    std::vector<InventoryItem> items;
    LikertKey key;

    std::vector<std::string> traits() const;

    /// Lines {item_id, text, trait, reverse_keyed}.
    static Inventory load_jsonl(const std::filesystem::path& path, std::string id = {});
    void save_jsonl(const std::filesystem::path& path) const;
    /// CSV with a header naming text, trait (or label_ocean) and key (1/-1, +/-)
    /// columns; an optional item_id column.
    static Inventory import_mpi_csv(const std::filesystem::path& path, std::string id = "mpi120");
};

std::string inventory_system_prompt(const std::optional<std::string>& description);
/// Inventory user prompt with the item's first letter lowercased.
std::string inventory_user_prompt(const std::string& item_text);
std::string sjt_system_prompt(const std::optional<std::string>& description);

struct InventoryResponse {
    std::string item_id;
    std::string trait;
    std::string letter;
    int likert = 0;
};

struct InventoryResult {
    std::vector<InventoryResponse> responses;

    /// Mean Likert over the trait's items; nullopt if it has none.
    std::optional<double> trait_mean(const std::string& trait) const;
    std::map<std::string, double> trait_means() const;
    std::string letters() const;
};

/// One constrained choice over the key's letters per item. Errors name the item.
InventoryResult administer_inventory(backend::LanguageModel& model, const Inventory& inventory,
                                     const std::optional<std::string>& p2_description = std::nullopt,
                                     const backend::Schedule& schedule = {});

struct SjtResponse {
    std::string item_id;
    std::size_t k_index = 0;
    std::string construct;
    std::string text;  // prefill included
    double fluency = 0.0;
    bool missing = false;
    std::string error;
};

struct SjtResult {
    std::vector<SjtResponse> responses;

    std::vector<double> fluency_scores() const;  // present responses only
    std::size_t missing() const;
    std::string concatenated() const;
};

struct SjtOptions {
    int max_new_tokens = 64;
    std::string prefill = "I would";
};

/// Greedy SJT answers; per-stem backend failures are recorded as missing.
SjtResult administer_sjts(backend::LanguageModel& model, const corpus::SjtBattery& battery,
                          clients::FluencyScorer& fluency,
                          const std::optional<std::string>& p2_description = std::nullopt,
                          const backend::Schedule& schedule = {}, const SjtOptions& options = {});

struct ClassifierOptions {
    int max_iterations = 1000;
    double tolerance = 1e-3;
    double C = 1.0;
};

/// Logistic regressor on statement embeddings, up = 1.
struct ConstructClassifier {
    std::string construct;
    Vector weights;
    double intercept = 0.0;
    nlohmann::json manifest;

    double probability(const Eigen::Ref<const Vector>& embedding) const;
    double decision(const Eigen::Ref<const Vector>& embedding) const;

    nlohmann::json to_json() const;
    static ConstructClassifier from_json(const nlohmann::json& j);
};

ConstructClassifier train_construct_classifier(const extraction::StatementCorpus& corpus,
                                               clients::Embedder& embedder, const ClassifierOptions& options = {});

struct HoldoutReport {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double f1_macro = 0.0;
    std::uint64_t seed = 0;
};

/// Stratified split, fit on the train part, scores on the held-out part.
HoldoutReport classifier_holdout(const extraction::StatementCorpus& corpus, clients::Embedder& embedder,
                                 double train_fraction = 0.8, std::uint64_t seed = 0,
                                 const ClassifierOptions& options = {});

/// 1 + 4p.
inline double likert_from_probability(double p) { return 1.0 + 4.0 * p; }

/// Likert score of a response; the classifier never sees the stem.
double classify_to_likert(const ConstructClassifier& classifier, const std::string& text, clients::Embedder& embedder);
/// Mean Likert over texts.
double mean_likert(const ConstructClassifier& classifier, const std::vector<std::string>& texts,
                   clients::Embedder& embedder);

struct FluencyBaseline {
    std::string battery_id;
    std::vector<double> scores;
    double mean = 0.0;

    static FluencyBaseline from_scores(std::string battery_id, std::vector<double> scores);
};

enum class GateRule { none, mean_drop, tail_drop, repetition };
std::string to_string(GateRule r);
GateRule gate_rule_from_string(std::string_view s);

struct GateResult {
    bool pass = true;
    GateRule rule = GateRule::none;
    double step_mean = 0.0;
    double tail_fraction = 0.0;
    std::size_t identical_run = 1;  // consecutive steps with this step's responses
};

struct GateThresholds {
    double mean_ratio = 0.95;
    double tail_ratio = 0.90;
    double tail_fraction = 0.05;
    std::size_t repeat_steps = 3;
};

/// Rules in order: mean below mean_ratio * baseline; more than tail_fraction of
/// scores below tail_ratio * baseline; the response signature equal to the
/// previous repeat_steps - 1 signatures (`history`, oldest first).
GateResult fluency_gate(const std::vector<double>& step_scores, const FluencyBaseline& baseline,
                        const std::vector<std::string>& history, const std::string& signature,
                        const GateThresholds& thresholds = {});

/// Step signature for the repetition rule: every SJT response and inventory letter.
std::string response_signature(const SjtResult& sjts, const InventoryResult& inventory);

/// Single integer 1..5 surrounded by optional whitespace; throws JudgeFormatError.
int parse_judge_score(const std::string& reply);

int judge_sjt(clients::ChatClient& judge, const corpus::ConstructSpec& construct, const std::string& stem,
              const std::string& response, int attempts = 2);

}  // namespace psteer::psychometrics
