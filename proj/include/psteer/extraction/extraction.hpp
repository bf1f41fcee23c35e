#pragma once

// Contrastive statement corpora and the per-layer prefill activations
// harvested from them.

#include "psteer/backend/model.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace psteer::extraction {

/// Prefill used for mode-b prompts. yes_always puts the contrast entirely
/// in the statement text; yes_no_by_label prefills "No" for down statements.
enum class PrefillPolicy { yes_always, yes_no_by_label };

std::string to_string(PrefillPolicy p);
PrefillPolicy prefill_policy_from_string(std::string_view s);

struct StatementCorpus {
    std::string construct;
    std::vector<std::string> up;
    std::vector<std::string> down;

    const std::vector<std::string>& operator[](Direction d) const { return d == Direction::up ? up : down; }

    /// SHA-256 over construct and statements, order-sensitive.
    std::string hash() const;

    /// Syntactic problems, one message per offending statement.
    std::vector<std::string> problems() const;
    /// Throws ContractViolation listing the first problems.
    void validate() const;

    /// Reads lines {text, direction[, construct, fluency, embedding_ref]}.
    static StatementCorpus load_jsonl(const std::filesystem::path& path, std::string construct = {});
    void save_jsonl(const std::filesystem::path& path) const;
};

/// Non-empty, first person, ends with exactly one period.
bool is_valid_statement(std::string_view s, std::string* why = nullptr);

inline const std::string kExtractionSystem = "You are a person.";
inline const std::string kSelfDescriptionRequest = "Tell me about yourself.";

backend::ChatPrompt build_extraction_prompt(const std::string& statement, ExtractionMode mode,
                                            Direction label = Direction::up,
                                            PrefillPolicy policy = PrefillPolicy::yes_always);

/// Per-layer mean prefill activations, rows in corpus order.
struct ActivationSet {
    ExtractionMode mode = ExtractionMode::s;
    std::string construct;
    std::string model_id;
    std::string corpus_hash;
    std::vector<Matrix> up;    // per layer [n_up x d]
    std::vector<Matrix> down;  // per layer [n_down x d]

    int layer_count() const { return static_cast<int>(up.size()); }
    int hidden_dim() const { return up.empty() ? 0 : static_cast<int>(up.front().cols()); }
    Eigen::Index n_up() const { return up.empty() ? 0 : up.front().rows(); }
    Eigen::Index n_down() const { return down.empty() ? 0 : down.front().rows(); }
    const Matrix& at(int layer, Direction d) const;

    /// Throws ContractViolation on inconsistent shapes or non-finite entries.
    void validate() const;

    /// Writes <stem>.f32 (per layer: up rows then down rows) and <stem>.json.
    void save(const std::filesystem::path& dir, const std::string& stem) const;
    static ActivationSet load(const std::filesystem::path& dir, const std::string& stem);
};

using ExtractionProgress = std::function<void(std::size_t done, std::size_t total)>;

/// Captures every statement once; errors name the offending statement.
ActivationSet extract_activation_set(backend::LanguageModel& model, const StatementCorpus& corpus,
                                     ExtractionMode mode, PrefillPolicy policy = PrefillPolicy::yes_always,
                                     const ExtractionProgress& progress = {});

}  // namespace psteer::extraction
