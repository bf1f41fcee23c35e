#pragma once

// Statement corpora, ATOMIC-style head preprocessing and SJT batteries,
// built from external generator, fluency, embedding and judge clients.

#include "psteer/corpus/clients.hpp"
#include "psteer/corpus/curation.hpp"

#include <map>
#include <string>
#include <vector>

namespace psteer::corpus {

struct ConstructSpec {
    std::string id;
    std::string name;    // "neuroticism"
    std::string phrase;  // "is neurotic", no final period
    std::vector<std::string> facets;
    std::string inventory_ref;

    /// Facets joined for the judge prompt ("a, b, and c").
    std::string characteristics() const;
};

ConstructSpec construct_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConstructSpec& c);

/// OCEAN (O, C, E, A, N) with facets, plus HEXACO, Dark Tetrad, CMNI and CFNI phrases.
const std::vector<ConstructSpec>& builtin_constructs();
/// Throws ConfigError for an unknown id.
const ConstructSpec& builtin_construct(const std::string& id);

struct StatementSynthesisOptions {
    std::size_t target = 500;
    std::size_t budget = 35000;  // raw generations before giving up
    int batch = 100;
    double fluency_threshold = 0.95;
    double dedup_threshold = 0.9;
    int max_new_tokens = 48;
    double temperature = 1.4;
    double top_p = 0.975;
    std::string prefill = "I ";
};

struct SynthesisCounts {
    std::size_t raw = 0;
    std::size_t well_formed = 0;
    std::size_t fluent = 0;
    std::size_t deduped = 0;
    std::size_t retained = 0;
};

struct StatementSynthesis {
    std::vector<std::string> texts;
    std::vector<double> fluency;
    Matrix embeddings;  // unit rows, parallel to texts
    SynthesisCounts counts;
    bool partial = false;
    std::string warning;
};

/// User prompt for one direction ("identify" for up, "not identify" for down).
std::string statement_user_prompt(const ConstructSpec& spec, Direction d);

/// Generates in batches until `target` statements survive syntax, fluency and
/// greedy dedup, or the budget or the generator runs out (partial, not fatal).
StatementSynthesis synthesize_statements(clients::TextGenerator& generator, clients::FluencyScorer& fluency,
                                         clients::Embedder& embedder, const ConstructSpec& spec, Direction direction,
                                         const StatementSynthesisOptions& options = {});

struct HeadRecord {
    std::string head;
    double p_valid = 0.0;
};

struct HeadPipelineOptions {
    double p_valid_min = 0.99;
    int judge_min = 4;
    double judge_temperature = 1.0;
    int judge_max_new_tokens = 1024;
    double dedup_threshold = 0.9;
    std::map<std::string, std::string> names = {{"PersonX", "Alex"}, {"PersonY", "Brooke"}, {"PersonZ", "Charlie"}};
};

struct HeadPipelineResult {
    std::vector<std::string> heads;
    Matrix embeddings;
    std::size_t input = 0, valid = 0, judged = 0, unparseable = 0;
};

std::string substitute_names(std::string head, const std::map<std::string, std::string>& names);

/// Score after "[RESULT]" in a rubric-judge reply; throws JudgeFormatError.
int parse_rubric_score(const std::string& reply);

/// Name substitution, validity gate, rubric-judge gate, then greedy dedup.
HeadPipelineResult preprocess_heads(const std::vector<HeadRecord>& records, clients::ChatClient& judge,
                                    clients::Embedder& embedder, const HeadPipelineOptions& options = {});

struct SjtSeed {
    std::string item_id;
    std::string text;  // inventory item, used as the behavioral tendency
    std::string construct;
};

struct SjtSynthesisOptions {
    std::size_t heads_per_item = 25;
    double temperature = 0.8;
    double top_p = 0.8;
    int max_new_tokens = 128;
    double fluency_threshold = 0.95;
    ConflictOptions conflicts;
};

struct SjtSynthesis {
    SjtBattery battery;
    std::map<std::string, PrunedItem> per_item;
};

/// Per item: nearest heads, one SJT per head, fluency filter, conflict
/// pruning; then a battery with the same k for every item.
SjtSynthesis synthesize_sjts(const std::vector<SjtSeed>& items, const std::vector<std::string>& heads,
                             const Eigen::Ref<const Matrix>& head_embeddings, clients::TextGenerator& generator,
                             clients::FluencyScorer& fluency, clients::Embedder& embedder,
                             const std::string& inventory_ref, const SjtSynthesisOptions& options = {});

}  // namespace psteer::corpus
