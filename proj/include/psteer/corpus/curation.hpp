#pragma once

// Corpus curation: greedy semantic dedup, head selection, conflict-graph
// pruning over maximal independent sets, and battery finalization.

#include "psteer/core.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace psteer::corpus {

/// Parallel arrays; embeddings are rows, L2-normalized on construction.
struct CandidatePool {
    std::vector<std::string> texts;
    std::vector<double> fluency;
    Matrix embeddings;

    CandidatePool() = default;
    CandidatePool(std::vector<std::string> texts, std::vector<double> fluency, Matrix embeddings);

    std::size_t size() const { return texts.size(); }
    CandidatePool subset(const std::vector<std::size_t>& indices) const;
};

/// Rows scaled to unit length; zero rows stay zero.
Matrix normalize_rows(const Eigen::Ref<const Matrix>& m);

/// Single pass in pool order: keep i iff cos(e_i, e_j) < threshold for every kept j.
std::vector<std::size_t> dedup_greedy(const Eigen::Ref<const Matrix>& embeddings, double threshold = 0.9,
                                      std::size_t limit = static_cast<std::size_t>(-1));

/// The n heads most similar to the item, descending; ties to the lower index.
std::vector<std::size_t> select_heads(const Eigen::Ref<const Vector>& item_embedding,
                                      const Eigen::Ref<const Matrix>& heads, std::size_t n = 25);

struct ConflictOptions {
    double threshold = 0.9;
    std::size_t enumeration_bound = 25;
    /// Above the bound: greedy sets instead of EnumerationBoundError.
    bool approximate = false;
};

struct PruneResult {
    std::vector<std::size_t> independent_set;  // ascending
    std::size_t k_min = 0;
    std::size_t maximal_sets = 0;  // enumerated count (0 when approximate)
    bool approximate = false;
};

/// Edge (i, j) iff cos >= threshold.
std::vector<std::vector<bool>> conflict_graph(const Eigen::Ref<const Matrix>& embeddings, double threshold);

/// Every maximal independent set, each ascending, in lexicographic order.
std::vector<std::vector<std::size_t>> maximal_independent_sets(const std::vector<std::vector<bool>>& graph);

/// Maximum-fluency maximal independent set (ties: lexicographically smallest) and
/// the minimum maximal-independent-set size.
PruneResult prune_conflicts(const CandidatePool& candidates, const ConflictOptions& options = {});

struct SjtItem {
    std::string item_id;
    std::string stem;
    std::string source_head;
    std::string construct;
    std::size_t k_index = 0;
};

struct SjtBattery {
    std::string inventory_ref;
    std::size_t k = 0;
    std::vector<SjtItem> items;

    std::vector<std::string> stems() const;
    void save_jsonl(const std::filesystem::path& path) const;
    static SjtBattery load_jsonl(const std::filesystem::path& path);
};

/// Fluency-filtered candidates for one inventory item plus its pruning result.
struct PrunedItem {
    std::string construct;
    CandidatePool candidates;
    std::vector<std::string> source_heads;  // parallel to candidates
    PruneResult pruned;
};

/// k = min k_min over items; each item keeps the k highest-fluency stems of
/// its chosen set (ties to the lower index), listed by descending fluency.
SjtBattery finalize_battery(const std::map<std::string, PrunedItem>& per_item, const std::string& inventory_ref);

/// Cosine between the centroids of the row-normalized embeddings.
double centroid_alignment(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b);

}  // namespace psteer::corpus
