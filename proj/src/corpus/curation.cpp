#include "psteer/corpus/curation.hpp"

#include "psteer/io.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace psteer::corpus {

using nlohmann::json;

Matrix normalize_rows(const Eigen::Ref<const Matrix>& m) {
    Matrix out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double n = out.row(i).norm();
        if (n > 0) out.row(i) /= n;
    }
    return out;
}

CandidatePool::CandidatePool(std::vector<std::string> t, std::vector<double> f, Matrix e)
    : texts(std::move(t)), fluency(std::move(f)), embeddings(normalize_rows(e)) {
    if (fluency.size() != texts.size() || static_cast<std::size_t>(embeddings.rows()) != texts.size())
        throw ContractViolation("candidate pool arrays differ in length");
}

CandidatePool CandidatePool::subset(const std::vector<std::size_t>& indices) const {
    CandidatePool out;
    out.embeddings.resize(static_cast<Eigen::Index>(indices.size()), embeddings.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        out.texts.push_back(texts.at(indices[r]));
        out.fluency.push_back(fluency.at(indices[r]));
        out.embeddings.row(static_cast<Eigen::Index>(r)) = embeddings.row(static_cast<Eigen::Index>(indices[r]));
    }
    return out;
}

std::vector<std::size_t> dedup_greedy(const Eigen::Ref<const Matrix>& embeddings, double threshold,
                                      std::size_t limit) {
    const Matrix e = normalize_rows(embeddings);
    std::vector<std::size_t> kept;
    for (Eigen::Index i = 0; i < e.rows() && kept.size() < limit; ++i) {
        bool distinct = true;
        for (auto j : kept) {
            if (e.row(i).dot(e.row(static_cast<Eigen::Index>(j))) >= threshold) {
                distinct = false;
                break;
            }
        }
        if (distinct) kept.push_back(static_cast<std::size_t>(i));
    }
    return kept;
}

std::vector<std::size_t> select_heads(const Eigen::Ref<const Vector>& item_embedding,
                                      const Eigen::Ref<const Matrix>& heads, std::size_t n) {
    if (n > static_cast<std::size_t>(heads.rows()))
        throw ContractViolation("select_heads: asked for " + std::to_string(n) + " of " +
                                std::to_string(heads.rows()) + " heads");
    if (heads.rows() > 0 && heads.cols() != item_embedding.size())
        throw ContractViolation("select_heads: dimension mismatch");
    const double item_norm = item_embedding.norm();
    const Vector sims = normalize_rows(heads) * (item_norm > 0 ? Vector(item_embedding / item_norm) : Vector(item_embedding));
    std::vector<std::size_t> idx(static_cast<std::size_t>(heads.rows()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return sims[static_cast<Eigen::Index>(a)] > sims[static_cast<Eigen::Index>(b)];
    });
    idx.resize(n);
    return idx;
}

std::vector<std::vector<bool>> conflict_graph(const Eigen::Ref<const Matrix>& embeddings, double threshold) {
    const Matrix e = normalize_rows(embeddings);
    const auto n = static_cast<std::size_t>(e.rows());
    std::vector<std::vector<bool>> g(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            g[i][j] = g[j][i] =
                e.row(static_cast<Eigen::Index>(i)).dot(e.row(static_cast<Eigen::Index>(j))) >= threshold;
    return g;
}

namespace {

using Mask = std::uint64_t;

// Bron-Kerbosch with pivoting over the complement graph: its maximal cliques
// are the maximal independent sets of the conflict graph.
void bron_kerbosch(Mask r, Mask p, Mask x, const std::vector<Mask>& compat, std::vector<Mask>& out) {
    if (p == 0 && x == 0) {
        out.push_back(r);
        return;
    }
    const Mask px = p | x;
    int pivot = std::countr_zero(px);
    int best = -1;
    for (Mask m = px; m; m &= m - 1) {
        const int u = std::countr_zero(m);
        const int c = std::popcount(p & compat[static_cast<std::size_t>(u)]);
        if (c > best) {
            best = c;
            pivot = u;
        }
    }
    for (Mask m = p & ~compat[static_cast<std::size_t>(pivot)]; m; m &= m - 1) {
        const int v = std::countr_zero(m);
        const Mask bit = Mask{1} << v;
        bron_kerbosch(r | bit, p & compat[static_cast<std::size_t>(v)], x & compat[static_cast<std::size_t>(v)],
                      compat, out);
        p &= ~bit;
        x |= bit;
    }
}

std::vector<std::size_t> members(Mask m) {
    std::vector<std::size_t> out;
    for (; m; m &= m - 1) out.push_back(static_cast<std::size_t>(std::countr_zero(m)));
    return out;
}

double fluency_sum(const std::vector<std::size_t>& set, const std::vector<double>& fluency) {
    double s = 0;
    for (auto i : set) s += fluency[i];
    return s;
}

// Greedy maximal independent set, visiting nodes in `order`.
std::vector<std::size_t> greedy_mis(const std::vector<std::vector<bool>>& g, const std::vector<std::size_t>& order) {
    std::vector<bool> blocked(g.size(), false);
    std::vector<std::size_t> out;
    for (auto v : order) {
        if (blocked[v]) continue;
        out.push_back(v);
        for (std::size_t u = 0; u < g.size(); ++u)
            if (g[v][u]) blocked[u] = true;
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> maximal_independent_sets(const std::vector<std::vector<bool>>& graph) {
    const std::size_t n = graph.size();
    if (n > 63) throw EnumerationBoundError("maximal_independent_sets supports at most 63 nodes");
    if (n == 0) return {{}};
    std::vector<Mask> compat(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && !graph[i][j]) compat[i] |= Mask{1} << j;
    std::vector<Mask> found;
    bron_kerbosch(0, (Mask{1} << n) - 1, 0, compat, found);
    std::vector<std::vector<std::size_t>> out;
    out.reserve(found.size());
    for (auto m : found) out.push_back(members(m));
    std::sort(out.begin(), out.end());
    return out;
}

PruneResult prune_conflicts(const CandidatePool& candidates, const ConflictOptions& options) {
    const auto g = conflict_graph(candidates.embeddings, options.threshold);
    const std::size_t n = g.size();
    PruneResult result;
    if (n == 0) return result;

    if (n > options.enumeration_bound) {
        if (!options.approximate)
            throw EnumerationBoundError("prune_conflicts: " + std::to_string(n) + " candidates exceed the bound of " +
                                        std::to_string(options.enumeration_bound));
        result.approximate = true;
        std::vector<std::size_t> by_fluency(n);
        std::iota(by_fluency.begin(), by_fluency.end(), std::size_t{0});
        std::stable_sort(by_fluency.begin(), by_fluency.end(), [&](std::size_t a, std::size_t b) {
            return candidates.fluency[a] > candidates.fluency[b];
        });
        result.independent_set = greedy_mis(g, by_fluency);
        // high-degree nodes first tends toward a small maximal set
        std::vector<std::size_t> by_degree(n);
        std::iota(by_degree.begin(), by_degree.end(), std::size_t{0});
        auto degree = [&](std::size_t v) { return std::count(g[v].begin(), g[v].end(), true); };
        std::stable_sort(by_degree.begin(), by_degree.end(),
                         [&](std::size_t a, std::size_t b) { return degree(a) > degree(b); });
        result.k_min = std::min(greedy_mis(g, by_degree).size(), result.independent_set.size());
        return result;
    }

    const auto sets = maximal_independent_sets(g);
    result.maximal_sets = sets.size();
    result.k_min = n;
    double best = -1.0;
    for (const auto& s : sets) {  // lexicographic order, so strict > keeps the smallest on ties
        result.k_min = std::min(result.k_min, s.size());
        const double f = fluency_sum(s, candidates.fluency);
        if (f > best) {
            best = f;
            result.independent_set = s;
        }
    }
    return result;
}

std::vector<std::string> SjtBattery::stems() const {
    std::vector<std::string> out;
    for (const auto& i : items) out.push_back(i.stem);
    return out;
}

void SjtBattery::save_jsonl(const std::filesystem::path& path) const {
    std::string out;
    for (const auto& i : items)
        out += json{{"inventory_ref", inventory_ref},
                    {"item_id", i.item_id},
                    {"stem", i.stem},
                    {"source_head", i.source_head},
                    {"construct", i.construct},
                    {"k_index", i.k_index}}
                   .dump() +
               "\n";
    io::write_text(path, out);
}

SjtBattery SjtBattery::load_jsonl(const std::filesystem::path& path) {
    SjtBattery b;
    std::map<std::string, std::size_t> per_item;
    for (const auto& line : io::read_jsonl(path)) {
        SjtItem i;
        try {
            i.item_id = line.at("item_id").get<std::string>();
            i.stem = line.at("stem").get<std::string>();
            i.construct = line.at("construct").get<std::string>();
        } catch (const json::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        i.source_head = line.value("source_head", "");
        i.k_index = line.value("k_index", std::size_t{0});
        if (b.inventory_ref.empty()) b.inventory_ref = line.value("inventory_ref", "");
        ++per_item[i.item_id];
        b.items.push_back(std::move(i));
    }
    for (const auto& [_, count] : per_item) b.k = b.k == 0 ? count : std::min(b.k, count);
    return b;
}

SjtBattery finalize_battery(const std::map<std::string, PrunedItem>& per_item, const std::string& inventory_ref) {
    if (per_item.empty()) throw BatteryConstructionError("no items to finalize");
    std::size_t k = static_cast<std::size_t>(-1);
    for (const auto& [id, item] : per_item) {
        if (item.pruned.independent_set.empty())
            throw BatteryConstructionError("item " + id + " has an empty pruned set");
        k = std::min(k, item.pruned.k_min);
    }
    SjtBattery battery;
    battery.inventory_ref = inventory_ref;
    battery.k = k;
    for (const auto& [id, item] : per_item) {
        std::vector<std::size_t> chosen = item.pruned.independent_set;
        std::stable_sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
            return item.candidates.fluency[a] > item.candidates.fluency[b];
        });
        chosen.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
            const auto c = chosen[j];
            battery.items.push_back({id, item.candidates.texts[c],
                                     c < item.source_heads.size() ? item.source_heads[c] : std::string{},
                                     item.construct, j});
        }
    }
    return battery;
}

double centroid_alignment(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
    if (a.rows() == 0 || b.rows() == 0) throw InsufficientDataError("centroid_alignment: empty pool");
    if (a.cols() != b.cols()) throw ContractViolation("centroid_alignment: dimension mismatch");
    const Vector ca = normalize_rows(a).colwise().mean().transpose();
    const Vector cb = normalize_rows(b).colwise().mean().transpose();
    const double na = ca.norm(), nb = cb.norm();
    if (!(na > 0) || !(nb > 0)) throw UndefinedAlignmentError("centroid_alignment: zero centroid");
    return std::clamp(ca.dot(cb) / (na * nb), -1.0, 1.0);
}

}  // namespace psteer::corpus
