#include "psteer/corpus/synthesis.hpp"

#include "psteer/corpus/prompts.hpp"
#include "psteer/extraction/extraction.hpp"

#include <algorithm>
#include <regex>

namespace psteer::corpus {

using nlohmann::json;

std::string ConstructSpec::characteristics() const { return prompts::join_list(facets); }

ConstructSpec construct_from_json(const json& j) {
    ConstructSpec c;
    try {
        c.id = j.at("id").get<std::string>();
        c.name = j.value("name", c.id);
        c.phrase = j.at("phrase").get<std::string>();
        c.facets = j.value("facets", std::vector<std::string>{});
        c.inventory_ref = j.value("inventory_ref", "");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("construct: ") + e.what());
    }
    if (c.phrase.empty()) throw ConfigError("construct " + c.id + " has an empty phrase");
    return c;
}

json to_json(const ConstructSpec& c) {
    return {{"id", c.id}, {"name", c.name}, {"phrase", c.phrase}, {"facets", c.facets}, {"inventory_ref", c.inventory_ref}};
}

const std::vector<ConstructSpec>& builtin_constructs() {
    static const std::vector<ConstructSpec> all = {
        {"O", "openness", "is open to experience",
         {"imagination", "artistic interests", "emotionality", "adventurousness", "intellect", "liberalism"}, "mpi120"},
        {"C", "conscientiousness", "is conscientious",
         {"self-efficacy", "orderliness", "dutifulness", "achievement-striving", "self-discipline", "cautiousness"},
         "mpi120"},
        {"E", "extraversion", "is extraverted",
         {"friendliness", "gregariousness", "assertiveness", "activity level", "excitement-seeking", "cheerfulness"},
         "mpi120"},
        {"A", "agreeableness", "is agreeable",
         {"trust", "morality", "altruism", "cooperation", "modesty", "sympathy"}, "mpi120"},
        {"N", "neuroticism", "is neurotic",
         {"anxiety", "anger", "depression", "self-consciousness", "immoderation", "vulnerability"}, "mpi120"},
        {"emotionality", "emotionality", "is emotional", {}, "hexaco"},
        {"honesty_humility", "honesty-humility", "is honest and humble", {}, "hexaco"},
        {"machiavellianism", "Machiavellianism", "is Machiavellian", {}, "sd4"},
        {"narcissism", "narcissism", "is narcissistic", {}, "sd4"},
        {"psychopathy", "psychopathy", "is psychopathic", {}, "sd4"},
        {"sadism", "sadism", "is sadistic", {}, "sd4"},
        {"masculine_norms", "masculine norms", "conforms to traditional masculine social norms", {}, "cmni30"},
        {"feminine_norms", "feminine norms", "conforms to traditional feminine social norms", {}, "cfni45"},
    };
    return all;
}

const ConstructSpec& builtin_construct(const std::string& id) {
    for (const auto& c : builtin_constructs())
        if (c.id == id) return c;
    throw ConfigError("unknown construct '" + id + "'");
}

std::string statement_user_prompt(const ConstructSpec& spec, Direction d) {
    return prompts::fill_template(prompts::kStatementUser,
                                  {{"phrase", spec.phrase}, {"verb", d == Direction::up ? "identify" : "not identify"}});
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

StatementSynthesis synthesize_statements(clients::TextGenerator& generator, clients::FluencyScorer& fluency,
                                         clients::Embedder& embedder, const ConstructSpec& spec, Direction direction,
                                         const StatementSynthesisOptions& options) {
    if (options.batch < 1) throw ConfigError("synthesis batch must be >= 1");
    clients::GenerationRequest request;
    request.system = prompts::kStatementSystem;
    request.user = statement_user_prompt(spec, direction);
    request.prefill = options.prefill;
    request.max_new_tokens = options.max_new_tokens;
    request.temperature = options.temperature;
    request.top_p = options.top_p;

    StatementSynthesis out;
    std::vector<Vector> kept;
    bool exhausted = false;
    while (out.texts.size() < options.target && out.counts.raw < options.budget && !exhausted) {
        request.n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(options.batch),
                                                           options.budget - out.counts.raw));
        auto raw = generator.generate(request);
        exhausted = raw.empty() || static_cast<int>(raw.size()) < request.n;
        out.counts.raw += raw.size();

        std::vector<std::string> formed;
        for (auto& t : raw) {
            t = trim(t);
            if (extraction::is_valid_statement(t)) formed.push_back(std::move(t));
        }
        out.counts.well_formed += formed.size();
        if (formed.empty()) continue;

        const auto scores = fluency.score(formed);
        std::vector<std::string> fluent;
        std::vector<double> fluent_scores;
        for (std::size_t i = 0; i < formed.size(); ++i) {
            if (scores[i] >= options.fluency_threshold) {
                fluent.push_back(formed[i]);
                fluent_scores.push_back(scores[i]);
            }
        }
        out.counts.fluent += fluent.size();
        if (fluent.empty()) continue;

        const Matrix e = normalize_rows(embedder.embed(fluent));
        for (std::size_t i = 0; i < fluent.size(); ++i) {
            const Vector v = e.row(static_cast<Eigen::Index>(i)).transpose();
            const bool distinct = std::none_of(kept.begin(), kept.end(),
                                               [&](const Vector& k) { return v.dot(k) >= options.dedup_threshold; });
            if (!distinct) continue;
            kept.push_back(v);
            ++out.counts.deduped;
            if (out.texts.size() < options.target) {
                out.texts.push_back(fluent[i]);
                out.fluency.push_back(fluent_scores[i]);
            }
        }
    }
    out.counts.retained = out.texts.size();
    out.embeddings.resize(static_cast<Eigen::Index>(out.texts.size()), kept.empty() ? 0 : kept.front().size());
    for (std::size_t i = 0; i < out.texts.size(); ++i) out.embeddings.row(static_cast<Eigen::Index>(i)) = kept[i].transpose();
    if (out.texts.size() < options.target) {
        out.partial = true;
        out.warning = "partial corpus for " + spec.id + " " + to_string(direction) + ": " +
                      std::to_string(out.texts.size()) + " of " + std::to_string(options.target) + " statements after " +
                      std::to_string(out.counts.raw) + " generations";
    }
    return out;
}

std::string substitute_names(std::string head, const std::map<std::string, std::string>& names) {
    for (const auto& [from, to] : names) {
        for (auto pos = head.find(from); pos != std::string::npos; pos = head.find(from, pos + to.size()))
            head.replace(pos, from.size(), to);
    }
    return head;
}

int parse_rubric_score(const std::string& reply) {
    static const std::regex re(R"(\[RESULT\]\s*\(?\s*([1-5])\s*\)?\s*$)");
    std::smatch m;
    const std::string t = trim(reply);
    if (std::regex_search(t, m, re)) return m[1].str()[0] - '0';
    throw JudgeFormatError("rubric reply has no [RESULT] score: \"" + reply.substr(0, 120) + "\"");
}

HeadPipelineResult preprocess_heads(const std::vector<HeadRecord>& records, clients::ChatClient& judge,
                                    clients::Embedder& embedder, const HeadPipelineOptions& options) {
    HeadPipelineResult out;
    out.input = records.size();
    std::vector<std::string> passed;
    for (const auto& r : records) {
        if (r.p_valid < options.p_valid_min) continue;
        ++out.valid;
        const std::string head = substitute_names(r.head, options.names);
        const std::string user = prompts::fill_template(
            prompts::kRubricJudgeUser,
            {{"instruction", prompts::kHeadInstruction}, {"response", head}, {"rubric", prompts::kCoherenceRubric}});
        int score = 0;
        try {
            score = parse_rubric_score(
                judge.complete(prompts::kRubricJudgeSystem, user, options.judge_temperature, options.judge_max_new_tokens));
        } catch (const JudgeFormatError&) {
            ++out.unparseable;
            continue;
        }
        if (score < options.judge_min) continue;
        ++out.judged;
        passed.push_back(head);
    }
    if (passed.empty()) return out;
    const Matrix e = normalize_rows(embedder.embed(passed));
    const auto keep = dedup_greedy(e, options.dedup_threshold);
    out.embeddings.resize(static_cast<Eigen::Index>(keep.size()), e.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.heads.push_back(passed[keep[i]]);
        out.embeddings.row(static_cast<Eigen::Index>(i)) = e.row(static_cast<Eigen::Index>(keep[i]));
    }
    return out;
}

SjtSynthesis synthesize_sjts(const std::vector<SjtSeed>& items, const std::vector<std::string>& heads,
                             const Eigen::Ref<const Matrix>& head_embeddings, clients::TextGenerator& generator,
                             clients::FluencyScorer& fluency, clients::Embedder& embedder,
                             const std::string& inventory_ref, const SjtSynthesisOptions& options) {
    if (static_cast<std::size_t>(head_embeddings.rows()) != heads.size())
        throw ContractViolation("synthesize_sjts: heads and embeddings differ in length");
    std::vector<std::string> item_texts;
    for (const auto& i : items) item_texts.push_back(i.text);
    const Matrix item_embeddings = embedder.embed(item_texts);

    SjtSynthesis out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        const auto chosen = select_heads(item_embeddings.row(static_cast<Eigen::Index>(i)).transpose(), head_embeddings,
                                         std::min(options.heads_per_item, heads.size()));
        std::vector<std::string> stems, sources;
        for (auto h : chosen) {
            clients::GenerationRequest r;
            r.system = prompts::kSjtGenerationSystem;
            r.user = prompts::fill_template(prompts::kSjtGenerationUser, {{"item", item.text}, {"head", heads[h]}});
            r.max_new_tokens = options.max_new_tokens;
            r.temperature = options.temperature;
            r.top_p = options.top_p;
            r.n = 1;
            const auto texts = generator.generate(r);
            if (texts.empty()) continue;
            const std::string stem = trim(texts.front());
            if (stem.empty()) continue;
            stems.push_back(stem);
            sources.push_back(heads[h]);
        }
        PrunedItem pruned;
        pruned.construct = item.construct;
        if (!stems.empty()) {
            const auto scores = fluency.score(stems);
            std::vector<std::size_t> fluent;
            for (std::size_t j = 0; j < stems.size(); ++j)
                if (scores[j] >= options.fluency_threshold) fluent.push_back(j);
            std::vector<std::string> fluent_stems;
            for (auto j : fluent) {
                fluent_stems.push_back(stems[j]);
                pruned.source_heads.push_back(sources[j]);
            }
            if (!fluent_stems.empty()) {
                std::vector<double> fluent_scores;
                for (auto j : fluent) fluent_scores.push_back(scores[j]);
                pruned.candidates = CandidatePool(fluent_stems, fluent_scores, embedder.embed(fluent_stems));
                pruned.pruned = prune_conflicts(pruned.candidates, options.conflicts);
            }
        }
        out.per_item.emplace(item.item_id, std::move(pruned));
    }
    out.battery = finalize_battery(out.per_item, inventory_ref);
    return out;
}

}  // namespace psteer::corpus
