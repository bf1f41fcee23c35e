#include "psteer/extraction/extraction.hpp"

#include "psteer/io.hpp"

#include <fstream>

namespace psteer::extraction {

using nlohmann::json;

std::string to_string(PrefillPolicy p) { return p == PrefillPolicy::yes_always ? "yes_always" : "yes_no_by_label"; }

PrefillPolicy prefill_policy_from_string(std::string_view s) {
    if (s == "yes_always") return PrefillPolicy::yes_always;
    if (s == "yes_no_by_label") return PrefillPolicy::yes_no_by_label;
    throw ConfigError("unknown b_prefill_policy '" + std::string(s) + "'");
}

bool is_valid_statement(std::string_view s, std::string* why) {
    auto fail = [&](const char* msg) {
        if (why) *why = msg;
        return false;
    };
    if (s.empty()) return fail("empty");
    if (s.back() != '.') return fail("does not end with a period");
    if (s.find('.') != s.size() - 1) return fail("has more than one period");
    // first person: the first word is I, I'm, I've, I'd, I'll, My or Me
    const auto end = s.find_first_of(" ,.");
    const std::string_view first = s.substr(0, end);
    static constexpr std::string_view kFirstPerson[] = {"I", "I'm", "I've", "I'd", "I'll", "My", "Me"};
    for (auto w : kFirstPerson)
        if (first == w) return true;
    return fail("is not first person");
}

std::string StatementCorpus::hash() const {
    return sha256_hex(json{{"construct", construct}, {"up", up}, {"down", down}}.dump());
}

std::vector<std::string> StatementCorpus::problems() const {
    std::vector<std::string> out;
    for (auto d : kBothDirections) {
        const auto& list = (*this)[d];
        if (list.empty()) out.push_back(psteer::to_string(d) + " statements are empty");
        for (std::size_t i = 0; i < list.size(); ++i) {
            std::string why;
            if (!is_valid_statement(list[i], &why))
                out.push_back(psteer::to_string(d) + "[" + std::to_string(i) + "] " + why + ": \"" + list[i] + "\"");
        }
    }
    return out;
}

void StatementCorpus::validate() const {
    const auto p = problems();
    if (p.empty()) return;
    std::string msg = "corpus " + construct + ": " + p.front();
    if (p.size() > 1) msg += " (and " + std::to_string(p.size() - 1) + " more)";
    throw ContractViolation(msg);
}

StatementCorpus StatementCorpus::load_jsonl(const std::filesystem::path& path, std::string construct) {
    StatementCorpus corpus;
    corpus.construct = std::move(construct);
    for (const auto& line : io::read_jsonl(path)) {
        if (corpus.construct.empty()) corpus.construct = line.value("construct", "");
        const auto direction = direction_from_string(line.at("direction").get<std::string>());
        (direction == Direction::up ? corpus.up : corpus.down).push_back(line.at("text").get<std::string>());
    }
    return corpus;
}

void StatementCorpus::save_jsonl(const std::filesystem::path& path) const {
    std::string out;
    for (auto d : kBothDirections)
        for (const auto& s : (*this)[d])
            out += json{{"construct", construct}, {"direction", psteer::to_string(d)}, {"text", s}}.dump() + "\n";
    io::write_text(path, out);
}

backend::ChatPrompt build_extraction_prompt(const std::string& statement, ExtractionMode mode, Direction label,
                                            PrefillPolicy policy) {
    if (statement.empty()) throw ContractViolation("build_extraction_prompt: empty statement");
    backend::ChatPrompt p;
    p.system = kExtractionSystem;
    if (mode == ExtractionMode::b) {
        p.user = "Answer with Yes or No: Does the following statement accurately describe you?\nStatement: " +
                 statement + "\nAnswer:";
        p.prefill = policy == PrefillPolicy::yes_no_by_label && label == Direction::down ? "No" : "Yes";
    } else {
        p.user = kSelfDescriptionRequest;
        p.prefill = statement;
    }
    return p;
}

const Matrix& ActivationSet::at(int layer, Direction d) const {
    const auto& list = d == Direction::up ? up : down;
    if (layer < 0 || layer >= static_cast<int>(list.size()))
        throw ContractViolation("activation set has no layer " + std::to_string(layer));
    return list[static_cast<std::size_t>(layer)];
}

void ActivationSet::validate() const {
    if (up.size() != down.size() || up.empty()) throw ContractViolation("activation set: layer counts differ");
    for (std::size_t l = 0; l < up.size(); ++l) {
        if (up[l].rows() != n_up() || down[l].rows() != n_down() || up[l].cols() != hidden_dim() ||
            down[l].cols() != hidden_dim())
            throw ContractViolation("activation set: inconsistent shape at layer " + std::to_string(l));
        if (!up[l].allFinite() || !down[l].allFinite())
            throw ContractViolation("activation set: non-finite entry at layer " + std::to_string(l));
    }
}

void ActivationSet::save(const std::filesystem::path& dir, const std::string& stem) const {
    validate();
    std::filesystem::create_directories(dir);
    {
        std::ofstream blob(dir / (stem + ".f32"), std::ios::binary);
        if (!blob) throw Error("cannot write " + (dir / (stem + ".f32")).string());
        for (std::size_t l = 0; l < up.size(); ++l) {
            io::write_f32(blob, up[l]);
            io::write_f32(blob, down[l]);
        }
    }
    io::write_json(dir / (stem + ".json"), {{"mode", psteer::to_string(mode)},
                                            {"construct", construct},
                                            {"model_id", model_id},
                                            {"layer_count", layer_count()},
                                            {"hidden_dim", hidden_dim()},
                                            {"n_up", n_up()},
                                            {"n_down", n_down()},
                                            {"sha256", corpus_hash}});
}

ActivationSet ActivationSet::load(const std::filesystem::path& dir, const std::string& stem) {
    const json side = io::read_json(dir / (stem + ".json"));
    ActivationSet set;
    int layers = 0;
    Eigen::Index d = 0, n_up = 0, n_down = 0;
    try {
        set.mode = mode_from_string(side.at("mode").get<std::string>());
        set.construct = side.at("construct").get<std::string>();
        set.model_id = side.at("model_id").get<std::string>();
        set.corpus_hash = side.at("sha256").get<std::string>();
        layers = side.at("layer_count").get<int>();
        d = side.at("hidden_dim").get<Eigen::Index>();
        n_up = side.at("n_up").get<Eigen::Index>();
        n_down = side.at("n_down").get<Eigen::Index>();
    } catch (const json::exception& e) {
        throw ConfigError((dir / (stem + ".json")).string() + ": " + e.what());
    }
    std::ifstream blob(dir / (stem + ".f32"), std::ios::binary);
    if (!blob) throw ConfigError("cannot open " + (dir / (stem + ".f32")).string());
    for (int l = 0; l < layers; ++l) {
        set.up.push_back(io::read_f32(blob, n_up, d));
        set.down.push_back(io::read_f32(blob, n_down, d));
    }
    if (blob.peek() != std::ifstream::traits_type::eof())
        throw ConfigError((dir / (stem + ".f32")).string() + " is longer than its sidecar declares");
    return set;
}

ActivationSet extract_activation_set(backend::LanguageModel& model, const StatementCorpus& corpus,
                                     ExtractionMode mode, PrefillPolicy policy, const ExtractionProgress& progress) {
    const auto& h = model.handle();
    if (!h.capabilities.supports_activation_capture)
        throw UnsupportedOptionError(h.model_id + " cannot capture activations");

    ActivationSet set;
    set.mode = mode;
    set.construct = corpus.construct;
    set.model_id = h.model_id;
    set.corpus_hash = corpus.hash();
    const std::size_t total = corpus.up.size() + corpus.down.size();
    std::size_t done = 0;
    for (auto dir : kBothDirections) {
        const auto& statements = corpus[dir];
        auto& out = dir == Direction::up ? set.up : set.down;
        out.assign(static_cast<std::size_t>(h.layer_count),
                   Matrix(static_cast<Eigen::Index>(statements.size()), h.hidden_dim));
        for (std::size_t i = 0; i < statements.size(); ++i) {
            const std::string where = psteer::to_string(dir) + "[" + std::to_string(i) + "]";
            Matrix rows;
            try {
                const auto prompt = build_extraction_prompt(statements[i], mode, dir, policy);
                rows = backend::capture_prefill_activations(model, prompt.system, prompt.user, prompt.prefill);
            } catch (const EmptyPrefillError& e) {
                throw EmptyPrefillError("statement " + where + ": " + e.what());
            } catch (const TransportError& e) {
                throw TransportError("statement " + where + ": " + e.what());
            } catch (const ContractViolation& e) {
                throw ContractViolation("statement " + where + ": " + e.what());
            }
            for (int l = 0; l < h.layer_count; ++l)
                out[static_cast<std::size_t>(l)].row(static_cast<Eigen::Index>(i)) = rows.row(l);
            if (progress) progress(++done, total);
        }
    }
    set.validate();
    return set;
}

}  // namespace psteer::extraction
