#include "psteer/psychometrics/psychometrics.hpp"

#include "psteer/corpus/prompts.hpp"
#include "psteer/io.hpp"
#include "psteer/vectors/logistic.hpp"
#include "psteer/vectors/probe.hpp"

#include <boost/tokenizer.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace psteer::psychometrics {

using nlohmann::json;

std::vector<std::string> LikertKey::letters() const {
    std::vector<std::string> out;
    for (const auto& [letter, _] : points) out.push_back(letter);
    return out;
}

int LikertKey::score(const std::string& letter, bool reverse_keyed) const {
    const auto it = points.find(letter);
    if (it == points.end()) throw ContractViolation("no Likert points for answer '" + letter + "'");
    return reverse_keyed ? reverse_key(it->second) : it->second;
}

LikertKey LikertKey::from_json(const json& j) {
    LikertKey k;
    k.points = j.get<std::map<std::string, int>>();
    for (const auto& [letter, p] : k.points)
        if (p < 1 || p > 5) throw ConfigError("likert_key: points for '" + letter + "' must be in 1..5");
    if (k.points.empty()) throw ConfigError("likert_key is empty");
    return k;
}

std::vector<std::string> Inventory::traits() const {
    std::vector<std::string> out;
    for (const auto& i : items)
        if (std::find(out.begin(), out.end(), i.trait) == out.end()) out.push_back(i.trait);
    return out;
}

Inventory Inventory::load_jsonl(const std::filesystem::path& path, std::string id) {
    Inventory inv;
    inv.id = id.empty() ? path.stem().string() : std::move(id);
    for (const auto& line : io::read_jsonl(path)) {
        try {
            inv.items.push_back({line.at("item_id").get<std::string>(), line.at("text").get<std::string>(),
                                 line.at("trait").get<std::string>(), line.value("reverse_keyed", false)});
        } catch (const json::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }
    return inv;
}

void Inventory::save_jsonl(const std::filesystem::path& path) const {
    std::string out;
    for (const auto& i : items)
        out += json{{"item_id", i.item_id}, {"text", i.text}, {"trait", i.trait}, {"reverse_keyed", i.reverse_keyed}}
                   .dump() +
               "\n";
    io::write_text(path, out);
}

Inventory Inventory::import_mpi_csv(const std::filesystem::path& path, std::string id) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    auto split = [](const std::string& line) {
        std::string l = line;
        if (!l.empty() && l.back() == '\r') l.pop_back();
        Tokenizer tok(l);
        return std::vector<std::string>(tok.begin(), tok.end());
    };
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + " is empty");
    const auto header = split(line);
    auto column = [&](std::initializer_list<const char*> names) -> int {
        for (const char* n : names)
            for (std::size_t c = 0; c < header.size(); ++c)
                if (header[c] == n) return static_cast<int>(c);
        return -1;
    };
    const int text_col = column({"text", "item"});
    const int trait_col = column({"trait", "label_ocean"});
    const int key_col = column({"key", "reverse"});
    const int id_col = column({"item_id", "id"});
    if (text_col < 0 || trait_col < 0 || key_col < 0)
        throw ConfigError(path.string() + ": header needs text, trait (or label_ocean) and key columns");

    Inventory inv;
    inv.id = std::move(id);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++row;
        std::vector<std::string> cells;
        try {
            cells = split(line);
        } catch (const boost::escaped_list_error& e) {
            throw ConfigError(path.string() + ": row " + std::to_string(row) + ": " + e.what());
        }
        const auto need = static_cast<std::size_t>(std::max({text_col, trait_col, key_col, id_col}));
        if (cells.size() <= need) throw ConfigError(path.string() + ": row " + std::to_string(row) + " is short");
        const std::string key = cells[static_cast<std::size_t>(key_col)];
        const bool reverse_column = header[static_cast<std::size_t>(key_col)] == "reverse";
        bool reverse = false;
        if (reverse_column ? (key == "1" || key == "true") : (key == "-1" || key == "-"))
            reverse = true;
        else if (!(reverse_column ? (key == "0" || key == "false") : (key == "1" || key == "+1" || key == "+")))
            throw ConfigError(path.string() + ": row " + std::to_string(row) + ": unknown key '" + key + "'");
        inv.items.push_back({id_col >= 0 ? cells[static_cast<std::size_t>(id_col)] : std::to_string(row),
                             cells[static_cast<std::size_t>(text_col)], cells[static_cast<std::size_t>(trait_col)],
                             reverse});
    }
    return inv;
}

std::string inventory_system_prompt(const std::optional<std::string>& description) {
    return description ? prompts::fill_template(prompts::kInventorySystem, {{"description", *description}})
                       : prompts::without_description(prompts::kInventorySystem);
}

std::string inventory_user_prompt(const std::string& item_text) {
    std::string item = item_text;
    while (!item.empty() && (item.back() == '.' || item.back() == ' ')) item.pop_back();
    if (!item.empty()) item[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(item[0])));
    return prompts::fill_template(prompts::kInventoryUser, {{"item", item}});
}

std::string sjt_system_prompt(const std::optional<std::string>& description) {
    return description ? prompts::fill_template(prompts::kSjtSystem, {{"description", *description}})
                       : prompts::without_description(prompts::kSjtSystem);
}

std::optional<double> InventoryResult::trait_mean(const std::string& trait) const {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& r : responses) {
        if (r.trait != trait) continue;
        sum += r.likert;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::map<std::string, double> InventoryResult::trait_means() const {
    std::map<std::string, double> out;
    for (const auto& r : responses)
        if (!out.count(r.trait)) out[r.trait] = *trait_mean(r.trait);
    return out;
}

std::string InventoryResult::letters() const {
    std::string out;
    for (const auto& r : responses) out += r.letter;
    return out;
}

InventoryResult administer_inventory(backend::LanguageModel& model, const Inventory& inventory,
                                     const std::optional<std::string>& p2_description,
                                     const backend::Schedule& schedule) {
    const std::string system = inventory_system_prompt(p2_description);
    const auto options = inventory.key.letters();
    InventoryResult out;
    for (const auto& item : inventory.items) {
        std::string letter;
        try {
            letter = backend::constrained_choice(model, system, inventory_user_prompt(item.text), options, schedule);
        } catch (const TransportError& e) {
            throw TransportError("item " + item.item_id + ": " + e.what());
        } catch (const UnsupportedOptionError& e) {
            throw UnsupportedOptionError("item " + item.item_id + ": " + e.what());
        } catch (const ContractViolation& e) {
            throw ContractViolation("item " + item.item_id + ": " + e.what());
        }
        out.responses.push_back({item.item_id, item.trait, letter, inventory.key.score(letter, item.reverse_keyed)});
    }
    return out;
}

std::vector<double> SjtResult::fluency_scores() const {
    std::vector<double> out;
    for (const auto& r : responses)
        if (!r.missing) out.push_back(r.fluency);
    return out;
}

std::size_t SjtResult::missing() const {
    return static_cast<std::size_t>(std::count_if(responses.begin(), responses.end(), [](const auto& r) { return r.missing; }));
}

std::string SjtResult::concatenated() const {
    std::string out;
    for (const auto& r : responses) {
        out += r.missing ? std::string("\x1f<missing>") : r.text;
        out += '\x1e';
    }
    return out;
}

SjtResult administer_sjts(backend::LanguageModel& model, const corpus::SjtBattery& battery,
                          clients::FluencyScorer& fluency, const std::optional<std::string>& p2_description,
                          const backend::Schedule& schedule, const SjtOptions& options) {
    const std::string system = sjt_system_prompt(p2_description);
    backend::DecodeParams decode;
    decode.max_new_tokens = options.max_new_tokens;
    decode.greedy = true;
    decode.temperature = 0.0;
    decode.prefill = options.prefill;

    SjtResult out;
    std::vector<std::size_t> present;
    std::vector<std::string> texts;
    for (const auto& item : battery.items) {
        SjtResponse r{item.item_id, item.k_index, item.construct, {}, 0.0, false, {}};
        try {
            r.text = options.prefill + backend::generate(model, system, item.stem, decode, schedule).text;
            present.push_back(out.responses.size());
            texts.push_back(r.text);
        } catch (const TransportError& e) {
            r.missing = true;
            r.error = e.what();
        }
        out.responses.push_back(std::move(r));
    }
    if (!texts.empty()) {
        const auto scores = fluency.score(texts);
        if (scores.size() != texts.size()) throw TransportError("fluency scorer returned the wrong number of scores");
        for (std::size_t i = 0; i < present.size(); ++i) out.responses[present[i]].fluency = scores[i];
    }
    return out;
}

double ConstructClassifier::decision(const Eigen::Ref<const Vector>& embedding) const {
    if (embedding.size() != weights.size())
        throw ContractViolation("classifier " + construct + ": embedding dimension " + std::to_string(embedding.size()) +
                                " != " + std::to_string(weights.size()));
    return weights.dot(embedding) + intercept;
}

double ConstructClassifier::probability(const Eigen::Ref<const Vector>& embedding) const {
    const double z = decision(embedding);
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

json ConstructClassifier::to_json() const {
    return {{"construct", construct}, {"weights", io::to_json(weights)}, {"intercept", intercept}, {"manifest", manifest}};
}

ConstructClassifier ConstructClassifier::from_json(const json& j) {
    ConstructClassifier c;
    try {
        c.construct = j.at("construct").get<std::string>();
        c.weights = io::vector_from_json(j.at("weights"));
        c.intercept = j.at("intercept").get<double>();
        c.manifest = j.value("manifest", json::object());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("classifier: ") + e.what());
    }
    return c;
}

namespace {

std::pair<Matrix, Vector> embedded_corpus(const extraction::StatementCorpus& corpus, clients::Embedder& embedder) {
    if (corpus.up.empty() || corpus.down.empty())
        throw TrainingError("classifier " + corpus.construct + " needs statements in both directions");
    const Matrix up = embedder.embed(corpus.up);
    const Matrix down = embedder.embed(corpus.down);
    return vectors::stack_labeled(up, down);
}

vectors::LogisticOptions logistic_options(const ClassifierOptions& o) {
    vectors::LogisticOptions lo;
    lo.penalty = Regularization::L2;
    lo.fit_intercept = true;
    lo.C = o.C;
    lo.max_iterations = o.max_iterations;
    lo.tolerance = o.tolerance;
    return lo;
}

}  // namespace

ConstructClassifier train_construct_classifier(const extraction::StatementCorpus& corpus, clients::Embedder& embedder,
                                               const ClassifierOptions& options) {
    const auto [X, y] = embedded_corpus(corpus, embedder);
    const auto model = vectors::fit_logistic(X, y, logistic_options(options));
    ConstructClassifier c;
    c.construct = corpus.construct;
    c.weights = model.weights;
    c.intercept = model.intercept;
    c.manifest = {{"corpus_hash", corpus.hash()},
                  {"n_up", corpus.up.size()},
                  {"n_down", corpus.down.size()},
                  {"max_iterations", options.max_iterations},
                  {"iterations", model.iterations},
                  {"tolerance", options.tolerance},
                  {"C", options.C},
                  {"converged", model.converged},
                  {"solver", model.solver},
                  {"train_accuracy", model.accuracy(X, y)},
                  {"seed", nullptr}};
    return c;
}

HoldoutReport classifier_holdout(const extraction::StatementCorpus& corpus, clients::Embedder& embedder,
                                 double train_fraction, std::uint64_t seed, const ClassifierOptions& options) {
    const Matrix up = embedder.embed(corpus.up);
    const Matrix down = embedder.embed(corpus.down);
    if (up.rows() < 2 || down.rows() < 2) throw TrainingError("holdout needs at least 2 statements per direction");
    const auto [up_tr, up_te] = vectors::stratified_split(up.rows(), train_fraction, seed);
    const auto [dn_tr, dn_te] = vectors::stratified_split(down.rows(), train_fraction, seed + 1);
    const auto [X_tr, y_tr] = vectors::stack_labeled(up(up_tr, Eigen::all), down(dn_tr, Eigen::all));
    const auto [X_te, y_te] = vectors::stack_labeled(up(up_te, Eigen::all), down(dn_te, Eigen::all));
    const auto model = vectors::fit_logistic(X_tr, y_tr, logistic_options(options));

    HoldoutReport r;
    r.seed = seed;
    r.train_accuracy = model.accuracy(X_tr, y_tr);
    r.test_accuracy = model.accuracy(X_te, y_te);
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (Eigen::Index i = 0; i < X_te.rows(); ++i) {
        const bool pred = model.probability(X_te.row(i).transpose()) >= 0.5;
        const bool truth = y_te[i] > 0.5;
        (pred ? (truth ? tp : fp) : (truth ? fn : tn)) += 1;
    }
    auto f1 = [](double t, double f_pos, double f_neg) {
        return t == 0 ? 0.0 : 2 * t / (2 * t + f_pos + f_neg);
    };
    r.f1_macro = (f1(tp, fp, fn) + f1(tn, fn, fp)) / 2.0;
    return r;
}

double classify_to_likert(const ConstructClassifier& classifier, const std::string& text, clients::Embedder& embedder) {
    const Matrix e = embedder.embed({text});
    return likert_from_probability(classifier.probability(e.row(0).transpose()));
}

double mean_likert(const ConstructClassifier& classifier, const std::vector<std::string>& texts,
                   clients::Embedder& embedder) {
    if (texts.empty()) throw InsufficientDataError("mean_likert: no texts");
    const Matrix e = embedder.embed(texts);
    double sum = 0;
    for (Eigen::Index i = 0; i < e.rows(); ++i) sum += likert_from_probability(classifier.probability(e.row(i).transpose()));
    return sum / static_cast<double>(e.rows());
}

FluencyBaseline FluencyBaseline::from_scores(std::string battery_id, std::vector<double> scores) {
    if (scores.empty()) throw InsufficientDataError("fluency baseline needs at least one score");
    FluencyBaseline b;
    b.battery_id = std::move(battery_id);
    b.scores = std::move(scores);
    double sum = 0;
    for (double s : b.scores) sum += s;
    b.mean = sum / static_cast<double>(b.scores.size());
    return b;
}

std::string to_string(GateRule r) {
    switch (r) {
        case GateRule::none: return "none";
        case GateRule::mean_drop: return "mean_drop";
        case GateRule::tail_drop: return "tail_drop";
        case GateRule::repetition: return "repetition";
    }
    return "none";
}

GateRule gate_rule_from_string(std::string_view s) {
    for (auto r : {GateRule::none, GateRule::mean_drop, GateRule::tail_drop, GateRule::repetition})
        if (to_string(r) == s) return r;
    throw ConfigError("unknown gate rule '" + std::string(s) + "'");
}

GateResult fluency_gate(const std::vector<double>& step_scores, const FluencyBaseline& baseline,
                        const std::vector<std::string>& history, const std::string& signature,
                        const GateThresholds& t) {
    if (step_scores.empty()) throw ContractViolation("fluency_gate: empty step");
    if (!(baseline.mean > 0)) throw ContractViolation("fluency_gate: baseline mean must be positive");

    GateResult r;
    double sum = 0;
    for (double s : step_scores) sum += s;
    const double n = static_cast<double>(step_scores.size());
    r.step_mean = sum / n;

    // Relative slack of 1e-12 keeps exact boundary cases (mean equal to the
    // threshold) from failing through rounding in the mean or the product.
    constexpr double kSlack = 1e-12;
    const double mean_floor = t.mean_ratio * baseline.mean;
    const double tail_floor = t.tail_ratio * baseline.mean;
    std::size_t below = 0;
    for (double s : step_scores) below += s < tail_floor * (1 - kSlack);
    r.tail_fraction = static_cast<double>(below) / n;

    for (auto it = history.rbegin(); it != history.rend() && *it == signature; ++it) ++r.identical_run;

    if (r.step_mean < mean_floor * (1 - kSlack)) {
        r.pass = false;
        r.rule = GateRule::mean_drop;
    } else if (static_cast<double>(below) > t.tail_fraction * n * (1 + kSlack)) {
        r.pass = false;
        r.rule = GateRule::tail_drop;
    } else if (r.identical_run >= t.repeat_steps) {
        r.pass = false;
        r.rule = GateRule::repetition;
    }
    return r;
}

std::string response_signature(const SjtResult& sjts, const InventoryResult& inventory) {
    return sjts.concatenated() + '\x1d' + inventory.letters();
}

int parse_judge_score(const std::string& reply) {
    const auto a = reply.find_first_not_of(" \t\r\n");
    const auto b = reply.find_last_not_of(" \t\r\n");
    if (a != std::string::npos && a == b && reply[a] >= '1' && reply[a] <= '5') return reply[a] - '0';
    throw JudgeFormatError("judge reply is not a single integer from 1 to 5: \"" + reply.substr(0, 80) + "\"");
}

int judge_sjt(clients::ChatClient& judge, const corpus::ConstructSpec& construct, const std::string& stem,
              const std::string& response, int attempts) {
    if (construct.facets.empty())
        throw ContractViolation("construct " + construct.id + " has no facets to describe it to the judge");
    const std::string system = prompts::fill_template(
        prompts::kJudgeSystem, {{"construct", construct.name}, {"characteristics", construct.characteristics()}});
    const std::string user = prompts::fill_template(prompts::kJudgeUser, {{"situation", stem}, {"response", response}});
    std::string last;
    for (int i = 0; i < std::max(1, attempts); ++i) {
        last = judge.complete(system, user, 0.0, 8);
        try {
            return parse_judge_score(last);
        } catch (const JudgeFormatError&) {
        }
    }
    throw JudgeFormatError("judge gave no usable score after " + std::to_string(attempts) + " attempts; last reply \"" +
                           last.substr(0, 80) + "\"");
}

}  // namespace psteer::psychometrics
