#include "psteer/sweep/sweep.hpp"

#include "psteer/io.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace psteer::sweep {

using nlohmann::json;
using psychometrics::GateResult;
using psychometrics::GateRule;

std::string to_string(Instrument i) { return i == Instrument::sjt ? "sjt" : "inventory"; }

namespace {

std::string safe_name(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.' && c != '_') c = '_';
    return s;
}

json thresholds_json(const psychometrics::GateThresholds& t) {
    return {{"mean_ratio", t.mean_ratio},
            {"tail_ratio", t.tail_ratio},
            {"tail_fraction", t.tail_fraction},
            {"repeat_steps", t.repeat_steps}};
}

psychometrics::GateThresholds thresholds_from(const json& j) {
    psychometrics::GateThresholds t;
    if (j.is_null()) return t;
    t.mean_ratio = j.value("mean_ratio", t.mean_ratio);
    t.tail_ratio = j.value("tail_ratio", t.tail_ratio);
    t.tail_fraction = j.value("tail_fraction", t.tail_fraction);
    t.repeat_steps = j.value("repeat_steps", t.repeat_steps);
    return t;
}

json gate_json(const GateResult& g) {
    return {{"pass", g.pass},
            {"rule", psychometrics::to_string(g.rule)},
            {"step_mean", g.step_mean},
            {"tail_fraction", g.tail_fraction},
            {"identical_run", g.identical_run}};
}

GateResult gate_from(const json& j) {
    GateResult g;
    g.pass = j.at("pass").get<bool>();
    g.rule = psychometrics::gate_rule_from_string(j.at("rule").get<std::string>());
    g.step_mean = j.at("step_mean").get<double>();
    g.tail_fraction = j.at("tail_fraction").get<double>();
    g.identical_run = j.at("identical_run").get<std::size_t>();
    return g;
}

json sjt_json(const psychometrics::SjtResult& r) {
    json out = json::array();
    for (const auto& s : r.responses) {
        json e = {{"item_id", s.item_id}, {"k_index", s.k_index}, {"construct", s.construct}, {"text", s.text},
                  {"fluency", s.fluency}};
        if (s.missing) e["error"] = s.error;
        out.push_back(std::move(e));
    }
    return out;
}

psychometrics::SjtResult sjt_from(const json& j) {
    psychometrics::SjtResult r;
    for (const auto& e : j)
        r.responses.push_back({e.at("item_id").get<std::string>(), e.at("k_index").get<std::size_t>(),
                               e.at("construct").get<std::string>(), e.at("text").get<std::string>(),
                               e.at("fluency").get<double>(), e.contains("error"), e.value("error", "")});
    return r;
}

json fluency_json(const FluencyStats& f) { return {{"mean", f.mean}, {"min", f.min}, {"scored", f.scored}}; }

FluencyStats fluency_from(const json& j) {
    return {j.at("mean").get<double>(), j.at("min").get<double>(), j.at("scored").get<std::size_t>()};
}

FluencyStats stats_of(const std::vector<double>& scores) {
    FluencyStats f;
    f.scored = scores.size();
    if (scores.empty()) return f;
    double sum = 0;
    for (double s : scores) sum += s;
    f.mean = sum / static_cast<double>(scores.size());
    f.min = *std::min_element(scores.begin(), scores.end());
    return f;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j) {
    return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

// Append-only JSONL file: manifest line first, then one record per line.
class Checkpoint {
public:
    Checkpoint(const PersistOptions& persist, json manifest) : path_(persist.path), manifest_(std::move(manifest)) {
        if (!path_) return;
        if (!std::filesystem::exists(*path_) || std::filesystem::file_size(*path_) == 0) {
            std::filesystem::remove(*path_);
            io::append_jsonl(*path_, manifest_);
            return;
        }
        if (!persist.resume)
            throw ConfigError(path_->string() + " already exists; resume it or choose another output");
        const std::string text = io::read_text(*path_);
        const auto complete = text.rfind('\n');
        if (complete == std::string::npos) {
            // only a partial manifest made it to disk
            std::filesystem::remove(*path_);
            io::append_jsonl(*path_, manifest_);
            return;
        }
        if (complete + 1 != text.size()) std::filesystem::resize_file(*path_, complete + 1);
        std::size_t start = 0, line_no = 0;
        while (start <= complete) {
            const auto end = text.find('\n', start);
            const std::string line = text.substr(start, end - start);
            start = end + 1;
            ++line_no;
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error& e) {
                throw ConfigError(path_->string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
            if (line_no == 1) {
                if (j != manifest_)
                    throw ConfigError(path_->string() + " was written for a different configuration");
                continue;
            }
            existing_.push_back(std::move(j));
        }
    }

    const std::vector<json>& existing() const { return existing_; }
    void append(const json& record) const {
        if (path_) io::append_jsonl(*path_, record);
    }

private:
    std::optional<std::filesystem::path> path_;
    json manifest_;
    std::vector<json> existing_;
};

std::pair<json, std::vector<json>> read_checkpoint(const std::filesystem::path& path, const std::string& kind) {
    const std::string text = io::read_text(path);
    const auto complete = text.rfind('\n');
    if (complete == std::string::npos) throw ConfigError(path.string() + " has no complete manifest line");
    json manifest;
    std::vector<json> records;
    std::size_t start = 0, line_no = 0;
    while (start <= complete) {
        const auto end = text.find('\n', start);
        const std::string line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            (line_no == 1 ? manifest : records.emplace_back()) = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (manifest.value("kind", "") != kind) throw ConfigError(path.string() + " is not a " + kind + " file");
    return {manifest, records};
}

backend::Schedule schedule_for(const vectors::SteeringVector& v, int layer, int stride, double alpha) {
    if (alpha == 0.0) return {};
    backend::InjectionDirective d{layer, v.id(), alpha, stride, std::nullopt};
    return {backend::ScheduledInjection{d, v.components}};
}

const vectors::SteeringVector& vector_for(const vectors::VectorStore& store, const std::string& trait, Method method,
                                          int layer, Direction direction) {
    const auto* v = store.find(trait, method, layer, direction);
    if (!v)
        throw ConfigError("no " + to_string(method) + " vector for " + trait + " " + to_string(direction) +
                          " at layer " + std::to_string(layer));
    return *v;
}

corpus::SjtBattery battery_subset(const corpus::SjtBattery& battery, const std::set<std::string>& traits) {
    corpus::SjtBattery out;
    out.inventory_ref = battery.inventory_ref;
    out.k = battery.k;
    for (const auto& item : battery.items)
        if (traits.count(item.construct)) out.items.push_back(item);
    return out;
}

const psychometrics::ConstructClassifier& classifier_for(const Instruments& in, const std::string& trait) {
    const auto it = in.classifiers.find(trait);
    if (it == in.classifiers.end()) throw ConfigError("no classifier for trait " + trait);
    return it->second;
}

psychometrics::SjtResult administer_or_checkpoint(backend::LanguageModel& model, const corpus::SjtBattery& battery,
                                                  clients::FluencyScorer& fluency, const backend::Schedule& schedule,
                                                  const psychometrics::SjtOptions& options, double alpha) {
    psychometrics::SjtResult r;
    try {
        r = psychometrics::administer_sjts(model, battery, fluency, std::nullopt, schedule, options);
    } catch (const TransportError& e) {
        throw CheckpointError("alpha " + format_number(alpha) + ": " + e.what());
    }
    for (const auto& s : r.responses)
        if (s.missing)
            throw CheckpointError("alpha " + format_number(alpha) + ": SJT " + s.item_id + ": " + s.error);
    return r;
}

std::vector<std::string> texts_of(const psychometrics::SjtResult& r, const std::string& trait) {
    std::vector<std::string> out;
    for (const auto& s : r.responses)
        if (s.construct == trait) out.push_back(s.text);
    return out;
}

std::vector<double> fluency_of(const psychometrics::SjtResult& r, const std::string& trait) {
    std::vector<double> out;
    for (const auto& s : r.responses)
        if (s.construct == trait && !s.missing) out.push_back(s.fluency);
    return out;
}

bool moved(double score, double baseline, Direction d) { return d == Direction::up ? score > baseline : score < baseline; }

}  // namespace

void SweepConfig::validate() const {
    if (trait.empty()) throw ConfigError("sweep: trait is empty");
    if (stride < 1) throw ConfigError("sweep: stride must be >= 1");
    if (layer < 0) throw ConfigError("sweep: layer must be >= 0");
    if (alpha_start < 1) throw ConfigError("sweep: alpha_start must be >= 1");
    if (alpha_step < 1) throw ConfigError("sweep: alpha_step must be >= 1");
    if (alpha_cap < alpha_start) throw ConfigError("sweep: alpha_cap must be >= alpha_start");
    if (gate.repeat_steps < 1) throw ConfigError("sweep: gate.repeat_steps must be >= 1");
}

std::string SweepConfig::file_stem() const {
    return safe_name(model_id) + "__" + to_string(method) + "__l" + std::to_string(layer) + "__s" +
           std::to_string(stride) + "__" + safe_name(trait) + "__" + to_string(direction);
}

json SweepConfig::to_json() const {
    return {{"model_id", model_id},
            {"method", to_string(method)},
            {"layer", layer},
            {"stride", stride},
            {"trait", trait},
            {"direction", to_string(direction)},
            {"alpha_start", alpha_start},
            {"alpha_step", alpha_step},
            {"alpha_cap", alpha_cap},
            {"batteries", {{"inventory_ref", inventory_ref}, {"sjt_ref", sjt_ref}}},
            {"inventory_trait", inventory_trait.empty() ? trait : inventory_trait},
            {"gate", thresholds_json(gate)},
            {"sjt", {{"max_new_tokens", sjt.max_new_tokens}, {"prefill", sjt.prefill}}}};
}

SweepConfig SweepConfig::from_json(const json& j) {
    SweepConfig c;
    try {
        c.model_id = j.value("model_id", "");
        c.method = method_from_string(j.at("method").get<std::string>());
        c.layer = j.at("layer").get<int>();
        c.stride = j.value("stride", 1);
        c.trait = j.at("trait").get<std::string>();
        c.direction = direction_from_string(j.at("direction").get<std::string>());
        c.alpha_start = j.value("alpha_start", 1);
        c.alpha_step = j.value("alpha_step", 1);
        c.alpha_cap = j.value("alpha_cap", 512);
        if (j.contains("batteries")) {
            c.inventory_ref = j["batteries"].value("inventory_ref", "");
            c.sjt_ref = j["batteries"].value("sjt_ref", "");
        }
        c.inventory_trait = j.value("inventory_trait", "");
        c.gate = thresholds_from(j.value("gate", json()));
        if (j.contains("sjt")) {
            c.sjt.max_new_tokens = j["sjt"].value("max_new_tokens", c.sjt.max_new_tokens);
            c.sjt.prefill = j["sjt"].value("prefill", c.sjt.prefill);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("sweep config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string SweepRecord::signature() const { return psychometrics::response_signature(sjt, inventory); }

json SweepRecord::to_json() const {
    json inv = json::array();
    for (const auto& r : inventory.responses)
        inv.push_back({{"item_id", r.item_id}, {"trait", r.trait}, {"letter", r.letter}, {"likert", r.likert}});
    return {{"alpha", alpha},
            {"sjt_responses", sjt_json(sjt)},
            {"fluency", fluency_json(fluency)},
            {"inventory_letters", inventory.letters()},
            {"inventory", inv},
            {"scores", {{"sjt", opt(sjt_score)}, {"inventory", opt(inventory_score)}}},
            {"gate", gate ? gate_json(*gate) : json(nullptr)},
            {"valid", {{"sjt", valid_sjt}, {"inventory", valid_inventory}}},
            {"stop", stop}};
}

SweepRecord SweepRecord::from_json(const json& j) {
    SweepRecord r;
    try {
        r.alpha = j.at("alpha").get<double>();
        r.sjt = sjt_from(j.at("sjt_responses"));
        r.fluency = fluency_from(j.at("fluency"));
        for (const auto& e : j.at("inventory"))
            r.inventory.responses.push_back({e.at("item_id").get<std::string>(), e.at("trait").get<std::string>(),
                                             e.at("letter").get<std::string>(), e.at("likert").get<int>()});
        r.sjt_score = opt_from(j.at("scores").at("sjt"));
        r.inventory_score = opt_from(j.at("scores").at("inventory"));
        if (!j.at("gate").is_null()) r.gate = gate_from(j.at("gate"));
        r.valid_sjt = j.at("valid").at("sjt").get<bool>();
        r.valid_inventory = j.at("valid").at("inventory").get<bool>();
        r.stop = j.at("stop").get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("sweep record: ") + e.what());
    }
    return r;
}

void apply_validity(std::vector<SweepRecord>& records, Direction direction) {
    if (records.empty()) return;
    const auto& base = records.front();
    for (std::size_t i = 1; i < records.size(); ++i) {
        auto& r = records[i];
        const bool fluent = r.gate && r.gate->pass;
        r.valid_sjt = fluent && r.sjt_score && base.sjt_score && moved(*r.sjt_score, *base.sjt_score, direction);
        r.valid_inventory = fluent && r.inventory_score && base.inventory_score &&
                            moved(*r.inventory_score, *base.inventory_score, direction);
    }
}

std::map<Instrument, std::vector<ScorePoint>> validity_filter(const std::vector<SweepRecord>& records,
                                                              Direction direction) {
    std::map<Instrument, std::vector<ScorePoint>> out{{Instrument::sjt, {}}, {Instrument::inventory, {}}};
    if (records.empty() || records.front().alpha != 0.0)
        throw ContractViolation("validity_filter needs the alpha = 0 baseline first");
    const auto& base = records.front();
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!r.gate || !r.gate->pass) continue;
        for (auto inst : {Instrument::sjt, Instrument::inventory}) {
            const auto s = r.score(inst), b = base.score(inst);
            if (s && b && moved(*s, *b, direction)) out[inst].push_back({r.alpha, *s});
        }
    }
    return out;
}

SweepResult run_sweep(const SweepConfig& config, backend::LanguageModel& model, const Instruments& in,
                      const PersistOptions& persist) {
    config.validate();
    const std::string inv_trait = config.inventory_trait.empty() ? config.trait : config.inventory_trait;
    const auto& vector = vector_for(in.store, config.trait, config.method, config.layer, config.direction);
    const auto& classifier = classifier_for(in, config.trait);
    const auto battery = battery_subset(in.battery, {config.trait});
    if (battery.items.empty()) throw ConfigError("SJT battery has no items for trait " + config.trait);
    psychometrics::Inventory inventory;
    inventory.id = in.inventory.id;
    inventory.key = in.inventory.key;
    for (const auto& item : in.inventory.items)
        if (item.trait == inv_trait) inventory.items.push_back(item);
    if (inventory.items.empty()) throw ConfigError("inventory has no items for trait " + inv_trait);

    const Checkpoint checkpoint(persist, {{"kind", "sweep"}, {"format", "psteer-sweep/1"}, {"config", config.to_json()}});

    SweepResult result;
    for (const auto& j : checkpoint.existing()) result.records.push_back(SweepRecord::from_json(j));
    result.resumed_records = result.records.size();

    auto measure = [&](double alpha) {
        const auto schedule = alpha == 0.0 ? backend::Schedule{} : schedule_for(vector, config.layer, config.stride, alpha);
        SweepRecord r;
        r.alpha = alpha;
        r.sjt = administer_or_checkpoint(model, battery, in.fluency, schedule, config.sjt, alpha);
        try {
            r.inventory = psychometrics::administer_inventory(model, inventory, std::nullopt, schedule);
        } catch (const TransportError& e) {
            throw CheckpointError("alpha " + format_number(alpha) + ": " + e.what());
        }
        r.fluency = stats_of(r.sjt.fluency_scores());
        r.sjt_score = psychometrics::mean_likert(classifier, texts_of(r.sjt, config.trait), in.embedder);
        r.inventory_score = r.inventory.trait_mean(inv_trait);
        return r;
    };

    if (result.records.empty()) {
        result.records.push_back(measure(0.0));
        checkpoint.append(result.records.back().to_json());
    } else if (result.records.front().alpha != 0.0) {
        throw CheckpointError("sweep file does not start with the alpha = 0 baseline");
    }
    const SweepRecord base = result.records.front();
    const auto baseline = psychometrics::FluencyBaseline::from_scores(config.sjt_ref, base.sjt.fluency_scores());

    std::vector<std::string> history;
    std::size_t index = 1;
    for (long alpha = config.alpha_start; alpha <= config.alpha_cap; alpha += config.alpha_step, ++index) {
        SweepRecord r;
        if (index < result.records.size()) {
            r = result.records[index];
            if (r.alpha != static_cast<double>(alpha))
                throw CheckpointError("sweep file has alpha " + format_number(r.alpha) + " where " +
                                      std::to_string(alpha) + " was expected");
        } else {
            r = measure(static_cast<double>(alpha));
            const auto scores = r.sjt.fluency_scores();
            r.gate = psychometrics::fluency_gate(scores, baseline, history, r.signature(), config.gate);
            const bool fluent = r.gate->pass;
            r.valid_sjt = fluent && moved(*r.sjt_score, *base.sjt_score, config.direction);
            r.valid_inventory = fluent && r.inventory_score && base.inventory_score &&
                                moved(*r.inventory_score, *base.inventory_score, config.direction);
            r.stop = !fluent;
            checkpoint.append(r.to_json());
            result.records.push_back(r);
        }
        history.push_back(r.signature());
        if (r.stop) {
            result.status = SweepStatus::stopped;
            result.stop_rule = r.gate ? r.gate->rule : GateRule::none;
            if (index + 1 < result.records.size()) result.records.resize(index + 1);
            return result;
        }
    }
    if (index < result.records.size()) throw CheckpointError("sweep file continues past alpha_cap");
    result.status = SweepStatus::capped;
    return result;
}

std::pair<SweepConfig, std::vector<SweepRecord>> load_sweep(const std::filesystem::path& path) {
    auto [manifest, lines] = read_checkpoint(path, "sweep");
    std::pair<SweepConfig, std::vector<SweepRecord>> out{SweepConfig::from_json(manifest.at("config")), {}};
    for (const auto& j : lines) out.second.push_back(SweepRecord::from_json(j));
    return out;
}

std::vector<double> replay_grid(double alpha_star, int n) {
    if (n < 2) throw ContractViolation("replay_grid needs at least 2 points");
    if (!std::isfinite(alpha_star)) throw ContractViolation("replay_grid: alpha_star is not finite");
    if (alpha_star == 0.0) return {0.0};
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = alpha_star * i / (n - 1);
    grid.back() = alpha_star;
    return grid;
}

void ReplayConfig::validate() const {
    if (trait.empty()) throw ConfigError("replay: trait is empty");
    if (stride < 1) throw ConfigError("replay: stride must be >= 1");
    if (points < 2) throw ConfigError("replay: points must be >= 2");
    if (!(alpha_star >= 0)) throw ConfigError("replay: alpha_star must be >= 0");
    if (std::find(traits.begin(), traits.end(), trait) == traits.end())
        throw ConfigError("replay: measured traits must include " + trait);
}

std::string ReplayConfig::file_stem() const {
    return "replay__" + safe_name(model_id) + "__" + to_string(method) + "__l" + std::to_string(layer) + "__s" +
           std::to_string(stride) + "__" + safe_name(trait) + "__" + to_string(direction);
}

json ReplayConfig::to_json() const {
    return {{"model_id", model_id},
            {"method", to_string(method)},
            {"layer", layer},
            {"stride", stride},
            {"trait", trait},
            {"direction", to_string(direction)},
            {"alpha_star", alpha_star},
            {"points", points},
            {"traits", traits},
            {"sjt_ref", sjt_ref},
            {"gate", thresholds_json(gate)},
            {"sjt", {{"max_new_tokens", sjt.max_new_tokens}, {"prefill", sjt.prefill}}}};
}

ReplayConfig ReplayConfig::from_json(const json& j) {
    ReplayConfig c;
    try {
        c.model_id = j.value("model_id", "");
        c.method = method_from_string(j.value("method", "MDS"));
        c.layer = j.at("layer").get<int>();
        c.stride = j.value("stride", 1);
        c.trait = j.at("trait").get<std::string>();
        c.direction = direction_from_string(j.at("direction").get<std::string>());
        c.alpha_star = j.at("alpha_star").get<double>();
        c.points = j.value("points", 10);
        if (j.contains("traits")) c.traits = j["traits"].get<std::vector<std::string>>();
        c.sjt_ref = j.value("sjt_ref", "");
        c.gate = thresholds_from(j.value("gate", json()));
        if (j.contains("sjt")) {
            c.sjt.max_new_tokens = j["sjt"].value("max_new_tokens", c.sjt.max_new_tokens);
            c.sjt.prefill = j["sjt"].value("prefill", c.sjt.prefill);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("replay config: ") + e.what());
    }
    c.validate();
    return c;
}

json ReplayRecord::to_json() const {
    return {{"alpha", alpha},
            {"scores", scores},
            {"fluency", fluency_json(fluency)},
            {"gate", gate_json(gate)},
            {"sjt_responses", sjt_json(sjt)}};
}

ReplayRecord ReplayRecord::from_json(const json& j) {
    ReplayRecord r;
    try {
        r.alpha = j.at("alpha").get<double>();
        r.scores = j.at("scores").get<std::map<std::string, double>>();
        r.fluency = fluency_from(j.at("fluency"));
        r.gate = gate_from(j.at("gate"));
        r.sjt = sjt_from(j.at("sjt_responses"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("replay record: ") + e.what());
    }
    return r;
}

ReplayResult equidistant_replay(const ReplayConfig& config, backend::LanguageModel& model, const Instruments& in,
                                const PersistOptions& persist) {
    config.validate();
    const auto& vector = vector_for(in.store, config.trait, config.method, config.layer, config.direction);
    const std::set<std::string> traits(config.traits.begin(), config.traits.end());
    const auto battery = battery_subset(in.battery, traits);
    for (const auto& t : config.traits) {
        classifier_for(in, t);
        if (std::none_of(battery.items.begin(), battery.items.end(), [&](const auto& i) { return i.construct == t; }))
            throw ConfigError("SJT battery has no items for trait " + t);
    }

    const Checkpoint checkpoint(persist,
                                {{"kind", "replay"}, {"format", "psteer-replay/1"}, {"config", config.to_json()}});
    ReplayResult result;
    const auto grid = replay_grid(config.alpha_star, config.points);
    result.degenerate = grid.size() == 1;
    for (const auto& j : checkpoint.existing()) result.records.push_back(ReplayRecord::from_json(j));
    if (result.records.size() > grid.size()) throw CheckpointError("replay file has more records than grid points");
    for (std::size_t i = 0; i < result.records.size(); ++i)
        if (result.records[i].alpha != grid[i]) throw CheckpointError("replay file does not match the alpha grid");

    std::optional<psychometrics::FluencyBaseline> baseline;
    std::vector<std::string> history;
    auto signature = [](const psychometrics::SjtResult& s) { return s.concatenated(); };
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i < result.records.size()) {
            const auto& r = result.records[i];
            if (i == 0) baseline = psychometrics::FluencyBaseline::from_scores(config.sjt_ref, fluency_of(r.sjt, config.trait));
            if (i > 0) history.push_back(signature(r.sjt));
            continue;
        }
        const double alpha = grid[i];
        ReplayRecord r;
        r.alpha = alpha;
        r.sjt = administer_or_checkpoint(model, battery, in.fluency,
                                         schedule_for(vector, config.layer, config.stride, alpha), config.sjt, alpha);
        for (const auto& t : config.traits)
            r.scores[t] = psychometrics::mean_likert(classifier_for(in, t), texts_of(r.sjt, t), in.embedder);
        const auto target = fluency_of(r.sjt, config.trait);
        r.fluency = stats_of(target);
        if (i == 0) {
            baseline = psychometrics::FluencyBaseline::from_scores(config.sjt_ref, target);
            r.gate = psychometrics::fluency_gate(target, *baseline, {}, signature(r.sjt), config.gate);
        } else {
            r.gate = psychometrics::fluency_gate(target, *baseline, history, signature(r.sjt), config.gate);
            history.push_back(signature(r.sjt));
        }
        checkpoint.append(r.to_json());
        result.records.push_back(std::move(r));
    }
    return result;
}

std::pair<ReplayConfig, std::vector<ReplayRecord>> load_replay(const std::filesystem::path& path) {
    auto [manifest, lines] = read_checkpoint(path, "replay");
    std::pair<ReplayConfig, std::vector<ReplayRecord>> out{ReplayConfig::from_json(manifest.at("config")), {}};
    for (const auto& j : lines) out.second.push_back(ReplayRecord::from_json(j));
    return out;
}

}  // namespace psteer::sweep
