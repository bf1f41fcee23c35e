#include "psteer/workbench/cli.hpp"

#include "psteer/analysis/report.hpp"
#include "psteer/corpus/prompts.hpp"
#include "psteer/io.hpp"
#include "psteer/vectors/mean_difference.hpp"
#include "psteer/vectors/probe.hpp"
#include "psteer/workbench/run.hpp"
#include "psteer/workbench/server.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <csignal>
#include <ostream>
#include <thread>

namespace psteer::workbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Config {
public:
    explicit Config(const fs::path& path) : base_(fs::absolute(path).parent_path()) {
        if (!fs::is_regular_file(path)) throw ConfigError("config " + path.string() + " not found");
        try {
            json_ = json::parse(io::read_text(path));
        } catch (const json::parse_error& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        if (!json_.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
    }

    const json& raw() const { return json_; }
    bool has(const std::string& key) const { return json_.contains(key); }

    const json& at(const std::string& key) const {
        if (!json_.contains(key)) throw ConfigError("config needs '" + key + "'");
        return json_.at(key);
    }
    template <typename T>
    T get(const std::string& key) const {
        try {
            return at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config '" + key + "': " + e.what());
        }
    }
    template <typename T>
    T get(const std::string& key, T fallback) const {
        return has(key) ? get<T>(key) : fallback;
    }
    json object(const std::string& key) const {
        if (!has(key)) return json::object();
        if (!at(key).is_object()) throw ConfigError("config '" + key + "' must be an object");
        return at(key);
    }

    fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : (base_ / p).lexically_normal(); }
    fs::path path(const std::string& key) const { return resolve(get<std::string>(key)); }

    /// Mock scenario paths resolve like any other path; other URIs pass through.
    std::string model_uri(const std::string& uri) const {
        if (uri.starts_with("mock:")) return "mock:" + resolve(uri.substr(5)).string();
        if (uri.find(':') == std::string::npos && uri.ends_with(".json")) return resolve(uri).string();
        return uri;
    }
    std::string model() const { return model_uri(get<std::string>("model")); }
    std::optional<fs::path> model_file() const {
        const auto uri = model();
        if (uri.starts_with("mock:")) return fs::path(uri.substr(5));
        if (uri.find(':') == std::string::npos) return fs::path(uri);
        return std::nullopt;
    }

    json client(const std::string& key) const {
        json c = at(key);
        if (!c.is_object()) throw ConfigError("config '" + key + "' must be a client object");
        if (c.contains("model")) c["model"] = model_uri(c["model"].get<std::string>());
        if (c.contains("log")) c["log"] = resolve(c["log"].get<std::string>()).string();
        return c;
    }

    fs::path runs_root() const { return has("runs_root") ? path("runs_root") : fs::current_path() / "runs"; }

private:
    fs::path base_;
    json json_;
};

struct Invocation {
    bool resume = false;
    bool dry_run = false;
    std::ostream& out;
    std::ostream& err;
};

struct Command {
    std::string name;
    std::string help;
    std::vector<std::string> input_keys;
    std::function<RunStatus(const Config&, Run&, const Invocation&)> run;
    std::function<void(const Config&, const Invocation&, const fs::path& run_dir)> plan;
};

std::map<std::string, fs::path> inputs_of(const Config& c, const std::vector<std::string>& keys) {
    std::map<std::string, fs::path> out;
    for (const auto& key : keys) {
        if (!c.has(key)) continue;
        if (key == "model") {
            if (auto f = c.model_file()) out[key] = *f;
        } else if (c.at(key).is_string()) {
            out[key] = c.path(key);
        } else if (c.at(key).is_array()) {
            std::size_t i = 0;
            for (const auto& p : c.at(key))
                if (p.is_string()) out[key + "[" + std::to_string(i++) + "]"] = c.resolve(p.get<std::string>());
        } else if (c.at(key).is_object()) {
            for (const auto& [k, p] : c.at(key).items())
                if (p.is_string()) out[key + "." + k] = c.resolve(p.get<std::string>());
        }
    }
    return out;
}

// Loaders shared by several commands.

psychometrics::Inventory load_inventory(const Config& c) {
    const auto p = c.path("inventory");
    auto inv = p.extension() == ".csv" ? psychometrics::Inventory::import_mpi_csv(p, p.stem().string())
                                       : psychometrics::Inventory::load_jsonl(p);
    if (c.has("likert_key")) inv.key = psychometrics::LikertKey::from_json(c.at("likert_key"));
    return inv;
}

vectors::VectorStore load_vectors(const Config& c) {
    return c.has("vectors") ? vectors::VectorStore::load(c.path("vectors")) : vectors::VectorStore{};
}

std::map<std::string, psychometrics::ConstructClassifier> load_classifiers(const Config& c) {
    std::map<std::string, psychometrics::ConstructClassifier> out;
    auto add = [&](const fs::path& p) {
        auto clf = psychometrics::ConstructClassifier::from_json(io::read_json(p));
        out[clf.construct] = std::move(clf);
    };
    const auto& spec = c.at("classifiers");
    if (spec.is_string()) {
        const auto dir = c.path("classifiers");
        if (!fs::is_directory(dir)) throw ConfigError("classifiers: " + dir.string() + " is not a directory");
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) add(f);
    } else if (spec.is_object()) {
        for (const auto& [trait, p] : spec.items()) add(c.resolve(p.get<std::string>()));
    } else {
        throw ConfigError("classifiers must be a directory or a trait -> file map");
    }
    return out;
}

std::vector<std::string> ocean_list() { return {kOceanTraits.begin(), kOceanTraits.end()}; }

std::vector<std::string> string_list(const Config& c, const std::string& key, std::vector<std::string> fallback) {
    return c.has(key) ? c.get<std::vector<std::string>>(key) : fallback;
}

std::vector<Direction> directions_of(const Config& c) {
    std::vector<Direction> out;
    for (const auto& d : string_list(c, "directions", {"up", "down"})) out.push_back(direction_from_string(d));
    return out;
}

psychometrics::SjtOptions sjt_options(const json& j) {
    psychometrics::SjtOptions o;
    o.max_new_tokens = j.value("max_new_tokens", o.max_new_tokens);
    o.prefill = j.value("prefill", o.prefill);
    return o;
}

corpus::SjtBattery battery_for(const corpus::SjtBattery& battery, const std::string& trait) {
    corpus::SjtBattery out = battery;
    out.items.clear();
    for (const auto& i : battery.items)
        if (i.construct == trait) out.items.push_back(i);
    return out;
}

// synth-statements

RunStatus synth_statements(const Config& c, Run& run, const Invocation& inv) {
    const auto spec = c.at("construct").is_string() ? corpus::builtin_construct(c.get<std::string>("construct"))
                                                    : corpus::construct_from_json(c.at("construct"));
    auto generator = clients::make_generator(c.client("generator"));
    auto fluency = clients::make_fluency(c.client("fluency"));
    auto embedder = clients::make_embedder(c.client("embedder"));

    corpus::StatementSynthesisOptions o;
    const json oj = c.object("options");
    o.target = oj.value("target", o.target);
    o.budget = oj.value("budget", o.budget);
    o.batch = oj.value("batch", o.batch);
    o.fluency_threshold = oj.value("fluency_threshold", o.fluency_threshold);
    o.dedup_threshold = oj.value("dedup_threshold", o.dedup_threshold);
    o.max_new_tokens = oj.value("max_new_tokens", o.max_new_tokens);
    o.temperature = oj.value("temperature", o.temperature);
    o.top_p = oj.value("top_p", o.top_p);
    o.prefill = oj.value("prefill", o.prefill);

    std::optional<extraction::StatementCorpus> reference;
    if (c.has("reference")) reference = extraction::StatementCorpus::load_jsonl(c.path("reference"));

    extraction::StatementCorpus corpus;
    corpus.construct = spec.id;
    json summary = {{"construct", spec.id}};
    bool partial = false;
    for (auto d : kBothDirections) {
        auto s = corpus::synthesize_statements(*generator, *fluency, *embedder, spec, d, o);
        json entry = {{"raw", s.counts.raw},         {"well_formed", s.counts.well_formed},
                      {"fluent", s.counts.fluent},   {"deduped", s.counts.deduped},
                      {"retained", s.counts.retained}, {"partial", s.partial}};
        if (!s.warning.empty()) entry["warning"] = s.warning;
        if (reference && !(*reference)[d].empty() && !s.texts.empty())
            entry["reference_alignment"] =
                corpus::centroid_alignment(s.embeddings, embedder->embed((*reference)[d]));
        summary[psteer::to_string(d)] = entry;
        inv.out << spec.id << " " << psteer::to_string(d) << ": " << s.texts.size() << " statements from "
                << s.counts.raw << " generations" << (s.partial ? " (partial)" : "") << "\n";
        partial = partial || s.partial;
        (d == Direction::up ? corpus.up : corpus.down) = std::move(s.texts);
    }
    corpus.save_jsonl(run.artifact("statements.jsonl"));
    io::write_json(run.artifact("synthesis.json"), summary);
    return partial ? RunStatus::partial : RunStatus::complete;
}

// synth-sjts

RunStatus synth_sjts(const Config& c, Run& run, const Invocation& inv) {
    const auto inventory = load_inventory(c);
    auto judge = clients::make_chat(c.client("judge"));
    auto generator = clients::make_generator(c.client("generator"));
    auto fluency = clients::make_fluency(c.client("fluency"));
    auto embedder = clients::make_embedder(c.client("embedder"));

    std::vector<corpus::HeadRecord> records;
    for (const auto& line : io::read_jsonl(c.path("heads"))) {
        try {
            records.push_back({line.at("head").get<std::string>(), line.value("p_valid", 1.0)});
        } catch (const json::exception& e) {
            throw ConfigError(std::string("heads: ") + e.what());
        }
    }

    corpus::HeadPipelineOptions ho;
    const json hj = c.object("head_options");
    ho.p_valid_min = hj.value("p_valid_min", ho.p_valid_min);
    ho.judge_min = hj.value("judge_min", ho.judge_min);
    ho.judge_temperature = hj.value("judge_temperature", ho.judge_temperature);
    ho.judge_max_new_tokens = hj.value("judge_max_new_tokens", ho.judge_max_new_tokens);
    ho.dedup_threshold = hj.value("dedup_threshold", ho.dedup_threshold);
    if (hj.contains("names")) ho.names = hj["names"].get<std::map<std::string, std::string>>();
    const auto heads = corpus::preprocess_heads(records, *judge, *embedder, ho);
    {
        std::string text;
        for (const auto& h : heads.heads) text += json{{"head", h}}.dump() + "\n";
        io::write_text(run.artifact("heads.jsonl"), text);
    }
    inv.out << "heads: " << heads.input << " in, " << heads.valid << " valid, " << heads.judged << " judged, "
            << heads.heads.size() << " kept\n";

    const auto traits = string_list(c, "traits", inventory.traits());
    std::vector<corpus::SjtSeed> seeds;
    for (const auto& item : inventory.items)
        if (std::find(traits.begin(), traits.end(), item.trait) != traits.end())
            seeds.push_back({item.item_id, item.text, item.trait});

    corpus::SjtSynthesisOptions so;
    const json sj = c.object("options");
    so.heads_per_item = sj.value("heads_per_item", so.heads_per_item);
    so.temperature = sj.value("temperature", so.temperature);
    so.top_p = sj.value("top_p", so.top_p);
    so.max_new_tokens = sj.value("max_new_tokens", so.max_new_tokens);
    so.fluency_threshold = sj.value("fluency_threshold", so.fluency_threshold);
    so.conflicts.threshold = sj.value("conflict_threshold", so.conflicts.threshold);
    so.conflicts.enumeration_bound = sj.value("enumeration_bound", so.conflicts.enumeration_bound);
    so.conflicts.approximate = sj.value("approximate", so.conflicts.approximate);

    const auto result = corpus::synthesize_sjts(seeds, heads.heads, heads.embeddings, *generator, *fluency, *embedder,
                                                inventory.id, so);
    result.battery.save_jsonl(run.artifact("battery.jsonl"));
    json pruning = json::object();
    for (const auto& [item, p] : result.per_item)
        pruning[item] = {{"construct", p.construct},
                         {"candidates", p.candidates.size()},
                         {"independent_set", p.pruned.independent_set.size()},
                         {"k_min", p.pruned.k_min},
                         {"maximal_sets", p.pruned.maximal_sets},
                         {"approximate", p.pruned.approximate}};
    io::write_json(run.artifact("pruning.json"), {{"k", result.battery.k}, {"items", pruning}});
    inv.out << "battery: " << result.battery.items.size() << " SJTs, k = " << result.battery.k << "\n";
    return RunStatus::complete;
}

// extract

RunStatus extract(const Config& c, Run& run, const Invocation& inv) {
    auto model = backend::open_model(c.model());
    const auto corpus = extraction::StatementCorpus::load_jsonl(c.path("corpus"), c.get<std::string>("construct", ""));
    if (corpus.construct.empty()) throw ConfigError("corpus names no construct; set 'construct'");
    corpus.validate();
    const auto policy = extraction::prefill_policy_from_string(c.get<std::string>("prefill_policy", "yes_always"));

    json summary = {{"construct", corpus.construct},
                    {"model_id", model->handle().model_id},
                    {"corpus_hash", corpus.hash()},
                    {"n_up", corpus.up.size()},
                    {"n_down", corpus.down.size()},
                    {"prefill_policy", extraction::to_string(policy)},
                    {"sets", json::array()}};
    const fs::path dir = run.artifact("activations");
    for (const auto& m : string_list(c, "modes", {"s", "b"})) {
        const auto mode = mode_from_string(m);
        const auto set = extraction::extract_activation_set(*model, corpus, mode, policy);
        const std::string stem = corpus.construct + "__" + psteer::to_string(mode);
        set.save(dir, stem);
        summary["sets"].push_back(stem);
        inv.out << stem << ": " << set.layer_count() << " layers x " << set.hidden_dim() << "\n";
    }
    io::write_json(run.artifact("extraction.json"), summary);
    return RunStatus::complete;
}

// derive

json report_json(const vectors::ProbeReport& r, const std::string& construct) {
    json j = {{"construct", construct},
              {"method", psteer::to_string(r.method)},
              {"layer", r.layer},
              {"train_accuracy", r.train_accuracy},
              {"iterations", r.iterations_used},
              {"converged", r.converged},
              {"C", r.C},
              {"solver", r.solver}};
    if (r.test_accuracy) j["test_accuracy"] = *r.test_accuracy;
    if (r.seed) j["seed"] = *r.seed;
    return j;
}

RunStatus derive(const Config& c, Run& run, const Invocation& inv) {
    const fs::path dir = c.path("activations");
    std::vector<std::string> constructs = string_list(c, "constructs", {});
    if (constructs.empty()) {
        std::set<std::string> found;
        for (const auto& e : fs::directory_iterator(dir)) {
            const auto stem = e.path().stem().string();
            if (e.path().extension() == ".json" && stem.find("__") != std::string::npos)
                found.insert(stem.substr(0, stem.rfind("__")));
        }
        constructs.assign(found.begin(), found.end());
    }
    if (constructs.empty()) throw ConfigError("no activation sets under " + dir.string());

    std::set<Method> methods;
    for (const auto& m : string_list(c, "methods", {"L1LI", "L1ZI", "L2LI", "L2ZI", "MDB", "MDS"}))
        methods.insert(method_from_string(m));
    const auto layer_filter = c.has("layers") ? std::optional(c.get<std::set<int>>("layers")) : std::nullopt;

    vectors::ProbeOptions po;
    const json pj = c.object("probe");
    po.C = pj.value("C", po.C);
    po.max_iterations = pj.value("max_iterations", po.max_iterations);
    po.tolerance = pj.value("tolerance", po.tolerance);

    vectors::VectorStore store;
    json reports = json::array(), skipped = json::array(), separability = json::array();
    auto load = [&](const std::string& construct, ExtractionMode mode) -> std::optional<extraction::ActivationSet> {
        const std::string stem = construct + "__" + psteer::to_string(mode);
        if (!fs::exists(dir / (stem + ".json"))) return std::nullopt;
        return extraction::ActivationSet::load(dir, stem);
    };
    auto keep = [&](int layer) { return !layer_filter || layer_filter->count(layer); };

    for (const auto& construct : constructs) {
        const auto s = load(construct, ExtractionMode::s);
        const auto b = load(construct, ExtractionMode::b);
        if (methods.count(Method::MDS) && !s) throw ConfigError("MDS needs " + construct + "__s activations");
        if ((methods.size() > methods.count(Method::MDS)) && !b)
            throw ConfigError("MDB and probe vectors need " + construct + "__b activations");

        auto attempt = [&](Method m, int layer, auto&& make) {
            try {
                make();
            } catch (const DegenerateDirectionError& e) {
                skipped.push_back({{"construct", construct}, {"method", psteer::to_string(m)}, {"layer", layer},
                                   {"reason", e.what()}});
            }
        };
        if (s && methods.count(Method::MDS))
            for (int l = 0; l < s->layer_count(); ++l)
                if (keep(l))
                    attempt(Method::MDS, l, [&] {
                        store.put(vectors::derive_md(s->at(l, Direction::up), s->at(l, Direction::down), ExtractionMode::s,
                                                     {construct, l, s->corpus_hash}));
                    });
        if (!b) continue;
        for (int l = 0; l < b->layer_count(); ++l) {
            if (!keep(l)) continue;
            const vectors::VectorMeta meta{construct, l, b->corpus_hash};
            const auto& up = b->at(l, Direction::up);
            const auto& down = b->at(l, Direction::down);
            if (methods.count(Method::MDB))
                attempt(Method::MDB, l, [&] { store.put(vectors::derive_md(up, down, ExtractionMode::b, meta)); });
            for (auto reg : {Regularization::L1, Regularization::L2})
                for (auto icpt : {Intercept::LI, Intercept::ZI}) {
                    const Method m = probe_method(reg, icpt);
                    if (!methods.count(m)) continue;
                    attempt(m, l, [&] {
                        auto [pair, report] = vectors::derive_probe(up, down, reg, icpt, meta, po);
                        store.put(pair);
                        reports.push_back(report_json(report, construct));
                    });
                }
            if (c.has("separability")) {
                const json sj = c.object("separability");
                try {
                    for (const auto& r : vectors::separability_report(up, down, sj.value("train_fraction", 0.8),
                                                                      sj.value("seed", std::uint64_t{0}), l, po))
                        separability.push_back(report_json(r, construct));
                } catch (const InsufficientDataError& e) {
                    skipped.push_back({{"construct", construct}, {"layer", l}, {"reason", e.what()}});
                }
            }
        }
    }
    store.save(run.artifact("vectors"));
    json summary = {{"vectors", store.size()}, {"probes", reports}, {"skipped", skipped}};
    if (c.has("separability")) summary["separability"] = separability;

    if (c.has("classifiers")) {
        const json cj = c.object("classifiers");
        if (!cj.contains("embedder") || !cj.contains("corpora")) throw ConfigError("classifiers needs embedder and corpora");
        auto embedder = clients::make_embedder(cj["embedder"]);
        psychometrics::ClassifierOptions co;
        co.C = cj.value("C", co.C);
        co.max_iterations = cj.value("max_iterations", co.max_iterations);
        co.tolerance = cj.value("tolerance", co.tolerance);
        json holdouts = json::object();
        for (const auto& [trait, p] : cj["corpora"].items()) {
            const auto corpus = extraction::StatementCorpus::load_jsonl(c.resolve(p.get<std::string>()), trait);
            auto clf = psychometrics::train_construct_classifier(corpus, *embedder, co);
            io::write_json(run.artifact("classifiers/" + trait + ".json"), clf.to_json());
            const auto h = psychometrics::classifier_holdout(corpus, *embedder, cj.value("train_fraction", 0.8),
                                                             cj.value("seed", std::uint64_t{0}), co);
            holdouts[trait] = {{"train_accuracy", h.train_accuracy}, {"test_accuracy", h.test_accuracy},
                               {"f1_macro", h.f1_macro}, {"seed", h.seed}};
            inv.out << "classifier " << trait << ": held-out accuracy " << h.test_accuracy << "\n";
        }
        summary["classifiers"] = holdouts;
    }
    io::write_json(run.artifact("derive.json"), summary);
    inv.out << store.size() << " vectors, " << skipped.size() << " skipped\n";
    return RunStatus::complete;
}

// sweep

std::vector<sweep::SweepConfig> sweep_plan(const Config& c, const std::string& model_id, const std::string& inventory_ref,
                                           const std::string& sjt_ref) {
    std::vector<json> raw;
    if (c.has("sweeps")) {
        for (const auto& s : c.at("sweeps")) raw.push_back(s);
    } else {
        const json grid = c.object("grid");
        if (grid.empty()) throw ConfigError("sweep config needs 'sweeps' or 'grid'");
        auto list = [&](const char* key, json fallback) { return grid.value(key, fallback); };
        json base = grid;
        for (const char* k : {"methods", "layers", "strides", "traits", "directions"}) base.erase(k);
        for (const auto& m : list("methods", {"MDS"}))
            for (const auto& l : list("layers", json::array()))
                for (const auto& s : list("strides", {1}))
                    for (const auto& t : list("traits", json(ocean_list())))
                        for (const auto& d : list("directions", {"up", "down"})) {
                            json j = base;
                            j["method"] = m;
                            j["layer"] = l;
                            j["stride"] = s;
                            j["trait"] = t;
                            j["direction"] = d;
                            raw.push_back(j);
                        }
    }
    std::vector<sweep::SweepConfig> out;
    std::set<std::string> stems;
    for (auto j : raw) {
        if (!j.contains("model_id")) j["model_id"] = model_id;
        auto cfg = sweep::SweepConfig::from_json(j);
        if (cfg.inventory_ref.empty()) cfg.inventory_ref = inventory_ref;
        if (cfg.sjt_ref.empty()) cfg.sjt_ref = sjt_ref;
        if (!stems.insert(cfg.file_stem()).second) throw ConfigError("duplicate sweep " + cfg.file_stem());
        out.push_back(std::move(cfg));
    }
    if (out.empty()) throw ConfigError("sweep plan is empty");
    return out;
}

struct Instruments {
    vectors::VectorStore store;
    psychometrics::Inventory inventory;
    corpus::SjtBattery battery;
    std::map<std::string, psychometrics::ConstructClassifier> classifiers;
    std::string sjt_ref;
};

Instruments load_instruments(const Config& c, bool need_classifiers = true) {
    Instruments in;
    in.store = vectors::VectorStore::load(c.path("vectors"));
    in.inventory = load_inventory(c);
    in.battery = corpus::SjtBattery::load_jsonl(c.path("battery"));
    in.sjt_ref = c.path("battery").stem().string();
    if (need_classifiers || c.has("classifiers")) in.classifiers = load_classifiers(c);
    return in;
}

struct SweepOutcome {
    std::string status;
    std::string stop_rule;
    std::size_t records = 0;
    std::size_t resumed = 0;
    std::string error;
    bool config_error = false;
};

RunStatus run_sweeps(const Config& c, Run& run, const Invocation& inv) {
    const auto in = load_instruments(c);
    std::vector<std::unique_ptr<backend::LanguageModel>> models;
    models.push_back(backend::open_model(c.model()));
    const auto plan = sweep_plan(c, models[0]->handle().model_id, in.inventory.id, in.sjt_ref);
    const int workers = std::clamp(c.get<int>("workers", 1), 1, static_cast<int>(plan.size()));

    // One model and one pair of clients per worker; the instruments are shared read-only.
    std::vector<std::unique_ptr<clients::Embedder>> embedders;
    std::vector<std::unique_ptr<clients::FluencyScorer>> fluencies;
    for (int w = 0; w < workers; ++w) {
        if (w > 0) models.push_back(backend::open_model(c.model()));
        embedders.push_back(clients::make_embedder(c.client("embedder")));
        fluencies.push_back(clients::make_fluency(c.client("fluency")));
    }

    const fs::path dir = run.artifact("sweeps");
    fs::create_directories(dir);
    std::vector<SweepOutcome> outcomes(plan.size());
    std::atomic<std::size_t> next{0};
    std::mutex out_mutex;
    auto work = [&](int w) {
        const sweep::Instruments instruments{in.store,      in.inventory,  in.battery,
                                             in.classifiers, *embedders[w], *fluencies[w]};
        for (std::size_t i; (i = next++) < plan.size();) {
            const auto& cfg = plan[i];
            auto& o = outcomes[i];
            try {
                const auto r = sweep::run_sweep(cfg, *models[w], instruments,
                                                {dir / (cfg.file_stem() + ".jsonl"), inv.resume});
                o.status = r.status == sweep::SweepStatus::capped ? "capped" : "stopped";
                o.stop_rule = psychometrics::to_string(r.stop_rule);
                o.records = r.records.size();
                o.resumed = r.resumed_records;
            } catch (const ConfigError& e) {
                o.status = "failed";
                o.error = e.what();
                o.config_error = true;
            } catch (const Error& e) {
                o.status = "failed";
                o.error = e.what();
            }
            std::lock_guard lock(out_mutex);
            inv.out << cfg.file_stem() << ": " << o.status;
            if (o.error.empty())
                inv.out << " (" << o.stop_rule << ") after " << o.records << " records"
                        << (o.resumed ? ", " + std::to_string(o.resumed) + " resumed" : "");
            else
                inv.out << ": " << o.error;
            inv.out << "\n";
        }
    };
    std::vector<std::thread> threads;
    for (int w = 1; w < workers; ++w) threads.emplace_back(work, w);
    work(0);
    for (auto& t : threads) t.join();

    json summary = json::array();
    bool failed = false;
    const SweepOutcome* config_error = nullptr;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& o = outcomes[i];
        json j = {{"file", "sweeps/" + plan[i].file_stem() + ".jsonl"},
                  {"status", o.status},
                  {"records", o.records},
                  {"resumed_records", o.resumed}};
        if (!o.stop_rule.empty()) j["stop_rule"] = o.stop_rule;
        if (!o.error.empty()) j["error"] = o.error;
        summary.push_back(j);
        failed = failed || o.status == "failed";
        if (o.config_error && !config_error) config_error = &o;
    }
    io::write_json(run.artifact("sweeps.json"), summary);
    if (config_error) throw ConfigError(config_error->error);
    return failed ? RunStatus::partial : RunStatus::complete;
}

void plan_sweeps(const Config& c, const Invocation& inv, const fs::path& run_dir) {
    const auto in = load_instruments(c);
    const auto model = backend::open_model(c.model());
    for (const auto& cfg : sweep_plan(c, model->handle().model_id, in.inventory.id, in.sjt_ref)) {
        const auto file = run_dir / "sweeps" / (cfg.file_stem() + ".jsonl");
        inv.out << "  " << cfg.file_stem() << ": ";
        if (!fs::exists(file)) {
            inv.out << "new\n";
            continue;
        }
        const auto records = sweep::load_sweep(file).second;
        inv.out << records.size() << " records on disk"
                << (inv.resume ? ", resumes" : ", needs --resume") << "\n";
    }
}

// replay

const analysis::ScoreSurface& surface_for(const std::vector<analysis::ScoreSurface>& surfaces, Method method,
                                          const std::string& model_id) {
    for (const auto& s : surfaces)
        if (s.method() == method && s.instrument() == sweep::Instrument::sjt) return s;
    throw ConfigError("no " + psteer::to_string(method) + " sweeps for " + model_id);
}

std::vector<std::pair<sweep::SweepConfig, std::vector<sweep::SweepRecord>>> sweeps_for(const Config& c,
                                                                                      const std::string& model_id) {
    auto loaded = analysis::load_run(c.path("sweeps"));
    auto it = loaded.models.find(model_id);
    if (it == loaded.models.end() || it->second.sweeps.empty())
        throw ConfigError("no sweeps for model " + model_id + " under " + c.path("sweeps").string());
    return std::move(it->second.sweeps);
}

RunStatus replay(const Config& c, Run& run, const Invocation& inv) {
    const auto in = load_instruments(c);
    auto model = backend::open_model(c.model());
    const std::string model_id = model->handle().model_id;
    const Method method = method_from_string(c.get<std::string>("method", "MDS"));
    const int stride = c.get<int>("stride", 1);
    const auto sweeps = sweeps_for(c, model_id);
    const auto surfaces = analysis::ScoreSurface::from_sweeps(sweeps);
    const auto& surface = surface_for(surfaces, method, model_id);
    std::string sjt_ref = in.sjt_ref;
    for (const auto& [cfg, records] : sweeps)
        if (cfg.method == method && !cfg.sjt_ref.empty()) sjt_ref = cfg.sjt_ref;

    auto embedder = clients::make_embedder(c.client("embedder"));
    auto fluency = clients::make_fluency(c.client("fluency"));
    const sweep::Instruments instruments{in.store, in.inventory, in.battery, in.classifiers, *embedder, *fluency};

    const fs::path dir = run.artifact("replays");
    fs::create_directories(dir);
    json summary = json::array();
    bool failed = false;
    for (const auto& t : string_list(c, "targets", ocean_list())) {
        for (auto d : directions_of(c)) {
            const auto best = analysis::phi(surface, stride, t, d);
            if (!best) {
                summary.push_back({{"trait", t}, {"direction", psteer::to_string(d)}, {"status", "no valid sweep step"}});
                inv.out << t << " " << psteer::to_string(d) << ": no valid sweep step, skipped\n";
                continue;
            }
            sweep::ReplayConfig rc;
            rc.model_id = model_id;
            rc.method = method;
            rc.layer = best->layer;
            rc.stride = stride;
            rc.trait = t;
            rc.direction = d;
            rc.alpha_star = best->alpha;
            rc.points = c.get<int>("points", 10);
            rc.traits = string_list(c, "traits", ocean_list());
            rc.sjt_ref = sjt_ref;
            rc.sjt = sjt_options(c.object("sjt"));
            json j = {{"trait", t}, {"direction", psteer::to_string(d)}, {"layer", rc.layer}, {"alpha_star", rc.alpha_star},
                      {"file", "replays/" + rc.file_stem() + ".jsonl"}};
            try {
                const auto r = sweep::equidistant_replay(rc, *model, instruments, {dir / (rc.file_stem() + ".jsonl"), inv.resume});
                j["status"] = r.degenerate ? "degenerate" : "complete";
                j["records"] = r.records.size();
            } catch (const CheckpointError& e) {
                j["status"] = "failed";
                j["error"] = e.what();
                failed = true;
            }
            inv.out << t << " " << psteer::to_string(d) << ": l" << rc.layer << " alpha* " << format_number(rc.alpha_star)
                    << " " << j["status"].get<std::string>() << "\n";
            summary.push_back(j);
        }
    }
    io::write_json(run.artifact("replay.json"), summary);
    return failed ? RunStatus::partial : RunStatus::complete;
}

// analyze

RunStatus analyze(const Config& c, Run& run, const Invocation& inv) {
    analysis::ReportInputs merged;
    merged.traits = string_list(c, "traits", ocean_list());
    const auto dirs = c.get<std::vector<std::string>>("inputs");
    if (dirs.empty()) throw ConfigError("analyze needs at least one input directory");
    for (const auto& d : dirs) {
        const auto path = c.resolve(d);
        if (!fs::is_directory(path)) throw ConfigError("input " + path.string() + " is not a directory");
        for (auto& [id, m] : analysis::load_run(path).models) {
            auto& dst = merged.models[id];
            for (auto& s : m.sweeps) dst.sweeps.push_back(std::move(s));
            for (auto& r : m.replays) dst.replays.push_back(std::move(r));
            for (auto& [inst, values] : m.p2) dst.p2[inst].insert(values.begin(), values.end());
            dst.comparisons.insert(m.comparisons.begin(), m.comparisons.end());
        }
    }
    if (merged.models.empty()) throw ConfigError("no sweep, replay or comparison files under the inputs");
    const auto report = analysis::build_report(merged);
    analysis::write_report(report, run.artifact("report"));
    for (const auto& [id, m] : report["models"].items())
        inv.out << id << ": " << m["phi"].size() << " phi cells, " << m["trends"].size() << " trends\n";
    return RunStatus::complete;
}

// compare

RunStatus compare(const Config& c, Run& run, const Invocation& inv) {
    const auto in = load_instruments(c, false);
    auto model = backend::open_model(c.model());
    const std::string model_id = model->handle().model_id;
    auto judge = clients::make_chat(c.client("judge"));
    auto fluency = clients::make_fluency(c.client("fluency"));
    std::unique_ptr<clients::Embedder> embedder;
    if (!in.classifiers.empty()) embedder = clients::make_embedder(c.client("embedder"));
    const Method method = method_from_string(c.get<std::string>("method", "MDS"));
    const int stride = c.get<int>("stride", 1);
    const auto surfaces = analysis::ScoreSurface::from_sweeps(sweeps_for(c, model_id));
    const auto& surface = surface_for(surfaces, method, model_id);
    const auto options = sjt_options(c.object("sjt"));
    const auto targets = string_list(c, "targets", ocean_list());
    const int attempts = c.get<int>("judge_attempts", 2);

    std::map<std::string, analysis::MethodMeans> methods;
    std::map<sweep::Instrument, std::map<std::pair<std::string, Direction>, double>> p2;
    std::size_t unparseable = 0;
    json cells = json::array();

    for (const auto& t : targets) {
        const auto& spec = corpus::builtin_construct(t);
        const auto battery = battery_for(in.battery, t);
        if (battery.items.empty()) throw ConfigError("battery has no SJTs for " + t);
        std::map<std::string, std::string> stems;
        for (const auto& i : battery.items) stems[i.item_id] = i.stem;

        auto judged = [&](const psychometrics::SjtResult& r) -> std::optional<double> {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& resp : r.responses) {
                if (resp.missing) continue;
                try {
                    sum += psychometrics::judge_sjt(*judge, spec, stems.at(resp.item_id), resp.text, attempts);
                    ++n;
                } catch (const JudgeFormatError&) {
                    ++unparseable;
                }
            }
            return n ? std::optional(sum / static_cast<double>(n)) : std::nullopt;
        };
        auto record = [&](const std::string& name, Direction d, std::optional<double> v) {
            if (!v) return;
            auto& m = methods[name];
            (d == Direction::up ? m.up : m.down)[t] = *v;
        };

        for (auto d : directions_of(c)) {
            const std::string& persona = prompts::persona_description(t, d);
            json cell = {{"trait", t}, {"direction", psteer::to_string(d)}};

            const auto p2_sjts = psychometrics::administer_sjts(*model, battery, *fluency, persona, {}, options);
            const auto p2_judged = judged(p2_sjts);
            record("P2", d, p2_judged);
            cell["P2"] = p2_judged ? json(*p2_judged) : json(nullptr);
            if (auto clf = in.classifiers.find(t); clf != in.classifiers.end()) {
                std::vector<std::string> texts;
                for (const auto& r : p2_sjts.responses)
                    if (!r.missing) texts.push_back(r.text);
                if (!texts.empty()) p2[sweep::Instrument::sjt][{t, d}] = psychometrics::mean_likert(clf->second, texts, *embedder);
            }
            if (auto m = psychometrics::administer_inventory(*model, in.inventory, persona).trait_mean(t))
                p2[sweep::Instrument::inventory][{t, d}] = *m;

            const auto best = analysis::phi(surface, stride, t, d);
            const auto* vec = best ? in.store.find(t, method, best->layer, d) : nullptr;
            if (!vec) {
                cell["note"] = "no steering optimum";
                cells.push_back(cell);
                continue;
            }
            const backend::Schedule schedule{{{best->layer, vec->id(), best->alpha, stride, std::nullopt}, vec->components}};
            const auto steered = judged(psychometrics::administer_sjts(*model, battery, *fluency, std::nullopt, schedule, options));
            const auto hybrid = judged(psychometrics::administer_sjts(*model, battery, *fluency, persona, schedule, options));
            record(psteer::to_string(method), d, steered);
            record("PM", d, hybrid);
            cell["layer"] = best->layer;
            cell["alpha"] = best->alpha;
            cell[psteer::to_string(method)] = steered ? json(*steered) : json(nullptr);
            cell["PM"] = hybrid ? json(*hybrid) : json(nullptr);
            cells.push_back(cell);
            inv.out << t << " " << psteer::to_string(d) << ": judged P2 / " << psteer::to_string(method) << " / PM done\n";
        }
    }

    json steer = json::object();
    for (const auto& [name, m] : methods) {
        const auto s = analysis::steerability(m.up, m.down, targets);
        steer[name] = s.value ? json(*s.value) : json(nullptr);
    }
    io::write_json(run.artifact("comparison.json"), analysis::comparison_json(model_id, methods, p2));
    io::write_json(run.artifact("compare.json"),
                   {{"model_id", model_id}, {"cells", cells}, {"steerability", steer}, {"unparseable_judgements", unparseable}});
    return unparseable ? RunStatus::partial : RunStatus::complete;
}

// steer

RunStatus steer(const Config& c, Run& run, const Invocation& inv) {
    auto model = backend::open_model(c.model());
    const auto store = load_vectors(c);
    const auto request = SessionRequest::from_json(c.raw());
    PlaygroundSession session("steer", *model, store, request);
    session.run();
    io::write_text(run.artifact("transcript.jsonl"), session.transcript());
    std::string text, error;
    for (const auto& e : session.events()) {
        if (e.type == "token") text += e.token;
        if (e.type == "error") error = e.message;
    }
    io::write_text(run.artifact("completion.txt"), text);
    if (!error.empty()) {
        if (!request.schedule.problems(store, model->handle()).empty()) throw ConfigError(error);
        throw Error(error);
    }
    inv.out << request.prompt.prefill << text << "\n";
    return RunStatus::complete;
}

// serve

std::atomic<bool> stop_requested{false};

extern "C" void request_stop(int) { stop_requested = true; }

RunStatus serve(const Config& c, Run& run, const Invocation& inv) {
    auto model = backend::open_model(c.model());
    const auto store = load_vectors(c);
    // Session ids restart with each server, so every start gets its own transcript directory.
    const fs::path transcripts = run.artifact("transcripts");
    std::size_t start = 0;
    while (fs::exists(transcripts / std::to_string(start))) ++start;
    const fs::path dir = transcripts / std::to_string(start);
    fs::create_directories(dir);

    PlaygroundServer server(*model, store, {dir});
    const std::string host = c.get<std::string>("host", "127.0.0.1");
    const int port = server.start(host, c.get<int>("port", 8080));
    inv.out << "serving " << store.size() << " vectors for " << model->handle().model_id << " on http://" << host << ":"
            << port << std::endl;
    stop_requested = false;
    const auto previous_int = std::signal(SIGINT, request_stop);
    const auto previous_term = std::signal(SIGTERM, request_stop);
    while (!stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    std::signal(SIGINT, previous_int);
    std::signal(SIGTERM, previous_term);
    server.stop();
    return RunStatus::complete;
}

const std::vector<Command>& commands() {
    static const std::vector<Command> table = {
        {"synth-statements", "synthesize a contrastive statement corpus for one construct", {"reference"},
         synth_statements, {}},
        {"synth-sjts", "preprocess heads and synthesize a pruned SJT battery", {"inventory", "heads"}, synth_sjts, {}},
        {"extract", "capture per-layer prefill activations for a statement corpus", {"model", "corpus"}, extract, {}},
        {"derive", "derive steering vectors (and optionally classifiers) from activations", {"activations"}, derive, {}},
        {"sweep", "run fluency-gated injection-strength sweeps",
         {"model", "vectors", "inventory", "battery", "classifiers"}, run_sweeps, plan_sweeps},
        {"replay", "replay each trait's best strength on an equidistant grid across all traits",
         {"model", "vectors", "inventory", "battery", "classifiers", "sweeps"}, replay, {}},
        {"compare", "judge persona prompting, steering and their hybrid at each optimum",
         {"model", "vectors", "inventory", "battery", "classifiers", "sweeps"}, compare, {}},
        {"analyze", "build the report: tables, plots and report.json", {"inputs"}, analyze, {}},
        {"steer", "one-shot generation under a segment schedule", {"model", "vectors"}, steer, {}},
        {"serve", "serve the playground HTTP API", {"model", "vectors"}, serve, {}},
    };
    return table;
}

int execute(const Command& cmd, const fs::path& config_path, const Invocation& inv) {
    const Config cfg(config_path);
    const auto inputs = inputs_of(cfg, cmd.input_keys);
    std::map<std::string, std::string> digests;
    for (const auto& [key, path] : inputs) digests[key] = digest_path(path);
    const std::string id = run_id_for(cmd.name, cfg.raw(), digests);
    const fs::path dir = cfg.runs_root() / id;

    if (inv.dry_run) {
        inv.out << cmd.name << ": run " << id << " in " << dir.string() << "\n";
        for (const auto& [key, path] : inputs) inv.out << "  input " << key << ": " << path.string() << "\n";
        if (fs::exists(dir / "manifest.json"))
            inv.out << "  existing run: " << io::read_json(dir / "manifest.json").value("status", "?") << "\n";
        if (cmd.plan) cmd.plan(cfg, inv, dir);
        return kExitOk;
    }

    const bool existed = fs::exists(dir);
    Run run(cfg.runs_root(), cmd.name, cfg.raw(), inputs);
    if (run.already_complete() && cmd.name != "serve") {
        inv.out << "run " << id << " is already complete\n";
        return kExitOk;
    }
    RunStatus status;
    try {
        status = cmd.run(cfg, run, inv);
    } catch (...) {
        std::error_code ec;
        if (!existed && fs::is_empty(dir, ec)) fs::remove(dir, ec);
        else run.finish(RunStatus::partial);
        throw;
    }
    run.finish(status);
    inv.out << "run " << id << " " << to_string(status) << ": " << dir.string() << "\n";
    return status == RunStatus::complete ? kExitOk : kExitPartial;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Psychological steering workbench", "psteer"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kCodeVersion);

    std::string config;
    bool resume = false, dry_run = false;
    for (const auto& cmd : commands()) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("config", config, "JSON config file")->required();
        sub->add_flag("--resume", resume, "continue partially written sweep and replay files");
        sub->add_flag("--dry-run", dry_run, "print the run id and plan without writing anything");
    }
    std::string runs_root = "runs";
    auto* fsck_cmd = app.add_subcommand("fsck", "check that every file under a runs root is listed by its run manifest");
    fsck_cmd->add_option("runs_root", runs_root, "runs directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (fsck_cmd->parsed()) {
            const auto problems = fsck(runs_root);
            for (const auto& p : problems) out << p << "\n";
            out << problems.size() << " problem" << (problems.size() == 1 ? "" : "s") << "\n";
            return problems.empty() ? kExitOk : kExitFailure;
        }
        for (const auto& cmd : commands())
            if (app.got_subcommand(cmd.name)) return execute(cmd, config, {resume, dry_run, out, err});
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace psteer::workbench
