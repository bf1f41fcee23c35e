#include "psteer/backend/mock.hpp"

#include <cctype>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

namespace psteer::backend {

using nlohmann::json;

std::vector<std::string> mock_tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == text.size()) break;  // trailing whitespace is not a token
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

Vector json_vector(const json& j, int d, const char* what) {
    if (!j.is_array() || static_cast<int>(j.size()) != d)
        throw ConfigError(std::string("mock scenario: ") + what + " must be an array of " + std::to_string(d) +
                          " numbers");
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = j[i].get<double>();
    return v;
}

// Accepts [d] (broadcast to every layer) or [[d] x layers].
Matrix json_layers(const json& j, int layers, int d, const char* what) {
    Matrix m(layers, d);
    if (j.is_array() && !j.empty() && j[0].is_array()) {
        if (static_cast<int>(j.size()) != layers)
            throw ConfigError(std::string("mock scenario: ") + what + " needs one row per layer");
        for (int l = 0; l < layers; ++l) m.row(l) = json_vector(j[l], d, what).transpose();
    } else {
        const Vector v = json_vector(j, d, what);
        for (int l = 0; l < layers; ++l) m.row(l) = v.transpose();
    }
    return m;
}

std::map<std::string, double> json_logits(const json& j) {
    std::map<std::string, double> m;
    for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = it.value().get<double>();
    return m;
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

}  // namespace

MockModel::MockModel(const json& sc) {
    handle_.model_id = sc.value("model_id", std::string("mock"));
    handle_.layer_count = sc.at("layer_count").get<int>();
    handle_.hidden_dim = sc.at("hidden_dim").get<int>();
    if (handle_.layer_count < 1 || handle_.hidden_dim < 1)
        throw ConfigError("mock scenario: layer_count and hidden_dim must be positive");
    handle_.capabilities.supports_live_control = true;
    if (sc.contains("capabilities")) {
        const auto& c = sc["capabilities"];
        handle_.capabilities.supports_prefill = c.value("supports_prefill", true);
        handle_.capabilities.supports_constrained_choice = c.value("supports_constrained_choice", true);
        handle_.capabilities.supports_activation_capture = c.value("supports_activation_capture", true);
        handle_.capabilities.supports_live_control = c.value("supports_live_control", true);
    }
    const int L = handle_.layer_count, d = handle_.hidden_dim;
    vocab_ = sc.value("vocab", std::vector<std::string>{});

    const json gen = sc.value("generation", json::object());
    default_script_ = gen.value("default", std::string{});
    for (const auto& s : gen.value("scripts", json::array())) {
        Script script;
        script.match = s.value("match", std::string{});
        if (s.contains("min_alpha")) script.min_alpha = s["min_alpha"].get<double>();
        if (s.contains("max_alpha")) script.max_alpha = s["max_alpha"].get<double>();
        script.text = s.at("text").get<std::string>();
        scripts_.push_back(std::move(script));
    }
    loop_ = gen.value("loop", false);
    marker_ = gen.value("injection_marker", std::string{});
    token_delay_ = std::chrono::milliseconds(gen.value("token_delay_ms", 0));
    readout_ = gen.contains("readout") ? json_layers(gen["readout"], L, d, "readout") : Matrix::Zero(L, d);
    fail_on_ = gen.value("fail_on", std::vector<std::string>{});

    const json act = sc.value("activations", json::object());
    base_activation_ = act.contains("default") ? json_layers(act["default"], L, d, "activations.default")
                                               : Matrix::Zero(L, d);
    for (const auto& e : act.value("entries", json::array())) {
        ActivationEntry entry;
        entry.match = e.value("match", std::string{});
        entry.offset = e.contains("offset") ? json_layers(e["offset"], L, d, "offset") : Matrix::Zero(L, d);
        if (e.contains("tokens")) {
            const auto& t = e["tokens"];
            if (!t.is_array() || static_cast<int>(t.size()) != L)
                throw ConfigError("mock scenario: tokens needs one [T x d] block per layer");
            for (int l = 0; l < L; ++l) {
                const auto& rows = t[l];
                Matrix m(static_cast<Eigen::Index>(rows.size()), d);
                for (std::size_t r = 0; r < rows.size(); ++r)
                    m.row(static_cast<Eigen::Index>(r)) = json_vector(rows[r], d, "tokens").transpose();
                entry.tokens.push_back(std::move(m));
            }
        }
        activation_entries_.push_back(std::move(entry));
    }
    noise_ = act.value("noise", 0.0);
    seed_ = act.value("seed", std::uint64_t{0});

    const json choice = sc.value("choice", json::object());
    if (choice.contains("default")) default_logits_ = json_logits(choice["default"]);
    for (const auto& e : choice.value("entries", json::array()))
        choice_entries_.push_back({e.value("match", std::string{}), json_logits(e.at("logits"))});
    if (choice.contains("drive_weights")) drive_weights_ = json_logits(choice["drive_weights"]);
}

std::unique_ptr<MockModel> MockModel::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock scenario '" + path + "'");
    json sc;
    try {
        in >> sc;
    } catch (const json::exception& e) {
        throw ConfigError("mock scenario '" + path + "': " + e.what());
    }
    return std::make_unique<MockModel>(sc);
}

MockModel::Drive MockModel::drive_at(std::size_t k, InjectionPlan& plan) {
    plan.injections_at(k, scratch_);
    Drive d;
    for (const auto& inj : scratch_) {
        if (inj.alpha == 0.0) continue;  // adds nothing to the residual stream
        if (inj.layer < 0 || inj.layer >= handle_.layer_count || !inj.components ||
            inj.components->size() != handle_.hidden_dim)
            throw ContractViolation("injection does not fit the model");
        d.fired = true;
        d.alpha += inj.alpha;
        d.drive += inj.alpha * readout_.row(inj.layer).dot(*inj.components);
    }
    return d;
}

GenerationResult MockModel::do_generate(const ChatPrompt& prompt, const DecodeParams& decode, InjectionPlan& plan,
                                        const TokenSink& sink) {
    ++generate_calls_;
    const std::string context = prompt.system + "\n" + prompt.user;
    for (const auto& f : fail_on_)
        if (context.find(f) != std::string::npos) throw TransportError("mock: scripted failure for '" + f + "'");

    const Drive first = drive_at(0, plan);
    const std::string* text = &default_script_;
    for (const auto& s : scripts_) {
        if (!s.match.empty() && context.find(s.match) == std::string::npos) continue;
        if (s.min_alpha && first.alpha < *s.min_alpha) continue;
        if (s.max_alpha && first.alpha > *s.max_alpha) continue;
        text = &s.text;
        break;
    }
    const auto script = mock_tokenize(*text);

    GenerationResult result;
    const std::size_t limit = static_cast<std::size_t>(decode.max_new_tokens);
    const std::size_t total = script.empty() ? 0 : (loop_ ? limit : std::min(limit, script.size()));
    for (std::size_t k = 0; k < total; ++k) {
        if (k > 0 && token_delay_.count() > 0) std::this_thread::sleep_for(token_delay_);
        const Drive d = k == 0 ? first : drive_at(k, plan);
        std::string token = script[k % script.size()];
        replace_all(token, "{alpha}", format_number(d.alpha));
        replace_all(token, "{drive}", format_number(d.drive));
        replace_all(token, "{k}", std::to_string(k));
        if (d.fired) {
            token += marker_;
            fire_log_.push_back(k);
        }
        result.text += token;
        result.tokens.push_back(token);
        result.injected.push_back(d.fired);
        result.fluency_eligible.push_back(true);
        ++result.token_count;
        if (sink && !sink({k, token, d.fired})) break;
    }
    return result;
}

Matrix MockModel::do_capture(const ChatPrompt& prompt) {
    const auto tokens = mock_tokenize(prompt.prefill);
    if (tokens.empty()) throw EmptyPrefillError("prefill tokenizes to zero tokens");
    const std::string context = prompt.user + "\n" + prompt.prefill;
    const int L = handle_.layer_count, d = handle_.hidden_dim;

    Matrix out = base_activation_;
    for (const auto& e : activation_entries_) {
        if (!e.match.empty() && context.find(e.match) == std::string::npos) continue;
        out += e.offset;
        if (!e.tokens.empty()) {
            // scripted per-token activations replace the base; the row is their mean
            for (int l = 0; l < L; ++l) {
                if (e.tokens[l].rows() == 0) continue;
                out.row(l) += e.tokens[l].colwise().mean() - base_activation_.row(l);
            }
        }
    }
    if (noise_ > 0.0) {
        std::mt19937_64 rng(fnv1a(context, seed_ ^ 1469598103934665603ULL));
        std::normal_distribution<double> normal(0.0, noise_);
        for (int l = 0; l < L; ++l)
            for (int j = 0; j < d; ++j) out(l, j) += normal(rng);
    }
    return out;
}

bool MockModel::single_token(const std::string& label) const {
    if (mock_tokenize(label).size() != 1 || label != mock_tokenize(label).front()) return false;
    if (vocab_.empty()) return true;
    return std::find(vocab_.begin(), vocab_.end(), label) != vocab_.end();
}

std::string MockModel::do_choose(const ChatPrompt& prompt, std::span<const std::string> options,
                                 InjectionPlan& plan) {
    if (!handle_.capabilities.supports_constrained_choice)
        throw ContractViolation("mock: constrained choice disabled");
    for (const auto& o : options)
        if (!single_token(o)) throw UnsupportedOptionError("option '" + o + "' is not a single token");

    const std::string context = prompt.system + "\n" + prompt.user;
    for (const auto& f : fail_on_)
        if (context.find(f) != std::string::npos) throw TransportError("mock: scripted failure for '" + f + "'");

    const std::map<std::string, double>* logits = &default_logits_;
    for (const auto& e : choice_entries_) {
        if (e.match.empty() || context.find(e.match) != std::string::npos) {
            logits = &e.logits;
            break;
        }
    }
    const Drive d = drive_at(0, plan);
    if (d.fired) fire_log_.push_back(0);

    std::size_t best = 0;
    double best_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < options.size(); ++i) {
        double v = 0.0;
        if (auto it = logits->find(options[i]); it != logits->end()) v = it->second;
        if (auto it = drive_weights_.find(options[i]); it != drive_weights_.end()) v += it->second * d.drive;
        if (v > best_logit) {  // strict: ties keep the earlier option
            best_logit = v;
            best = i;
        }
    }
    return options[best];
}

}  // namespace psteer::backend
