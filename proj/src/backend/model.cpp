#include "psteer/backend/model.hpp"

#include "psteer/backend/http_model.hpp"
#include "psteer/backend/mock.hpp"

#include <map>

namespace psteer::backend {

void StaticPlan::injections_at(std::size_t k, std::vector<Injection>& out) {
    out.clear();
    for (const auto& s : schedule_) {
        if (s.directive.fires_at(k))
            out.push_back({s.directive.layer, &s.components, s.directive.alpha, s.directive.vector_ref});
    }
}

GenerationResult LanguageModel::generate(const ChatPrompt& prompt, const DecodeParams& decode, InjectionPlan& plan,
                                         const TokenSink& sink) {
    if (decode.max_new_tokens < 1) throw ContractViolation("max_new_tokens must be positive");
    if (decode.top_p <= 0.0 || decode.top_p > 1.0) throw ContractViolation("top_p must lie in (0, 1]");
    if (decode.temperature < 0.0) throw ContractViolation("temperature must be non-negative");
    std::lock_guard lock(mutex_);
    return do_generate(prompt, decode, plan, sink);
}

Matrix LanguageModel::capture(const ChatPrompt& prompt) {
    if (!handle().capabilities.supports_activation_capture)
        throw ContractViolation("backend '" + handle().model_id + "' cannot capture activations");
    if (prompt.prefill.empty()) throw EmptyPrefillError("prefill is empty");
    std::lock_guard lock(mutex_);
    return do_capture(prompt);
}

std::string LanguageModel::choose(const ChatPrompt& prompt, std::span<const std::string> options,
                                  InjectionPlan& plan) {
    if (options.empty()) throw ContractViolation("constrained_choice needs at least one option");
    std::lock_guard lock(mutex_);
    return do_choose(prompt, options, plan);
}

void validate_schedule(const ModelHandle& model, const Schedule& schedule) {
    std::vector<std::pair<int, int>> windows;
    for (const auto& s : schedule) {
        const auto& d = s.directive;
        if (d.stride < 1) throw ContractViolation("stride must be >= 1");
        if (d.layer < 0 || d.layer >= model.layer_count)
            throw ContractViolation("layer " + std::to_string(d.layer) + " outside [0, " +
                                    std::to_string(model.layer_count) + ")");
        if (s.components.size() != model.hidden_dim)
            throw ContractViolation("vector '" + d.vector_ref + "' has dimension " +
                                    std::to_string(s.components.size()) + ", model has " +
                                    std::to_string(model.hidden_dim));
        if (d.token_window) {
            const auto [a, b] = *d.token_window;
            if (a < 0 || b < a) throw ContractViolation("invalid token window");
            for (const auto& [c, e] : windows)
                if (a < e && c < b) throw ContractViolation("overlapping token windows in one schedule");
            windows.emplace_back(a, b);
        }
    }
}

GenerationResult generate(LanguageModel& model, const std::string& system, const std::string& user,
                          const DecodeParams& decode, const Schedule& schedule) {
    validate_schedule(model.handle(), schedule);
    StaticPlan plan(schedule);
    return model.generate({system, user, decode.prefill}, decode, plan);
}

Matrix capture_prefill_activations(LanguageModel& model, const std::string& system, const std::string& user,
                                   const std::string& prefill) {
    return model.capture({system, user, prefill});
}

std::string constrained_choice(LanguageModel& model, const std::string& system, const std::string& user,
                               std::span<const std::string> options, const Schedule& schedule) {
    validate_schedule(model.handle(), schedule);
    StaticPlan plan(schedule);
    return model.choose({system, user, {}}, options, plan);
}

namespace {

std::map<std::string, BackendFactory>& registry() {
    static std::map<std::string, BackendFactory> r = [] {
        std::map<std::string, BackendFactory> m;
        m["mock"] = [](const std::string& loc) -> std::unique_ptr<LanguageModel> { return MockModel::from_file(loc); };
        m["http"] = [](const std::string& loc) -> std::unique_ptr<LanguageModel> {
            return std::make_unique<HttpModel>("http:" + loc);
        };
        return m;
    }();
    return r;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

void register_backend(const std::string& scheme, BackendFactory factory) {
    std::lock_guard lock(registry_mutex());
    registry()[scheme] = std::move(factory);
}

std::unique_ptr<LanguageModel> open_model(const std::string& uri) {
    std::string scheme, location;
    if (const auto colon = uri.find(':'); colon != std::string::npos && colon > 1) {
        scheme = uri.substr(0, colon);
        location = uri.substr(colon + 1);
    } else if (uri.size() > 5 && uri.ends_with(".json")) {
        scheme = "mock";
        location = uri;
    } else {
        throw ConfigError("cannot infer backend for '" + uri + "'");
    }
    BackendFactory factory;
    {
        std::lock_guard lock(registry_mutex());
        auto it = registry().find(scheme);
        if (it == registry().end()) throw ConfigError("no backend registered for scheme '" + scheme + "'");
        factory = it->second;
    }
    return factory(location);
}

}  // namespace psteer::backend
