#include "psteer/backend/http_model.hpp"

#include "psteer/net.hpp"

namespace psteer::backend {

using nlohmann::json;

namespace {

json encode_schedule(InjectionPlan& plan) {
    const Schedule* schedule = plan.static_schedule();
    if (!schedule) throw ContractViolation("http backend supports only static injection schedules");
    json out = json::array();
    for (const auto& s : *schedule) {
        json w = nullptr;
        if (s.directive.token_window) w = {s.directive.token_window->first, s.directive.token_window->second};
        out.push_back({{"layer", s.directive.layer},
                       {"vector", std::vector<double>(s.components.data(), s.components.data() + s.components.size())},
                       {"alpha", s.directive.alpha},
                       {"stride", s.directive.stride},
                       {"window", w}});
    }
    return out;
}

}  // namespace

HttpModel::HttpModel(std::string base_url) : base_url_(std::move(base_url)) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
    const json info = net::get_json(base_url_ + "/info");
    handle_.model_id = info.at("model_id").get<std::string>();
    handle_.layer_count = info.at("layer_count").get<int>();
    handle_.hidden_dim = info.at("hidden_dim").get<int>();
    const json caps = info.value("capabilities", json::object());
    handle_.capabilities.supports_prefill = caps.value("supports_prefill", true);
    handle_.capabilities.supports_constrained_choice = caps.value("supports_constrained_choice", true);
    handle_.capabilities.supports_activation_capture = caps.value("supports_activation_capture", true);
    handle_.capabilities.supports_live_control = false;
}

GenerationResult HttpModel::do_generate(const ChatPrompt& prompt, const DecodeParams& decode, InjectionPlan& plan,
                                        const TokenSink& sink) {
    const json req{{"system", prompt.system},
                   {"user", prompt.user},
                   {"prefill", prompt.prefill},
                   {"max_new_tokens", decode.max_new_tokens},
                   {"temperature", decode.temperature},
                   {"top_p", decode.top_p},
                   {"greedy", decode.greedy},
                   {"injections", encode_schedule(plan)}};
    const json res = net::post_json(base_url_ + "/generate", req);
    GenerationResult out;
    const auto tokens = res.at("tokens").get<std::vector<std::string>>();
    const auto injected = res.value("injected", std::vector<bool>(tokens.size(), false));
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        out.text += tokens[k];
        out.tokens.push_back(tokens[k]);
        out.injected.push_back(k < injected.size() && injected[k]);
        out.fluency_eligible.push_back(true);
        ++out.token_count;
        if (sink && !sink({k, tokens[k], out.injected.back()})) break;
    }
    return out;
}

Matrix HttpModel::do_capture(const ChatPrompt& prompt) {
    const json res =
        net::post_json(base_url_ + "/capture", {{"system", prompt.system}, {"user", prompt.user}, {"prefill", prompt.prefill}});
    if (res.contains("error") && res["error"] == "empty_prefill") throw EmptyPrefillError("prefill tokenizes to zero tokens");
    const auto& rows = res.at("activations");
    Matrix m(handle_.layer_count, handle_.hidden_dim);
    if (static_cast<int>(rows.size()) != handle_.layer_count) throw TransportError("capture: wrong layer count");
    for (int l = 0; l < handle_.layer_count; ++l) {
        const auto row = rows[l].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != handle_.hidden_dim) throw TransportError("capture: wrong hidden size");
        for (int j = 0; j < handle_.hidden_dim; ++j) m(l, j) = row[j];
    }
    return m;
}

std::string HttpModel::do_choose(const ChatPrompt& prompt, std::span<const std::string> options,
                                 InjectionPlan& plan) {
    const json res = net::post_json(base_url_ + "/choice", {{"system", prompt.system},
                                                            {"user", prompt.user},
                                                            {"options", std::vector<std::string>(options.begin(), options.end())},
                                                            {"injections", encode_schedule(plan)}});
    if (res.contains("error") && res["error"] == "unsupported_option")
        throw UnsupportedOptionError(res.value("detail", std::string("multi-token option")));
    return res.at("label").get<std::string>();
}

}  // namespace psteer::backend
