#include "psteer/corpus/clients.hpp"

#include "psteer/io.hpp"
#include "psteer/net.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

namespace psteer::clients {

json ScriptedClient::call(const json& request) {
    ++calls_;
    return respond_(request);
}

json HttpServiceClient::call(const json& request) { return net::post_json(url_, request, timeout_); }

RetryingClient::RetryingClient(std::shared_ptr<ServiceClient> inner, RetryPolicy policy, Sleeper sleep)
    : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleep)) {
    if (policy_.attempts < 1) throw ConfigError("retry attempts must be >= 1");
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

json RetryingClient::call(const json& request) {
    auto backoff = policy_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return inner_->call(request);
        } catch (const TransportError&) {
            if (attempt >= policy_.attempts) throw;
        }
        sleep_(backoff);
        backoff = std::min(policy_.max_backoff, std::chrono::milliseconds(static_cast<long long>(
                                                    static_cast<double>(backoff.count()) * policy_.multiplier)));
    }
}

LoggingClient::LoggingClient(std::shared_ptr<ServiceClient> inner, std::filesystem::path log)
    : inner_(std::move(inner)), log_(std::move(log)) {}

json LoggingClient::call(const json& request) {
    const auto start = std::chrono::steady_clock::now();
    json entry = {{"request", request}};
    auto finish = [&] {
        entry["elapsed_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        std::lock_guard lock(mutex_);
        entry["seq"] = seq_++;
        io::append_jsonl(log_, entry);
    };
    try {
        json response = inner_->call(request);
        entry["response"] = response;
        finish();
        return response;
    } catch (const std::exception& e) {
        entry["error"] = e.what();
        finish();
        throw;
    }
}

namespace {

json expect_field(const json& response, const char* key, const char* op) {
    if (!response.is_object() || !response.contains(key))
        throw TransportError(std::string(op) + " response lacks '" + key + "'");
    return response.at(key);
}

class ServiceGenerator final : public TextGenerator {
public:
    explicit ServiceGenerator(std::shared_ptr<ServiceClient> c) : client_(std::move(c)) {}
    std::vector<std::string> generate(const GenerationRequest& r) override {
        const json response = client_->call({{"op", "generate"},
                                             {"system", r.system},
                                             {"user", r.user},
                                             {"prefill", r.prefill},
                                             {"max_new_tokens", r.max_new_tokens},
                                             {"temperature", r.temperature},
                                             {"top_p", r.top_p},
                                             {"n", r.n}});
        auto texts = expect_field(response, "texts", "generate").get<std::vector<std::string>>();
        if (static_cast<int>(texts.size()) > r.n) throw TransportError("generate returned more texts than requested");
        return texts;
    }

private:
    std::shared_ptr<ServiceClient> client_;
};

class ServiceEmbedder final : public Embedder {
public:
    explicit ServiceEmbedder(std::shared_ptr<ServiceClient> c) : client_(std::move(c)) {}
    Matrix embed(const std::vector<std::string>& texts) override {
        if (texts.empty()) return Matrix(0, 0);
        const json rows = expect_field(client_->call({{"op", "embed"}, {"texts", texts}}), "embeddings", "embed");
        if (rows.size() != texts.size()) throw TransportError("embed returned the wrong number of rows");
        Matrix out;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Vector v = io::vector_from_json(rows[i]);
            if (i == 0) out.resize(static_cast<Eigen::Index>(rows.size()), v.size());
            if (v.size() != out.cols()) throw TransportError("embed returned ragged rows");
            out.row(static_cast<Eigen::Index>(i)) = v.transpose();
        }
        return out;
    }

private:
    std::shared_ptr<ServiceClient> client_;
};

class ServiceFluency final : public FluencyScorer {
public:
    explicit ServiceFluency(std::shared_ptr<ServiceClient> c) : client_(std::move(c)) {}
    std::vector<double> score(const std::vector<std::string>& texts) override {
        if (texts.empty()) return {};
        auto s = expect_field(client_->call({{"op", "fluency"}, {"texts", texts}}), "scores", "fluency")
                     .get<std::vector<double>>();
        if (s.size() != texts.size()) throw TransportError("fluency returned the wrong number of scores");
        return s;
    }

private:
    std::shared_ptr<ServiceClient> client_;
};

class ServiceChat final : public ChatClient {
public:
    explicit ServiceChat(std::shared_ptr<ServiceClient> c) : client_(std::move(c)) {}
    std::string complete(const std::string& system, const std::string& user, double temperature,
                         int max_new_tokens) override {
        return expect_field(client_->call({{"op", "chat"},
                                           {"system", system},
                                           {"user", user},
                                           {"temperature", temperature},
                                           {"max_new_tokens", max_new_tokens}}),
                            "text", "chat")
            .get<std::string>();
    }

private:
    std::shared_ptr<ServiceClient> client_;
};

class FunctionGenerator final : public TextGenerator {
public:
    explicit FunctionGenerator(std::function<std::string(const GenerationRequest&, int)> f) : f_(std::move(f)) {}
    std::vector<std::string> generate(const GenerationRequest& r) override {
        std::vector<std::string> out;
        for (int i = 0; i < r.n; ++i) out.push_back(f_(r, i));
        return out;
    }

private:
    std::function<std::string(const GenerationRequest&, int)> f_;
};

class FunctionEmbedder final : public Embedder {
public:
    explicit FunctionEmbedder(std::function<Vector(const std::string&)> f) : f_(std::move(f)) {}
    Matrix embed(const std::vector<std::string>& texts) override {
        Matrix out;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            const Vector v = f_(texts[i]);
            if (i == 0) out.resize(static_cast<Eigen::Index>(texts.size()), v.size());
            out.row(static_cast<Eigen::Index>(i)) = v.transpose();
        }
        return out;
    }

private:
    std::function<Vector(const std::string&)> f_;
};

class FunctionFluency final : public FluencyScorer {
public:
    explicit FunctionFluency(std::function<double(const std::string&)> f) : f_(std::move(f)) {}
    std::vector<double> score(const std::vector<std::string>& texts) override {
        std::vector<double> out;
        for (const auto& t : texts) out.push_back(f_(t));
        return out;
    }

private:
    std::function<double(const std::string&)> f_;
};

class FunctionChat final : public ChatClient {
public:
    explicit FunctionChat(std::function<std::string(const std::string&, const std::string&)> f) : f_(std::move(f)) {}
    std::string complete(const std::string& system, const std::string& user, double, int) override {
        return f_(system, user);
    }

private:
    std::function<std::string(const std::string&, const std::string&)> f_;
};

class BackendGenerator final : public TextGenerator {
public:
    explicit BackendGenerator(backend::LanguageModel& m, std::unique_ptr<backend::LanguageModel> owned = {})
        : model_(m), owned_(std::move(owned)) {}
    std::vector<std::string> generate(const GenerationRequest& r) override {
        backend::DecodeParams decode;
        decode.max_new_tokens = r.max_new_tokens;
        decode.temperature = r.temperature;
        decode.top_p = r.top_p;
        decode.greedy = r.temperature == 0.0;
        decode.prefill = r.prefill;
        std::vector<std::string> out;
        for (int i = 0; i < r.n; ++i)
            out.push_back(r.prefill + backend::generate(model_, r.system, r.user, decode).text);
        return out;
    }

private:
    backend::LanguageModel& model_;
    std::unique_ptr<backend::LanguageModel> owned_;
};

class BackendChat final : public ChatClient {
public:
    explicit BackendChat(backend::LanguageModel& m, std::unique_ptr<backend::LanguageModel> owned = {})
        : model_(m), owned_(std::move(owned)) {}
    std::string complete(const std::string& system, const std::string& user, double temperature,
                         int max_new_tokens) override {
        backend::DecodeParams decode;
        decode.max_new_tokens = max_new_tokens;
        decode.temperature = temperature;
        decode.greedy = temperature == 0.0;
        return backend::generate(model_, system, user, decode).text;
    }

private:
    backend::LanguageModel& model_;
    std::unique_ptr<backend::LanguageModel> owned_;
};

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '\'') {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

std::unique_ptr<TextGenerator> service_generator(std::shared_ptr<ServiceClient> c) {
    return std::make_unique<ServiceGenerator>(std::move(c));
}
std::unique_ptr<Embedder> service_embedder(std::shared_ptr<ServiceClient> c) {
    return std::make_unique<ServiceEmbedder>(std::move(c));
}
std::unique_ptr<FluencyScorer> service_fluency(std::shared_ptr<ServiceClient> c) {
    return std::make_unique<ServiceFluency>(std::move(c));
}
std::unique_ptr<ChatClient> service_chat(std::shared_ptr<ServiceClient> c) {
    return std::make_unique<ServiceChat>(std::move(c));
}

std::unique_ptr<TextGenerator> function_generator(std::function<std::string(const GenerationRequest&, int)> f) {
    return std::make_unique<FunctionGenerator>(std::move(f));
}
std::unique_ptr<Embedder> function_embedder(std::function<Vector(const std::string&)> f) {
    return std::make_unique<FunctionEmbedder>(std::move(f));
}
std::unique_ptr<FluencyScorer> function_fluency(std::function<double(const std::string&)> f) {
    return std::make_unique<FunctionFluency>(std::move(f));
}
std::unique_ptr<ChatClient> function_chat(std::function<std::string(const std::string&, const std::string&)> f) {
    return std::make_unique<FunctionChat>(std::move(f));
}

std::unique_ptr<TextGenerator> backend_generator(backend::LanguageModel& model) {
    return std::make_unique<BackendGenerator>(model);
}
std::unique_ptr<ChatClient> backend_chat(backend::LanguageModel& model) { return std::make_unique<BackendChat>(model); }

Matrix HashingEmbedder::embed(const std::vector<std::string>& texts) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(texts.size()), dim_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto w = words(texts[i]);
        auto add = [&](const std::string& feature, double weight) {
            const auto h = fnv1a(feature);
            const double sign = (h >> 63) ? -1.0 : 1.0;
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_))) +=
                sign * weight;
        };
        for (std::size_t j = 0; j < w.size(); ++j) {
            add(w[j], 1.0);
            if (j + 1 < w.size()) add(w[j] + " " + w[j + 1], 0.5);
        }
        const double n = out.row(static_cast<Eigen::Index>(i)).norm();
        if (n > 0) out.row(static_cast<Eigen::Index>(i)) /= n;
    }
    return out;
}

double HeuristicFluency::score_one(const std::string& text) {
    const auto w = words(text);
    if (w.empty()) return 0.0;
    double s = 1.0;
    std::size_t end = text.find_last_not_of(" \t\n");
    if (end == std::string::npos || std::string(".!?").find(text[end]) == std::string::npos) s -= 0.2;
    std::size_t odd = 0, total = 0;
    for (unsigned char c : text) {
        if (std::isspace(c)) continue;
        ++total;
        if (!std::isalnum(c) && std::string(".,'!?;:-\"()").find(static_cast<char>(c)) == std::string::npos) ++odd;
    }
    s -= 2.0 * static_cast<double>(odd) / static_cast<double>(total);
    // immediate word repetition ("the the") and low lexical variety
    std::size_t repeats = 0;
    for (std::size_t j = 1; j < w.size(); ++j) repeats += w[j] == w[j - 1];
    s -= 0.5 * static_cast<double>(repeats) / static_cast<double>(w.size());
    const std::set<std::string> distinct(w.begin(), w.end());
    if (w.size() >= 6) s -= 0.5 * std::max(0.0, 0.5 - static_cast<double>(distinct.size()) / static_cast<double>(w.size()));
    for (const auto& word : w)
        if (word.size() > 20) s -= 0.1;
    return std::clamp(s, 0.0, 1.0);
}

std::vector<double> HeuristicFluency::score(const std::vector<std::string>& texts) {
    std::vector<double> out;
    for (const auto& t : texts) out.push_back(score_one(t));
    return out;
}

std::shared_ptr<ServiceClient> open_service(const json& config) {
    if (!config.contains("url")) throw ConfigError("service config needs a 'url'");
    std::shared_ptr<ServiceClient> client =
        std::make_shared<HttpServiceClient>(config.at("url").get<std::string>(), config.value("timeout", 120));
    if (config.contains("log"))
        client = std::make_shared<LoggingClient>(client, config.at("log").get<std::string>());
    RetryPolicy policy;
    policy.attempts = config.value("retries", 4);
    policy.initial_backoff = std::chrono::milliseconds(config.value("backoff_ms", 250));
    return std::make_shared<RetryingClient>(client, policy);
}

namespace {

std::string kind_of(const json& config) {
    if (!config.is_object() || !config.contains("kind")) throw ConfigError("client config needs a 'kind'");
    return config.at("kind").get<std::string>();
}

}  // namespace

std::unique_ptr<Embedder> make_embedder(const json& config) {
    const auto kind = kind_of(config);
    if (kind == "hash") return std::make_unique<HashingEmbedder>(config.value("dim", 256));
    if (kind == "service") return service_embedder(open_service(config));
    throw ConfigError("unknown embedder kind '" + kind + "'");
}

std::unique_ptr<FluencyScorer> make_fluency(const json& config) {
    const auto kind = kind_of(config);
    if (kind == "heuristic") return std::make_unique<HeuristicFluency>();
    if (kind == "service") return service_fluency(open_service(config));
    throw ConfigError("unknown fluency kind '" + kind + "'");
}

std::unique_ptr<TextGenerator> make_generator(const json& config) {
    const auto kind = kind_of(config);
    if (kind == "service") return service_generator(open_service(config));
    if (kind == "backend") {
        auto model = backend::open_model(config.at("model").get<std::string>());
        auto& ref = *model;
        return std::make_unique<BackendGenerator>(ref, std::move(model));
    }
    throw ConfigError("unknown generator kind '" + kind + "'");
}

std::unique_ptr<ChatClient> make_chat(const json& config) {
    const auto kind = kind_of(config);
    if (kind == "service") return service_chat(open_service(config));
    if (kind == "backend") {
        auto model = backend::open_model(config.at("model").get<std::string>());
        auto& ref = *model;
        return std::make_unique<BackendChat>(ref, std::move(model));
    }
    throw ConfigError("unknown chat kind '" + kind + "'");
}

}  // namespace psteer::clients
