#pragma once

// External services (text generation, embedding, fluency scoring, judging).
//
// Every remote service speaks one JSON request/response interface; the
// typed clients below encode these requests:
//
//   {"op": "generate", "system", "user", "prefill", "max_new_tokens",
//    "temperature", "top_p", "n"}                      -> {"texts": [...]}
//   {"op": "embed", "texts": [...]}                     -> {"embeddings": [[...], ...]}
//   {"op": "fluency", "texts": [...]}                   -> {"scores": [...]}
//   {"op": "chat", "system", "user", "temperature",
//    "max_new_tokens"}                                  -> {"text": "..."}
//
// Generated texts include the prefill. A generator returning fewer than n
// texts is exhausted.

#include "psteer/backend/model.hpp"

#include "json.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace psteer::clients {

using nlohmann::json;

class ServiceClient {
public:
    virtual ~ServiceClient() = default;
    virtual json call(const json& request) = 0;
};

class ScriptedClient final : public ServiceClient {
public:
    explicit ScriptedClient(std::function<json(const json&)> respond) : respond_(std::move(respond)) {}
    json call(const json& request) override;
    std::size_t calls() const { return calls_; }

private:
    std::function<json(const json&)> respond_;
    std::size_t calls_ = 0;
};

class HttpServiceClient final : public ServiceClient {
public:
    explicit HttpServiceClient(std::string url, int timeout_seconds = 120)
        : url_(std::move(url)), timeout_(timeout_seconds) {}
    json call(const json& request) override;

private:
    std::string url_;
    int timeout_;
};

struct RetryPolicy {
    int attempts = 4;
    std::chrono::milliseconds initial_backoff{250};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};
};

/// Retries TransportError with exponential backoff; other errors pass through.
class RetryingClient final : public ServiceClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;
    RetryingClient(std::shared_ptr<ServiceClient> inner, RetryPolicy policy = {}, Sleeper sleep = {});
    json call(const json& request) override;

private:
    std::shared_ptr<ServiceClient> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

/// Appends {seq, request, response | error, elapsed_ms} per call to a JSONL file.
class LoggingClient final : public ServiceClient {
public:
    LoggingClient(std::shared_ptr<ServiceClient> inner, std::filesystem::path log);
    json call(const json& request) override;

private:
    std::shared_ptr<ServiceClient> inner_;
    std::filesystem::path log_;
    std::mutex mutex_;
    std::size_t seq_ = 0;
};

struct GenerationRequest {
    std::string system;
    std::string user;
    std::string prefill;
    int max_new_tokens = 48;
    double temperature = 1.0;
    double top_p = 1.0;
    int n = 1;
};

class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    /// Up to request.n texts, each starting with the prefill. Fewer means the
    /// generator is exhausted.
    virtual std::vector<std::string> generate(const GenerationRequest& request) = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    /// One row per text.
    virtual Matrix embed(const std::vector<std::string>& texts) = 0;
};

class FluencyScorer {
public:
    virtual ~FluencyScorer() = default;
    /// Scores in [0, 1], one per text.
    virtual std::vector<double> score(const std::vector<std::string>& texts) = 0;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const std::string& system, const std::string& user, double temperature,
                                 int max_new_tokens) = 0;
};

// Adapters over a ServiceClient.
std::unique_ptr<TextGenerator> service_generator(std::shared_ptr<ServiceClient> client);
std::unique_ptr<Embedder> service_embedder(std::shared_ptr<ServiceClient> client);
std::unique_ptr<FluencyScorer> service_fluency(std::shared_ptr<ServiceClient> client);
std::unique_ptr<ChatClient> service_chat(std::shared_ptr<ServiceClient> client);

// Adapters over plain functions, one text at a time.
std::unique_ptr<TextGenerator> function_generator(std::function<std::string(const GenerationRequest&, int index)> f);
std::unique_ptr<Embedder> function_embedder(std::function<Vector(const std::string&)> f);
std::unique_ptr<FluencyScorer> function_fluency(std::function<double(const std::string&)> f);
std::unique_ptr<ChatClient> function_chat(std::function<std::string(const std::string& system, const std::string& user)> f);

/// Generator and chat client driven by a local backend, without injections.
std::unique_ptr<TextGenerator> backend_generator(backend::LanguageModel& model);
std::unique_ptr<ChatClient> backend_chat(backend::LanguageModel& model);

/// Hashed bag of lowercase words and word bigrams, L2-normalized. Offline
/// stand-in for a sentence-embedding model.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(int dim = 256) : dim_(dim) {}
    Matrix embed(const std::vector<std::string>& texts) override;

private:
    int dim_;
};

/// Surface heuristics (terminal punctuation, word shape, repetition).
/// Offline stand-in for an acceptability classifier.
class HeuristicFluency final : public FluencyScorer {
public:
    std::vector<double> score(const std::vector<std::string>& texts) override;
    static double score_one(const std::string& text);
};

/// Service stack from a config object:
///   {"url": "...", "timeout": 120, "retries": 4, "backoff_ms": 250, "log": "path.jsonl"}
std::shared_ptr<ServiceClient> open_service(const json& config);

/// Builtin or remote clients from config: {"kind": "hash", "dim": 256},
/// {"kind": "heuristic"}, {"kind": "service", ...open_service keys}, or for
/// generators and chat {"kind": "backend", "model": uri}.
std::unique_ptr<Embedder> make_embedder(const json& config);
std::unique_ptr<FluencyScorer> make_fluency(const json& config);
std::unique_ptr<TextGenerator> make_generator(const json& config);
std::unique_ptr<ChatClient> make_chat(const json& config);

}  // namespace psteer::clients
