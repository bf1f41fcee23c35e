#pragma once

// Language-model abstraction: read access to per-layer residual-stream
// activations and additive injections during generation.

#include "psteer/core.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace psteer::backend {

struct Capabilities {
    bool supports_prefill = true;
    bool supports_constrained_choice = true;
    bool supports_activation_capture = true;
    // Injection plans that change while generating (playground sessions).
    bool supports_live_control = false;
};

struct ModelHandle {
    std::string model_id;
    int layer_count = 1;
    int hidden_dim = 1;
    Capabilities capabilities;
};

/// Adds `alpha * v` at one layer on completion positions k with k % stride == 0.
struct InjectionDirective {
    int layer = 0;
    std::string vector_ref;
    double alpha = 0.0;
    int stride = 1;
    // [start, end) in completion-token indices
    std::optional<std::pair<int, int>> token_window;

    bool fires_at(std::size_t k) const {
        if (k % static_cast<std::size_t>(stride) != 0) return false;
        if (!token_window) return true;
        return static_cast<int>(k) >= token_window->first && static_cast<int>(k) < token_window->second;
    }
};

/// A directive together with the resolved vector components.
struct ScheduledInjection {
    InjectionDirective directive;
    Vector components;
};

using Schedule = std::vector<ScheduledInjection>;

struct DecodeParams {
    int max_new_tokens = 64;
    double temperature = 0.0;
    double top_p = 1.0;
    bool greedy = true;
    std::string prefill;
    std::vector<std::string> allowed_outputs;
};

struct ChatPrompt {
    std::string system;
    std::string user;
    std::string prefill;
};

/// One injection firing at a given completion position.
struct Injection {
    int layer = 0;
    const Vector* components = nullptr;
    double alpha = 0.0;
    std::string_view ref;
};

/// Supplies the injections that fire at each completion position. Queried
/// once per position, in increasing k, on the generating thread.
class InjectionPlan {
public:
    virtual ~InjectionPlan() = default;
    virtual void injections_at(std::size_t k, std::vector<Injection>& out) = 0;
    /// The plan as a fixed schedule, when it is one.
    virtual const Schedule* static_schedule() const { return nullptr; }
};

class StaticPlan final : public InjectionPlan {
public:
    StaticPlan() = default;
    explicit StaticPlan(Schedule schedule) : schedule_(std::move(schedule)) {}

    void injections_at(std::size_t k, std::vector<Injection>& out) override;
    const Schedule* static_schedule() const override { return &schedule_; }

private:
    Schedule schedule_;
};

struct TokenEvent {
    std::size_t k = 0;
    std::string text;
    bool injected = false;
};

/// Return false to stop generation after this token.
using TokenSink = std::function<bool(const TokenEvent&)>;

struct GenerationResult {
    std::string text;  // generated continuation, without the prefill
    std::vector<std::string> tokens;
    std::vector<bool> injected;
    std::vector<bool> fluency_eligible;
    std::size_t token_count = 0;
};

/// Base class for backends. Public calls serialize on the instance.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;

    virtual const ModelHandle& handle() const = 0;

    GenerationResult generate(const ChatPrompt& prompt, const DecodeParams& decode, InjectionPlan& plan,
                              const TokenSink& sink = {});
    Matrix capture(const ChatPrompt& prompt);
    std::string choose(const ChatPrompt& prompt, std::span<const std::string> options, InjectionPlan& plan);

protected:
    virtual GenerationResult do_generate(const ChatPrompt& prompt, const DecodeParams& decode,
                                         InjectionPlan& plan, const TokenSink& sink) = 0;
    virtual Matrix do_capture(const ChatPrompt& prompt) = 0;
    virtual std::string do_choose(const ChatPrompt& prompt, std::span<const std::string> options,
                                  InjectionPlan& plan) = 0;

private:
    std::mutex mutex_;
};

/// h + alpha * v, without modifying h.
template <typename DerivedH, typename DerivedV>
Vector apply_injection(const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedV>& v, double alpha) {
    if (h.size() != v.size())
        throw ContractViolation("apply_injection: dimension mismatch (" + std::to_string(h.size()) + " vs " +
                                std::to_string(v.size()) + ")");
    return h.derived().template cast<double>() + alpha * v.derived().template cast<double>();
}

/// Throws ContractViolation if any directive does not fit the model.
void validate_schedule(const ModelHandle& model, const Schedule& schedule);

GenerationResult generate(LanguageModel& model, const std::string& system, const std::string& user,
                          const DecodeParams& decode, const Schedule& schedule = {});

/// Per-layer mean activation over the prefilled completion tokens; [layer_count x d].
Matrix capture_prefill_activations(LanguageModel& model, const std::string& system, const std::string& user,
                                   const std::string& prefill);

/// Greedy single-token choice among `options`.
std::string constrained_choice(LanguageModel& model, const std::string& system, const std::string& user,
                               std::span<const std::string> options, const Schedule& schedule = {});

using BackendFactory = std::function<std::unique_ptr<LanguageModel>(const std::string& location)>;

/// Registers a factory for a URI scheme ("mock", "http", ...).
void register_backend(const std::string& scheme, BackendFactory factory);

/// Opens "scheme:location". A bare path ending in ".json" opens a mock scenario.
std::unique_ptr<LanguageModel> open_model(const std::string& uri);

}  // namespace psteer::backend
