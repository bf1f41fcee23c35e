#pragma once

// Deterministic scripted backend. A JSON scenario fixes the model shape, the
// token scripts it emits, its activations under prefill and its choice
// logits; injections influence the output only through what the scenario
// scripts (markers, alpha-keyed scripts, {alpha}/{drive} placeholders, choice
// drive weights).
//
// Scenario schema (every key optional except the shape):
//
//   {
//     "model_id": "mock", "layer_count": 3, "hidden_dim": 4,
//     "vocab": ["A", "B", ...],             // restricts single-token labels
//     "capabilities": {"supports_live_control": true, ...},
//     "generation": {
//       "default": " help them.",
//       "scripts": [{"match": "...", "min_alpha": 3, "max_alpha": 5, "text": "..."}],
//       "loop": false,                      // cycle the script up to max_new_tokens
//       "injection_marker": "+",            // appended to every injected token
//       "token_delay_ms": 0,                // sleep between tokens, for streaming tests
//       "readout": [[...d...], ...],        // per-layer drive direction
//       "fail_on": ["..."]                  // prompt substrings that raise TransportError
//     },
//     "activations": {
//       "default": [...d...] | [[...d...] per layer],
//       "entries": [{"match": "...", "offset": ..., "tokens": [[[...d...] per token] per layer]}],
//       "noise": 0.0, "seed": 0
//     },
//     "choice": {
//       "default": {"A": 0.0, ...},
//       "entries": [{"match": "...", "logits": {...}}],
//       "drive_weights": {"A": 1.0, ...}
//     }
//   }
//
// Placeholders inside script tokens: {alpha} is the summed alpha firing at
// that position, {drive} the summed alpha * (readout . v), {k} the position.

#include "psteer/backend/model.hpp"

#include "json.hpp"

#include <chrono>
#include <map>

namespace psteer::backend {

/// Splits text into tokens: optional leading whitespace plus a non-space run.
std::vector<std::string> mock_tokenize(std::string_view text);

class MockModel final : public LanguageModel {
public:
    explicit MockModel(const nlohmann::json& scenario);
    static std::unique_ptr<MockModel> from_file(const std::string& path);

    const ModelHandle& handle() const override { return handle_; }

    /// Positions at which injections fired, over all generate calls.
    const std::vector<std::size_t>& fire_log() const { return fire_log_; }
    std::size_t generate_calls() const { return generate_calls_; }

protected:
    GenerationResult do_generate(const ChatPrompt& prompt, const DecodeParams& decode, InjectionPlan& plan,
                                 const TokenSink& sink) override;
    Matrix do_capture(const ChatPrompt& prompt) override;
    std::string do_choose(const ChatPrompt& prompt, std::span<const std::string> options,
                          InjectionPlan& plan) override;

private:
    struct Script {
        std::string match;
        std::optional<double> min_alpha, max_alpha;
        std::string text;
    };
    struct ActivationEntry {
        std::string match;
        Matrix offset;                  // [layers x d]
        std::vector<Matrix> tokens;     // per layer [T x d]
    };
    struct ChoiceEntry {
        std::string match;
        std::map<std::string, double> logits;
    };

    struct Drive {
        double alpha = 0.0;
        double drive = 0.0;
        bool fired = false;
    };
    Drive drive_at(std::size_t k, InjectionPlan& plan);
    bool single_token(const std::string& label) const;

    ModelHandle handle_;
    std::vector<std::string> vocab_;

    std::string default_script_;
    std::vector<Script> scripts_;
    bool loop_ = false;
    std::string marker_;
    std::chrono::milliseconds token_delay_{0};
    Matrix readout_;  // [layers x d]
    std::vector<std::string> fail_on_;

    Matrix base_activation_;  // [layers x d]
    std::vector<ActivationEntry> activation_entries_;
    double noise_ = 0.0;
    std::uint64_t seed_ = 0;

    std::map<std::string, double> default_logits_;
    std::vector<ChoiceEntry> choice_entries_;
    std::map<std::string, double> drive_weights_;

    std::vector<Injection> scratch_;
    std::vector<std::size_t> fire_log_;
    std::size_t generate_calls_ = 0;
};

}  // namespace psteer::backend
