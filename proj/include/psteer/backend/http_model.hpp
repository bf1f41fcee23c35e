#pragma once

// Adapter for a model served by an external inference process (see
// tools/hf_backend_server.py). Wire protocol, all JSON:
//
//   GET  /info     -> {model_id, layer_count, hidden_dim, capabilities{...}}
//   POST /generate {system, user, prefill, max_new_tokens, temperature, top_p,
//                   greedy, injections: [{layer, vector: [d], alpha, stride,
//                   window: [start, end] | null}]}
//                  -> {tokens: [str], injected: [bool]}
//   POST /capture  {system, user, prefill} -> {activations: [[d] x layers]}
//   POST /choice   {system, user, options: [str], injections: [...]} -> {label}
//
// Only static schedules can be shipped to the server, so live playground
// control is unavailable through this backend.

#include "psteer/backend/model.hpp"

namespace psteer::backend {

class HttpModel final : public LanguageModel {
public:
    explicit HttpModel(std::string base_url);

    const ModelHandle& handle() const override { return handle_; }

protected:
    GenerationResult do_generate(const ChatPrompt& prompt, const DecodeParams& decode, InjectionPlan& plan,
                                 const TokenSink& sink) override;
    Matrix do_capture(const ChatPrompt& prompt) override;
    std::string do_choose(const ChatPrompt& prompt, std::span<const std::string> options,
                          InjectionPlan& plan) override;

private:
    std::string base_url_;
    ModelHandle handle_;
};

}  // namespace psteer::backend
