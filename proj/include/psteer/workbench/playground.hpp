#pragma once

// Interactive multi-construct steering. A session generates one completion
// under a segment schedule; alpha changes and segment switches queued while
// it runs take effect at the next token. Every token, control and error is an
// event with a dense index, and the event log doubles as a replayable
// transcript.
//
// Event schema (version 1), one JSON object per event:
//   {"v":1, "index":n, "type":"token", "k":k, "token":"...", "active_construct":"N"|null,
//    "direction":"up"|null, "alpha":a, "segment":i}
//   {"v":1, "index":n, "type":"control", "k":k, "alpha":a} or {..., "next_segment":true}
//   {"v":1, "index":n, "type":"error", "message":"..."}
//   {"v":1, "index":n, "type":"end", "reason":"budget"|"length"|"stop"|"error", "tokens":t}
// "k" on a control event is the first token it applies to.

#include "psteer/backend/model.hpp"
#include "psteer/vectors/store.hpp"

#include "json.hpp"

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <thread>

namespace psteer::workbench {

inline constexpr int kEventSchema = 1;

struct Segment {
    std::string construct;
    Direction direction = Direction::up;
    double alpha = 0.0;
    int layer = 0;
    int token_budget = 1;
    Method method = Method::MDS;
    int stride = 1;

    nlohmann::json to_json() const;
    static Segment from_json(const nlohmann::json& j);
};

struct SegmentSchedule {
    std::vector<Segment> segments;

    std::size_t total_budget() const;
    /// Non-positive budgets or strides, vectors missing from the store, layers outside the model.
    std::vector<std::string> problems(const vectors::VectorStore& store, const backend::ModelHandle& model) const;
    /// The same plan as fixed token windows, for backends without live control.
    backend::Schedule to_static(const vectors::VectorStore& store) const;

    nlohmann::json to_json() const;
    /// Accepts a bare array or {"segments": [...]}.
    static SegmentSchedule from_json(const nlohmann::json& j);
};

struct Control {
    std::optional<double> alpha;
    bool next_segment = false;

    nlohmann::json to_json() const;
    /// Exactly one of {"alpha": x} or {"next_segment": true}; throws ConfigError otherwise.
    static Control from_json(const nlohmann::json& j);
};

struct PlaygroundEvent {
    std::size_t index = 0;
    std::string type;
    std::size_t k = 0;
    std::string token;
    std::optional<std::string> construct;
    std::optional<Direction> direction;
    double alpha = 0.0;
    int segment = -1;
    std::optional<Control> control;
    std::string message;  // error text, or the end reason
    std::size_t tokens = 0;

    nlohmann::json to_json() const;
    static PlaygroundEvent from_json(const nlohmann::json& j);
};

struct SessionRequest {
    backend::ChatPrompt prompt;
    SegmentSchedule schedule;
    backend::DecodeParams decode;

    nlohmann::json to_json() const;
    static SessionRequest from_json(const nlohmann::json& j);
};

class PlaygroundSession {
public:
    using Observer = std::function<void(const PlaygroundEvent&)>;

    PlaygroundSession(std::string id, backend::LanguageModel& model, const vectors::VectorStore& store,
                      SessionRequest request);
    ~PlaygroundSession();
    PlaygroundSession(const PlaygroundSession&) = delete;
    PlaygroundSession& operator=(const PlaygroundSession&) = delete;

    const std::string& id() const { return id_; }
    const SessionRequest& request() const { return request_; }

    /// Generates on a background thread.
    void start();
    /// Generates on the calling thread.
    void run();

    /// Queues a control for the next token boundary. Throws ContractViolation
    /// when the session has ended, the backend cannot take live control, or
    /// no segment is left to switch to.
    void control(const Control& c);
    /// Controls applied at fixed token positions, for replays.
    void script_controls(std::multimap<std::size_t, Control> controls);
    /// Called on the generating thread after each event is appended.
    void on_event(Observer observer) { observer_ = std::move(observer); }

    std::vector<PlaygroundEvent> events(std::size_t from = 0) const;
    /// Waits until an event with index >= from exists or the session has ended.
    bool wait(std::size_t from, std::chrono::milliseconds timeout) const;
    bool finished() const;

    /// Header line plus one line per event.
    std::string transcript() const;

private:
    class Plan;
    void emit(PlaygroundEvent e);

    std::string id_;
    backend::LanguageModel& model_;
    const vectors::VectorStore& store_;
    SessionRequest request_;
    std::unique_ptr<Plan> plan_;
    Observer observer_;

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::vector<PlaygroundEvent> events_;
    bool started_ = false;
    bool finished_ = false;
    std::thread worker_;
};

/// Token texts recorded in a transcript.
std::vector<std::string> transcript_tokens(const std::string& transcript);
/// Re-generates a transcript's request against `model`, applying its controls where they were applied.
std::vector<std::string> replay_transcript(const std::string& transcript, backend::LanguageModel& model,
                                           const vectors::VectorStore& store);

}  // namespace psteer::workbench
