#pragma once

// Playground HTTP service.
//
//   GET  /constructs               vector inventory and event schema version
//   POST /session                  SessionRequest JSON -> 201 {"session": id}
//   GET  /session/{id}/stream      server-sent events; "id:" is the event index,
//                                  "event:" its type, "data:" the event JSON.
//                                  Resumes after Last-Event-ID, or from ?from=n.
//   POST /session/{id}/control     {"alpha": x} or {"next_segment": true}
//   GET  /session/{id}/transcript  JSONL transcript
//
// Errors are {"error": message} with 400 (malformed body), 404 (unknown
// session) or 409 (control cannot apply). Sessions run concurrently and
// share the model, whose generation calls serialize.

#include "psteer/workbench/playground.hpp"

#include <filesystem>
#include <memory>

namespace psteer::workbench {

struct ServerOptions {
    /// Finished transcripts are written here as <session>.jsonl when set.
    std::optional<std::filesystem::path> transcript_dir;
};

class PlaygroundServer {
public:
    PlaygroundServer(backend::LanguageModel& model, const vectors::VectorStore& store, ServerOptions options = {});
    ~PlaygroundServer();
    PlaygroundServer(const PlaygroundServer&) = delete;
    PlaygroundServer& operator=(const PlaygroundServer&) = delete;

    /// Binds and returns the port; port 0 picks a free one.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void serve();
    /// Binds, then serves on a background thread.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();

    nlohmann::json inventory() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace psteer::workbench
