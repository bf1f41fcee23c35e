#include "psteer/workbench/server.hpp"

#include "httplib.h"

#include <fstream>

namespace psteer::workbench {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) { reply(res, status, {{"error", message}}); }

std::string sse_frame(const PlaygroundEvent& e) {
    return "id: " + std::to_string(e.index) + "\nevent: " + e.type + "\ndata: " + e.to_json().dump() + "\n\n";
}

}  // namespace

struct PlaygroundServer::Impl {
    backend::LanguageModel& model;
    const vectors::VectorStore& store;
    ServerOptions options;
    httplib::Server http;
    std::thread listener;

    std::mutex mutex;
    std::map<std::string, std::unique_ptr<PlaygroundSession>> sessions;
    std::size_t next_id = 1;

    Impl(backend::LanguageModel& m, const vectors::VectorStore& s, ServerOptions o)
        : model(m), store(s), options(std::move(o)) {}

    PlaygroundSession* find(const std::string& id) {
        std::lock_guard lock(mutex);
        auto it = sessions.find(id);
        return it == sessions.end() ? nullptr : it->second.get();
    }

    void persist(const PlaygroundSession& s) {
        if (!options.transcript_dir) return;
        std::filesystem::create_directories(*options.transcript_dir);
        std::ofstream(*options.transcript_dir / (s.id() + ".jsonl"), std::ios::binary) << s.transcript();
    }

    void routes(const json& inventory) {
        http.Get("/constructs", [inventory](const httplib::Request&, httplib::Response& res) {
            reply(res, 200, inventory);
        });

        http.Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
            SessionRequest request;
            try {
                request = SessionRequest::from_json(json::parse(req.body));
            } catch (const json::parse_error& e) {
                return fail(res, 400, std::string("malformed JSON: ") + e.what());
            } catch (const ConfigError& e) {
                return fail(res, 400, e.what());
            }
            PlaygroundSession* session;
            {
                std::lock_guard lock(mutex);
                const std::string id = "session-" + std::to_string(next_id++);
                auto owned = std::make_unique<PlaygroundSession>(id, model, store, std::move(request));
                session = owned.get();
                sessions.emplace(id, std::move(owned));
            }
            session->on_event([this, session](const PlaygroundEvent& e) {
                if (e.type == "end") persist(*session);
            });
            session->start();
            reply(res, 201, {{"session", session->id()}, {"stream", "/session/" + session->id() + "/stream"}});
        });

        http.Get(R"(/session/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
            auto* session = find(req.matches[1]);
            if (!session) return fail(res, 404, "unknown session");
            std::size_t from = 0;
            try {
                if (req.has_header("Last-Event-ID")) from = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
                else if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
            } catch (const std::exception&) {
                return fail(res, 400, "bad resume position");
            }
            auto next = std::make_shared<std::size_t>(from);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("text/event-stream", [session, next](std::size_t, httplib::DataSink& sink) {
                session->wait(*next, std::chrono::milliseconds(250));
                for (const auto& e : session->events(*next)) {
                    const std::string frame = sse_frame(e);
                    if (!sink.write(frame.data(), frame.size())) return false;
                    *next = e.index + 1;
                }
                if (session->finished() && session->events(*next).empty()) sink.done();
                return true;
            });
        });

        http.Post(R"(/session/([^/]+)/control)", [this](const httplib::Request& req, httplib::Response& res) {
            auto* session = find(req.matches[1]);
            if (!session) return fail(res, 404, "unknown session");
            Control control;
            try {
                control = Control::from_json(json::parse(req.body));
            } catch (const json::parse_error& e) {
                return fail(res, 400, std::string("malformed JSON: ") + e.what());
            } catch (const ConfigError& e) {
                return fail(res, 400, e.what());
            }
            try {
                session->control(control);
            } catch (const ContractViolation& e) {
                return fail(res, 409, e.what());
            }
            reply(res, 200, {{"accepted", control.to_json()}});
        });

        http.Get(R"(/session/([^/]+)/transcript)", [this](const httplib::Request& req, httplib::Response& res) {
            auto* session = find(req.matches[1]);
            if (!session) return fail(res, 404, "unknown session");
            res.set_content(session->transcript(), "application/x-ndjson");
        });
    }
};

PlaygroundServer::PlaygroundServer(backend::LanguageModel& model, const vectors::VectorStore& store,
                                   ServerOptions options)
    : impl_(std::make_unique<Impl>(model, store, std::move(options))) {
    impl_->routes(inventory());
}

PlaygroundServer::~PlaygroundServer() {
    stop();
    std::lock_guard lock(impl_->mutex);
    impl_->sessions.clear();
}

json PlaygroundServer::inventory() const {
    const auto& h = impl_->model.handle();
    json vectors = json::array();
    for (const auto* v : impl_->store.all())
        vectors.push_back({{"id", v->id()},
                           {"construct", v->construct},
                           {"method", psteer::to_string(v->method)},
                           {"layer", v->layer},
                           {"direction", psteer::to_string(v->direction)},
                           {"norm", v->norm_model_units}});
    return {{"schema", kEventSchema},
            {"model_id", h.model_id},
            {"layer_count", h.layer_count},
            {"live_control", h.capabilities.supports_live_control},
            {"constructs", impl_->store.constructs()},
            {"vectors", vectors}};
}

int PlaygroundServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw TransportError("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void PlaygroundServer::serve() { impl_->http.listen_after_bind(); }

int PlaygroundServer::start(const std::string& host, int port) {
    const int bound = bind(host, port);
    impl_->listener = std::thread([this] { serve(); });
    impl_->http.wait_until_ready();
    return bound;
}

void PlaygroundServer::stop() {
    impl_->http.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
}

}  // namespace psteer::workbench
