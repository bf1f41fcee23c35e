#include "psteer/workbench/playground.hpp"

#include <sstream>

namespace psteer::workbench {

using nlohmann::json;

namespace {

template <typename F>
auto config_field(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

json prompt_json(const backend::ChatPrompt& p) { return {{"system", p.system}, {"user", p.user}, {"prefill", p.prefill}}; }

json decode_json(const backend::DecodeParams& d) {
    return {{"max_new_tokens", d.max_new_tokens}, {"temperature", d.temperature}, {"top_p", d.top_p},
            {"greedy", d.greedy}};
}

}  // namespace

json Segment::to_json() const {
    return {{"construct", construct}, {"direction", psteer::to_string(direction)},
            {"alpha", alpha},         {"layer", layer},
            {"token_budget", token_budget}, {"method", psteer::to_string(method)},
            {"stride", stride}};
}

Segment Segment::from_json(const json& j) {
    return config_field("segment", [&] {
        Segment s;
        s.construct = j.at("construct").get<std::string>();
        s.direction = direction_from_string(j.value("direction", "up"));
        s.alpha = j.at("alpha").get<double>();
        s.layer = j.at("layer").get<int>();
        s.token_budget = j.at("token_budget").get<int>();
        s.method = method_from_string(j.value("method", "MDS"));
        s.stride = j.value("stride", 1);
        return s;
    });
}

std::size_t SegmentSchedule::total_budget() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += static_cast<std::size_t>(std::max(s.token_budget, 0));
    return n;
}

std::vector<std::string> SegmentSchedule::problems(const vectors::VectorStore& store,
                                                   const backend::ModelHandle& model) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        const std::string where = "segment " + std::to_string(i) + ": ";
        if (s.token_budget <= 0) out.push_back(where + "token_budget must be positive");
        if (s.stride <= 0) out.push_back(where + "stride must be positive");
        if (s.layer < 0 || s.layer >= model.layer_count)
            out.push_back(where + "layer " + std::to_string(s.layer) + " outside the model");
        const auto* v = store.find(s.construct, s.method, s.layer, s.direction);
        if (!v) out.push_back(where + "unknown construct vector " + s.construct + "/" + psteer::to_string(s.method) +
                              "/" + std::to_string(s.layer) + "/" + psteer::to_string(s.direction));
        else if (v->components.size() != static_cast<Eigen::Index>(model.hidden_dim))
            out.push_back(where + "vector dimension does not match the model");
    }
    return out;
}

backend::Schedule SegmentSchedule::to_static(const vectors::VectorStore& store) const {
    backend::Schedule out;
    int start = 0;
    for (const auto& s : segments) {
        const auto* v = store.find(s.construct, s.method, s.layer, s.direction);
        if (!v) throw ContractViolation("unknown construct vector for " + s.construct);
        backend::InjectionDirective d{s.layer, v->id(), s.alpha, s.stride, std::pair(start, start + s.token_budget)};
        out.push_back({d, v->components});
        start += s.token_budget;
    }
    return out;
}

json SegmentSchedule::to_json() const {
    json out = json::array();
    for (const auto& s : segments) out.push_back(s.to_json());
    return out;
}

SegmentSchedule SegmentSchedule::from_json(const json& j) {
    const json& list = j.is_object() ? j.at("segments") : j;
    if (!list.is_array()) throw ConfigError("schedule must be an array of segments");
    SegmentSchedule s;
    for (const auto& e : list) s.segments.push_back(Segment::from_json(e));
    return s;
}

json Control::to_json() const {
    if (alpha) return {{"alpha", *alpha}};
    return {{"next_segment", true}};
}

Control Control::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("control must be a JSON object");
    const bool has_alpha = j.contains("alpha"), has_next = j.contains("next_segment");
    if (has_alpha == has_next) throw ConfigError("control needs exactly one of alpha or next_segment");
    Control c;
    if (has_alpha) {
        if (!j["alpha"].is_number()) throw ConfigError("alpha must be a number");
        c.alpha = j["alpha"].get<double>();
        if (!std::isfinite(*c.alpha)) throw ConfigError("alpha must be finite");
    } else {
        if (j["next_segment"] != true) throw ConfigError("next_segment must be true");
        c.next_segment = true;
    }
    return c;
}

json PlaygroundEvent::to_json() const {
    json j = {{"v", kEventSchema}, {"index", index}, {"type", type}};
    if (type == "token") {
        j["k"] = k;
        j["token"] = token;
        j["active_construct"] = construct ? json(*construct) : json(nullptr);
        j["direction"] = direction ? json(psteer::to_string(*direction)) : json(nullptr);
        j["alpha"] = alpha;
        j["segment"] = segment;
    } else if (type == "control") {
        j["k"] = k;
        j.update(control->to_json());
    } else if (type == "error") {
        j["message"] = message;
    } else if (type == "end") {
        j["reason"] = message;
        j["tokens"] = tokens;
    }
    return j;
}

PlaygroundEvent PlaygroundEvent::from_json(const json& j) {
    return config_field("event", [&] {
        PlaygroundEvent e;
        e.index = j.at("index").get<std::size_t>();
        e.type = j.at("type").get<std::string>();
        if (e.type == "token") {
            e.k = j.at("k").get<std::size_t>();
            e.token = j.at("token").get<std::string>();
            if (!j.at("active_construct").is_null()) e.construct = j["active_construct"].get<std::string>();
            if (!j.at("direction").is_null()) e.direction = direction_from_string(j["direction"].get<std::string>());
            e.alpha = j.at("alpha").get<double>();
            e.segment = j.at("segment").get<int>();
        } else if (e.type == "control") {
            e.k = j.at("k").get<std::size_t>();
            json c = j;
            for (const char* key : {"v", "index", "type", "k"}) c.erase(key);
            e.control = Control::from_json(c);
        } else if (e.type == "error") {
            e.message = j.at("message").get<std::string>();
        } else if (e.type == "end") {
            e.message = j.at("reason").get<std::string>();
            e.tokens = j.at("tokens").get<std::size_t>();
        } else {
            throw ConfigError("unknown event type '" + e.type + "'");
        }
        return e;
    });
}

json SessionRequest::to_json() const {
    return {{"prompt", prompt_json(prompt)}, {"schedule", schedule.to_json()}, {"decode", decode_json(decode)}};
}

SessionRequest SessionRequest::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("session request must be a JSON object");
    return config_field("session request", [&] {
        SessionRequest r;
        const auto& p = j.at("prompt");
        r.prompt.system = p.value("system", "");
        r.prompt.user = p.value("user", "");
        r.prompt.prefill = p.value("prefill", "");
        r.schedule = SegmentSchedule::from_json(j.value("schedule", json::array()));
        const auto d = j.value("decode", json::object());
        r.decode.max_new_tokens = d.value("max_new_tokens", 64);
        r.decode.temperature = d.value("temperature", 0.0);
        r.decode.top_p = d.value("top_p", 1.0);
        r.decode.greedy = d.value("greedy", true);
        if (r.decode.max_new_tokens <= 0) throw ConfigError("max_new_tokens must be positive");
        return r;
    });
}

// Segment bookkeeping shared by the generating thread and control callers.
class PlaygroundSession::Plan final : public backend::InjectionPlan {
public:
    struct State {
        int segment = -1;
        std::optional<std::string> construct;
        std::optional<Direction> direction;
        double alpha = 0.0;
    };
    using Applied = std::function<void(std::size_t k, const Control&)>;

    Plan(const SegmentSchedule& schedule, const vectors::VectorStore& store, bool live)
        : segments_(schedule.segments), live_(live) {
        for (const auto& s : segments_) {
            const auto* v = store.find(s.construct, s.method, s.layer, s.direction);
            components_.push_back(v ? &v->components : nullptr);
            refs_.push_back(v ? v->id() : std::string());
        }
        if (!live_) static_ = schedule.to_static(store);
    }

    void set_applied(Applied f) { applied_ = std::move(f); }
    bool live() const { return live_; }

    void injections_at(std::size_t k, std::vector<backend::Injection>& out) override {
        out.clear();
        std::vector<Control> now;
        {
            std::lock_guard lock(mutex_);
            auto [lo, hi] = scripted_.equal_range(k);
            for (auto it = lo; it != hi; ++it) now.push_back(it->second);
            now.insert(now.end(), pending_.begin(), pending_.end());
            pending_.clear();
            pending_next_ = 0;
            for (const auto& c : now) {
                if (index_ >= segments_.size()) continue;
                if (c.alpha) segments_[index_].alpha = *c.alpha;
                if (c.next_segment && index_ + 1 < segments_.size()) {
                    ++index_;
                    used_ = 0;
                }
            }
            if (index_ < segments_.size()) {
                const auto& s = segments_[index_];
                if (k % static_cast<std::size_t>(s.stride) == 0 && components_[index_])
                    out.push_back({s.layer, components_[index_], s.alpha, refs_[index_]});
            }
        }
        if (applied_)
            for (const auto& c : now) applied_(k, c);
    }

    const backend::Schedule* static_schedule() const override { return live_ ? nullptr : &static_; }

    State state() const {
        std::lock_guard lock(mutex_);
        State st;
        if (index_ < segments_.size()) {
            const auto& s = segments_[index_];
            st.segment = static_cast<int>(index_);
            st.construct = s.construct;
            st.direction = s.direction;
            st.alpha = s.alpha;
        }
        return st;
    }

    /// Counts one token against the active segment; false once the schedule is spent.
    bool after_token() {
        std::lock_guard lock(mutex_);
        if (segments_.empty()) return true;
        if (++used_ < static_cast<std::size_t>(segments_[index_].token_budget)) return true;
        if (index_ + 1 >= segments_.size()) {
            exhausted_ = true;
            return false;
        }
        ++index_;
        used_ = 0;
        return true;
    }

    bool exhausted() const {
        std::lock_guard lock(mutex_);
        return exhausted_;
    }

    void queue(const Control& c) {
        std::lock_guard lock(mutex_);
        if (!live_) throw ContractViolation("this backend does not take live control");
        if (segments_.empty()) throw ContractViolation("the schedule has no segments to control");
        if (c.next_segment) {
            if (index_ + pending_next_ + 1 >= segments_.size()) throw ContractViolation("no segment left to switch to");
            ++pending_next_;
        }
        pending_.push_back(c);
    }

    void script(std::multimap<std::size_t, Control> controls) {
        std::lock_guard lock(mutex_);
        scripted_ = std::move(controls);
    }

private:
    std::vector<Segment> segments_;
    std::vector<const Vector*> components_;
    std::vector<std::string> refs_;
    bool live_;
    backend::Schedule static_;
    Applied applied_;

    mutable std::mutex mutex_;
    std::size_t index_ = 0, used_ = 0, pending_next_ = 0;
    bool exhausted_ = false;
    std::vector<Control> pending_;
    std::multimap<std::size_t, Control> scripted_;
};

PlaygroundSession::PlaygroundSession(std::string id, backend::LanguageModel& model, const vectors::VectorStore& store,
                                     SessionRequest request)
    : id_(std::move(id)), model_(model), store_(store), request_(std::move(request)) {
    plan_ = std::make_unique<Plan>(request_.schedule, store_, model_.handle().capabilities.supports_live_control);
    plan_->set_applied([this](std::size_t k, const Control& c) {
        PlaygroundEvent e;
        e.type = "control";
        e.k = k;
        e.control = c;
        emit(std::move(e));
    });
}

PlaygroundSession::~PlaygroundSession() {
    if (worker_.joinable()) worker_.join();
}

void PlaygroundSession::emit(PlaygroundEvent e) {
    {
        std::lock_guard lock(mutex_);
        e.index = events_.size();
        events_.push_back(e);
        if (e.type == "end") finished_ = true;
    }
    changed_.notify_all();
    if (observer_) observer_(e);
}

void PlaygroundSession::start() {
    {
        std::lock_guard lock(mutex_);
        if (started_) throw ContractViolation("session " + id_ + " already started");
        started_ = true;
    }
    worker_ = std::thread([this] { run(); });
}

void PlaygroundSession::run() {
    {
        std::lock_guard lock(mutex_);
        if (finished_) throw ContractViolation("session " + id_ + " already ran");
        started_ = true;
    }
    auto end = [&](const std::string& reason, std::size_t tokens) {
        PlaygroundEvent e;
        e.type = "end";
        e.message = reason;
        e.tokens = tokens;
        emit(std::move(e));
    };
    auto error = [&](const std::string& message) {
        PlaygroundEvent e;
        e.type = "error";
        e.message = message;
        emit(std::move(e));
    };

    const auto problems = request_.schedule.problems(store_, model_.handle());
    if (!problems.empty()) {
        std::string joined;
        for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
        error(joined);
        end("error", 0);
        return;
    }

    backend::DecodeParams decode = request_.decode;
    decode.prefill = request_.prompt.prefill;
    if (!request_.schedule.segments.empty()) decode.max_new_tokens = static_cast<int>(request_.schedule.total_budget());

    std::size_t tokens = 0;
    auto sink = [&](const backend::TokenEvent& t) {
        const auto st = plan_->state();
        PlaygroundEvent e;
        e.type = "token";
        e.k = t.k;
        e.token = t.text;
        e.construct = st.construct;
        e.direction = st.direction;
        e.alpha = st.alpha;
        e.segment = st.segment;
        emit(std::move(e));
        ++tokens;
        return plan_->after_token();
    };
    try {
        model_.generate(request_.prompt, decode, *plan_, sink);
    } catch (const Error& e) {
        error(e.what());
        end("error", tokens);
        return;
    }
    if (plan_->exhausted()) end("budget", tokens);
    else end(tokens >= static_cast<std::size_t>(decode.max_new_tokens) ? "length" : "stop", tokens);
}

void PlaygroundSession::control(const Control& c) {
    if (finished()) throw ContractViolation("session " + id_ + " has ended");
    plan_->queue(c);
}

void PlaygroundSession::script_controls(std::multimap<std::size_t, Control> controls) {
    plan_->script(std::move(controls));
}

std::vector<PlaygroundEvent> PlaygroundSession::events(std::size_t from) const {
    std::lock_guard lock(mutex_);
    if (from >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
}

bool PlaygroundSession::wait(std::size_t from, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    return changed_.wait_for(lock, timeout, [&] { return events_.size() > from || finished_; });
}

bool PlaygroundSession::finished() const {
    std::lock_guard lock(mutex_);
    return finished_;
}

std::string PlaygroundSession::transcript() const {
    json header = {{"format", "psteer-transcript/1"},
                   {"schema", kEventSchema},
                   {"session", id_},
                   {"model_id", model_.handle().model_id},
                   {"request", request_.to_json()}};
    std::string out = header.dump() + "\n";
    for (const auto& e : events()) out += e.to_json().dump() + "\n";
    return out;
}

namespace {

std::pair<json, std::vector<PlaygroundEvent>> parse_transcript(const std::string& transcript) {
    std::istringstream in(transcript);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty transcript");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("transcript header: ") + e.what());
    }
    if (!header.is_object() || header.value("format", "") != "psteer-transcript/1")
        throw ConfigError("not a psteer transcript");
    std::vector<PlaygroundEvent> events;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            events.push_back(PlaygroundEvent::from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("transcript event: ") + e.what());
        }
    }
    return {header, events};
}

}  // namespace

std::vector<std::string> transcript_tokens(const std::string& transcript) {
    std::vector<std::string> out;
    for (const auto& e : parse_transcript(transcript).second)
        if (e.type == "token") out.push_back(e.token);
    return out;
}

std::vector<std::string> replay_transcript(const std::string& transcript, backend::LanguageModel& model,
                                           const vectors::VectorStore& store) {
    const auto [header, events] = parse_transcript(transcript);
    std::multimap<std::size_t, Control> controls;
    for (const auto& e : events)
        if (e.type == "control") controls.emplace(e.k, *e.control);
    PlaygroundSession session(header.value("session", "replay"), model, store,
                              SessionRequest::from_json(header.at("request")));
    session.script_controls(std::move(controls));
    session.run();
    std::vector<std::string> out;
    for (const auto& e : session.events())
        if (e.type == "token") out.push_back(e.token);
    return out;
}

}  // namespace psteer::workbench
