#include "psteer/net.hpp"

#include "psteer/core.hpp"

#include "httplib.h"

namespace psteer::net {

namespace {

struct Target {
    std::string origin;  // scheme://host:port
    std::string path;
};

Target split(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("not an http url: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

nlohmann::json handle(const httplib::Result& res, const std::string& url) {
    if (!res) throw TransportError("request to " + url + " failed: " + httplib::to_string(res.error()));
    if (res->status >= 500) throw TransportError("HTTP " + std::to_string(res->status) + " from " + url);
    if (res->status >= 400)
        throw ContractViolation("HTTP " + std::to_string(res->status) + " from " + url + ": " + res->body);
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw TransportError("malformed JSON from " + url + ": " + e.what());
    }
}

}  // namespace

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds) {
    const auto t = split(url);
    httplib::Client client(t.origin);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_write_timeout(timeout_seconds, 0);
    return handle(client.Post(t.path, body.dump(), "application/json"), url);
}

nlohmann::json get_json(const std::string& url, int timeout_seconds) {
    const auto t = split(url);
    httplib::Client client(t.origin);
    client.set_read_timeout(timeout_seconds, 0);
    return handle(client.Get(t.path), url);
}

}  // namespace psteer::net
