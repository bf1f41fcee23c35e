#pragma once

// Blocking JSON-over-HTTP helpers shared by remote backends and service clients.

#include "json.hpp"

#include <string>

namespace psteer::net {

/// POSTs `body` to `url`; throws TransportError on connection failures and
/// 5xx, ContractViolation on 4xx.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds = 120);

nlohmann::json get_json(const std::string& url, int timeout_seconds = 30);

}  // namespace psteer::net
