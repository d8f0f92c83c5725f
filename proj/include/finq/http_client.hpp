#pragma once

#include <map>
#include <string>
#include <utility>

namespace finq::http {

/// Transport-level outcome of one HTTP exchange. `status == 0` with a
/// non-empty `error` means the request never produced an HTTP response
/// (connect/read failure); callers map that to their own transient error.
struct Response {
    int status = 0;
    std::string body;
    std::string error;
    std::map<std::string, std::string> headers; // header names lower-cased
    bool transport_ok() const { return error.empty(); }
};

Response get(const std::string& url, const std::string& bearer_token = {},
             int timeout_ms = 10000);
Response post_json(const std::string& url, const std::string& json_body, int timeout_ms = 30000);

/// "http://host:8080/a/b?q" -> {"http://host:8080", "/a/b?q"}.
/// The path half is "/" when the URL has none. Empty prefix on a URL with no
/// scheme or host.
std::pair<std::string, std::string> split_url(const std::string& url);

} // namespace finq::http
