#include "finq/http_client.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>

namespace finq::http {
namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

Response from_result(const httplib::Result& result) {
    Response out;
    if (!result) {
        out.error = httplib::to_string(result.error());
        return out;
    }
    out.status = result->status;
    out.body = result->body;
    for (const auto& [name, value] : result->headers) {
        out.headers[lower(name)] = value;
    }
    return out;
}

httplib::Client make_client(const std::string& prefix, int timeout_ms) {
    httplib::Client client(prefix);
    client.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_follow_location(true);
    return client;
}

} // namespace

std::pair<std::string, std::string> split_url(const std::string& url) {
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        return {"", url};
    }
    const std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    if (path_start == scheme_end + 3) {
        return {"", url}; // "http:///path" — no host
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

Response get(const std::string& url, const std::string& bearer_token, int timeout_ms) {
    const auto [prefix, path] = split_url(url);
    if (prefix.empty()) {
        Response out;
        out.error = "malformed URL: " + url;
        return out;
    }
    httplib::Client client = make_client(prefix, timeout_ms);
    if (!bearer_token.empty()) {
        client.set_bearer_token_auth(bearer_token);
    }
    return from_result(client.Get(path));
}

Response post_json(const std::string& url, const std::string& json_body, int timeout_ms) {
    const auto [prefix, path] = split_url(url);
    if (prefix.empty()) {
        Response out;
        out.error = "malformed URL: " + url;
        return out;
    }
    httplib::Client client = make_client(prefix, timeout_ms);
    return from_result(client.Post(path, json_body, "application/json"));
}

} // namespace finq::http
