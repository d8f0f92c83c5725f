#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "finq/engine.hpp"
#include "finq/errors.hpp"
#include "finq/retrieval.hpp"

namespace finq::service {

/// ResponsePayload as wire/CLI JSON. Key order is alphabetical (nlohmann
/// object semantics), so identical payloads dump to identical bytes.
nlohmann::json payload_to_json(const retrieval::ResponsePayload& payload);

/// {"error": {"stage", "code", "message"}}.
nlohmann::json error_to_json(const Error& error);

/// 400 for request-data problems, 503 for provider failures, 500 otherwise.
int http_status_for(const Error& error);

/// Parses a POST /query body (strict keys: text, mode, k, alpha, fusion,
/// rerank). Throws InvalidParameter on anything off-contract.
retrieval::QueryRequest parse_query_request(const nlohmann::json& body);

/// Parses a POST /documents body (strict keys: object_id, title, body,
/// category, metadata). Timestamp is intentionally not accepted: it defaults
/// to epoch so re-posting identical content stays Unchanged.
KnowledgeObject parse_document_request(const nlohmann::json& body);

/// HTTP front end over an Engine: POST /query, POST /documents, GET /health.
class Server {
public:
    explicit Server(engine::Engine& engine);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and serves on a background thread; returns false when the port
    /// cannot be bound. wait_ready blocks until the listener is accepting.
    bool start(const std::string& host, int port);

    /// Serves on the calling thread (CLI `serve` path); returns on stop().
    bool run(const std::string& host, int port);

    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace finq::service
