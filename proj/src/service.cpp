#include "finq/service.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>

namespace finq::service {
namespace {

using nlohmann::json;

[[noreturn]] void bad_request(const std::string& message) {
    raise(ErrorCode::InvalidParameter, "validate", message);
}

void reject_unknown_keys(const json& body, std::initializer_list<std::string_view> known) {
    for (const auto& [key, value] : body.items()) {
        bool ok = false;
        for (const std::string_view k : known) {
            ok = ok || k == key;
        }
        if (!ok) {
            bad_request("unknown request field '" + key + "'");
        }
    }
}

std::string require_string(const json& body, const char* key) {
    if (!body.contains(key) || !body[key].is_string()) {
        bad_request(std::string("'") + key + "' must be a string");
    }
    return body[key].get<std::string>();
}

} // namespace

json payload_to_json(const retrieval::ResponsePayload& payload) {
    json results = json::array();
    for (const SearchResult& result : payload.results) {
        json entities = json::array();
        for (const EntityTag& entity : result.entities) {
            entities.push_back({{"surface", entity.surface},
                                {"type", std::string(to_string(entity.entity_type))},
                                {"begin", entity.begin},
                                {"end", entity.end}});
        }
        json row = {{"rank", result.rank},
                    {"object_id", result.object_id},
                    {"keyword_score", result.keyword_score},
                    {"semantic_score", result.semantic_score},
                    {"fused_score", result.fused_score},
                    {"snippet", result.snippet},
                    {"entities", std::move(entities)}};
        if (result.chunk_id.has_value()) {
            row["chunk_id"] = *result.chunk_id;
        } else {
            row["chunk_id"] = nullptr;
        }
        results.push_back(std::move(row));
    }
    return json{{"query", payload.query},
                {"resolved_mode", std::string(retrieval::to_string(payload.resolved_mode))},
                {"results", std::move(results)},
                {"timings_ms", payload.timings_ms},
                {"related_entities", payload.related_entities}};
}

json error_to_json(const Error& error) {
    return json{{"error",
                 {{"stage", error.stage()},
                  {"code", std::string(to_string(error.code()))},
                  {"message", error.what()}}}};
}

int http_status_for(const Error& error) {
    switch (error.code()) {
    case ErrorCode::EmptyQuery:
    case ErrorCode::QueryTooLong:
    case ErrorCode::InvalidParameter:
    case ErrorCode::EmptyBody:
    case ErrorCode::EmptyText:
    case ErrorCode::TokenLimitExceeded:
        return 400;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::ProviderBadResponse:
        return 503;
    default:
        return 500;
    }
}

retrieval::QueryRequest parse_query_request(const json& body) {
    if (!body.is_object()) {
        bad_request("request body must be a JSON object");
    }
    reject_unknown_keys(body, {"text", "mode", "k", "alpha", "fusion", "rerank"});

    retrieval::QueryRequest request;
    request.text = require_string(body, "text");
    if (body.contains("mode")) {
        const auto mode = retrieval::parse_mode(require_string(body, "mode"));
        if (!mode) {
            bad_request("mode must be keyword, semantic, hybrid, or auto");
        }
        request.mode = *mode;
    }
    if (body.contains("k")) {
        if (!body["k"].is_number_integer()) {
            bad_request("'k' must be an integer");
        }
        request.k = body["k"].get<int>();
    }
    if (body.contains("alpha")) {
        if (!body["alpha"].is_number()) {
            bad_request("'alpha' must be a number");
        }
        request.alpha = body["alpha"].get<double>();
    }
    if (body.contains("fusion")) {
        const auto fusion = retrieval::parse_fusion(require_string(body, "fusion"));
        if (!fusion) {
            bad_request("fusion must be weighted or rrf");
        }
        request.fusion = *fusion;
    }
    if (body.contains("rerank")) {
        if (!body["rerank"].is_boolean()) {
            bad_request("'rerank' must be a boolean");
        }
        request.rerank = body["rerank"].get<bool>();
    }
    return request;
}

KnowledgeObject parse_document_request(const json& body) {
    if (!body.is_object()) {
        bad_request("request body must be a JSON object");
    }
    reject_unknown_keys(body, {"object_id", "title", "body", "category", "metadata"});

    KnowledgeObject object;
    object.object_id = require_string(body, "object_id");
    object.title = strip_control_chars(require_string(body, "title"));
    object.body = strip_control_chars(require_string(body, "body"));
    object.timestamp = 0; // fixed so identical re-posts hash identically
    if (body.contains("category")) {
        const auto category = parse_category(require_string(body, "category"));
        if (!category) {
            bad_request("unknown category '" + body["category"].get<std::string>() + "'");
        }
        object.category = *category;
    }
    if (body.contains("metadata")) {
        if (!body["metadata"].is_object()) {
            bad_request("'metadata' must be an object");
        }
        for (const auto& [key, value] : body["metadata"].items()) {
            if (!value.is_string()) {
                bad_request("metadata values must be strings");
            }
            object.metadata[strip_control_chars(key)] =
                strip_control_chars(value.get<std::string>());
        }
    }
    return object;
}

struct Server::Impl {
    explicit Impl(engine::Engine& eng) : engine(eng) { install_routes(); }

    void install_routes() {
        server.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                const json body = json::parse(req.body, nullptr, false);
                if (body.is_discarded()) {
                    bad_request("request body is not valid JSON");
                }
                const auto payload = engine.query(parse_query_request(body));
                res.set_content(payload_to_json(payload).dump(), "application/json");
            });
        });

        server.Post("/documents", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                const json body = json::parse(req.body, nullptr, false);
                if (body.is_discarded()) {
                    bad_request("request body is not valid JSON");
                }
                const KnowledgeObject object = parse_document_request(body);
                const ChangeStatus status = engine.ingest_document(object);
                if (status != ChangeStatus::Unchanged) {
                    engine.save_snapshot();
                }
                res.set_content(
                    json{{"object_id", object.object_id},
                         {"status", std::string(to_string(status))}}
                        .dump(),
                    "application/json");
            });
        });

        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            handle(res, [&] {
                res.set_content(json{{"status", "ok"},
                                     {"indexed_docs", engine.indexed_docs()},
                                     {"snapshot_version", engine.snapshot_version()}}
                                    .dump(),
                                "application/json");
            });
        });
    }

    template <typename Fn>
    void handle(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            res.status = http_status_for(e);
            res.set_content(error_to_json(e).dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            const Error internal(ErrorCode::Internal, "service", e.what());
            res.set_content(error_to_json(internal).dump(), "application/json");
        }
    }

    engine::Engine& engine;
    httplib::Server server;
    std::thread listener;
};

Server::Server(engine::Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}

Server::~Server() {
    stop();
}

bool Server::start(const std::string& host, int port) {
    if (!impl_->server.bind_to_port(host, port)) {
        return false;
    }
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return true;
}

bool Server::run(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

void Server::stop() {
    if (!impl_) {
        return;
    }
    if (impl_->server.is_running()) {
        impl_->server.stop();
    }
    if (impl_->listener.joinable()) {
        impl_->listener.join();
    }
}

} // namespace finq::service
