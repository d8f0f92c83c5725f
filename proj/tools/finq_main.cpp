// finq: single binary covering the offline pipeline (ingest), ad-hoc queries
// (query), and the HTTP service (serve). Exit codes: 0 success, 1 for
// usage/validation problems, 2 for runtime failures.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "finq/engine.hpp"
#include "finq/service.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

int exit_code_for(const finq::Error& error) {
    return finq::service::http_status_for(error) == 400 ? kExitUsage : kExitRuntime;
}

void print_error(const finq::Error& error) {
    std::cerr << "error (" << error.stage() << "/" << finq::to_string(error.code())
              << "): " << error.what() << "\n";
}

finq::engine::Engine make_engine(const std::string& config_path) {
    return finq::engine::Engine(finq::engine::load_engine_config(config_path));
}

int run_ingest(const std::string& config_path) {
    finq::engine::Engine engine = make_engine(config_path);
    engine.load_snapshot_if_present();
    const finq::engine::IngestReport report = engine.run_ingest();
    for (const auto& notice : report.notices) {
        std::cerr << "warning: source " << notice.source_id << ": selector '" << notice.selector
                  << "' matched no objects\n";
    }
    std::cout << "tasks=" << report.tasks << " fetched=" << report.fetched
              << " new=" << report.new_objects << " modified=" << report.modified
              << " unchanged=" << report.unchanged << " failed=" << report.failed
              << " chunks=" << report.chunks << " entities=" << report.entities
              << " indexed=" << report.indexed << "\n";
    return 0;
}

void render_text(const finq::retrieval::ResponsePayload& payload) {
    if (payload.results.empty()) {
        std::cout << "no results\n";
        return;
    }
    char score[32];
    for (const finq::SearchResult& result : payload.results) {
        std::snprintf(score, sizeof(score), "%.4f", result.fused_score);
        std::cout << result.rank << ". " << result.object_id << " (score " << score << ")\n";
        if (!result.snippet.empty()) {
            std::cout << "   " << result.snippet << "\n";
        }
        if (!result.entities.empty()) {
            std::cout << "   entities: ";
            for (std::size_t i = 0; i < result.entities.size(); ++i) {
                if (i > 0) {
                    std::cout << ", ";
                }
                std::cout << result.entities[i].surface << " ["
                          << finq::to_string(result.entities[i].entity_type) << "]";
            }
            std::cout << "\n";
        }
    }
}

int run_query(const std::string& config_path, const finq::retrieval::QueryRequest& request,
              const std::string& format) {
    finq::engine::Engine engine = make_engine(config_path);
    if (!engine.load_snapshot_if_present()) {
        finq::raise(finq::ErrorCode::SnapshotIOError, "query",
                    "no snapshot found; run `finq ingest` first");
    }
    const finq::retrieval::ResponsePayload payload = engine.query(request);
    if (format == "json") {
        std::cout << finq::service::payload_to_json(payload).dump() << "\n";
    } else {
        render_text(payload);
    }
    return 0;
}

int run_serve(const std::string& config_path, std::optional<int> port_override) {
    finq::engine::Engine engine = make_engine(config_path);
    engine.load_snapshot_if_present();
    const int port = port_override.value_or(engine.config().port);
    finq::service::Server server(engine);
    std::cerr << "listening on 0.0.0.0:" << port << "\n";
    if (!server.run("0.0.0.0", port)) {
        finq::raise(finq::ErrorCode::Internal, "serve",
                    "failed to bind to port " + std::to_string(port));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"financial knowledge search: ingest pipeline, query engine, HTTP service"};
    app.require_subcommand(1);

    std::string config_path;

    CLI::App* ingest = app.add_subcommand("ingest", "run the frontier->extract->enrich->index pipeline");
    ingest->add_option("--config", config_path, "engine config JSON")->required();

    std::string query_text;
    std::string mode_name;
    std::string fusion_name;
    std::string format = "text";
    int k = 0;
    double alpha = -1.0;
    bool no_rerank = false;
    CLI::App* query = app.add_subcommand("query", "run a query against the current snapshot");
    query->add_option("text", query_text, "query text")->required();
    query->add_option("--mode", mode_name, "keyword|semantic|hybrid|auto");
    query->add_option("--k", k, "number of results (1-100)");
    query->add_option("--alpha", alpha, "keyword weight for weighted fusion (0-1)");
    query->add_option("--fusion", fusion_name, "weighted|rrf");
    query->add_flag("--no-rerank", no_rerank, "skip the exact-similarity re-ranking stage");
    query->add_option("--format", format, "text|json")->check(CLI::IsMember({"text", "json"}));
    query->add_option("--config", config_path, "engine config JSON")->required();

    std::optional<int> port_override;
    int port = 0;
    CLI::App* serve = app.add_subcommand("serve", "serve /query, /documents and /health over HTTP");
    serve->add_option("--config", config_path, "engine config JSON")->required();
    CLI::Option* port_opt = serve->add_option("--port", port, "listen port (overrides config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (ingest->parsed()) {
            return run_ingest(config_path);
        }
        if (query->parsed()) {
            finq::retrieval::QueryRequest request;
            request.text = query_text;
            if (!mode_name.empty()) {
                const auto mode = finq::retrieval::parse_mode(mode_name);
                if (!mode) {
                    std::cerr << "error: unknown mode '" << mode_name << "'\n";
                    return kExitUsage;
                }
                request.mode = *mode;
            }
            if (query->count("--k") > 0) {
                request.k = k;
            }
            if (query->count("--alpha") > 0) {
                request.alpha = alpha;
            }
            if (!fusion_name.empty()) {
                const auto fusion = finq::retrieval::parse_fusion(fusion_name);
                if (!fusion) {
                    std::cerr << "error: unknown fusion method '" << fusion_name << "'\n";
                    return kExitUsage;
                }
                request.fusion = *fusion;
            }
            if (no_rerank) {
                request.rerank = false;
            }
            return run_query(config_path, request, format);
        }
        if (serve->parsed()) {
            if (port_opt->count() > 0) {
                port_override = port;
            }
            return run_serve(config_path, port_override);
        }
    } catch (const finq::Error& e) {
        print_error(e);
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
