#include "finq/frontier.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fnmatch.h>

#include <json.hpp>

#include "finq/errors.hpp"
#include "finq/http_client.hpp"

namespace finq::frontier {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
    raise(ErrorCode::InvalidConfig, "frontier", field + ": " + why);
}

void reject_unknown_keys(const json& object, std::initializer_list<std::string_view> known,
                         const std::string& where) {
    for (const auto& [key, value] : object.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            raise(ErrorCode::MalformedConfig, "frontier",
                  "unknown key '" + key + "' in " + where);
        }
    }
}

std::map<std::string, std::string> string_map(const json& object, const std::string& field) {
    if (!object.is_object()) {
        raise(ErrorCode::MalformedConfig, "frontier", field + " must be an object");
    }
    std::map<std::string, std::string> out;
    for (const auto& [key, value] : object.items()) {
        if (!value.is_string()) {
            raise(ErrorCode::MalformedConfig, "frontier",
                  field + "." + key + " must be a string");
        }
        out[key] = value.get<std::string>();
    }
    return out;
}

bool endpoint_scheme_ok(const std::string& endpoint) {
    const std::size_t scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        return true; // bare path = file
    }
    const std::string scheme = endpoint.substr(0, scheme_end);
    return scheme == "file" || scheme == "http" || scheme == "https";
}

bool is_http_endpoint(const std::string& endpoint) {
    return endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0;
}

std::string file_root(const std::string& endpoint) {
    constexpr std::string_view kFileScheme = "file://";
    if (endpoint.rfind(kFileScheme, 0) == 0) {
        return endpoint.substr(kFileScheme.size());
    }
    return endpoint;
}

bool is_glob(const std::string& selector) {
    return selector.find_first_of("*?[") != std::string::npos;
}

SourceConfig parse_source(const json& node, std::size_t index) {
    const std::string where = "sources[" + std::to_string(index) + "]";
    if (!node.is_object()) {
        raise(ErrorCode::MalformedConfig, "frontier", where + " must be an object");
    }
    reject_unknown_keys(
        node, {"source_id", "endpoint", "auth_env", "selectors", "mapping", "extra_metadata"},
        where);

    SourceConfig source;
    if (!node.contains("source_id") || !node["source_id"].is_string()) {
        raise(ErrorCode::MalformedConfig, "frontier", where + ".source_id must be a string");
    }
    source.source_id = node["source_id"].get<std::string>();
    if (source.source_id.empty()) {
        invalid(where + ".source_id", "must be non-empty");
    }

    if (!node.contains("endpoint") || !node["endpoint"].is_string()) {
        raise(ErrorCode::MalformedConfig, "frontier", where + ".endpoint must be a string");
    }
    source.endpoint = node["endpoint"].get<std::string>();
    if (!endpoint_scheme_ok(source.endpoint)) {
        invalid(where + ".endpoint", "scheme must be file, http, or https: " + source.endpoint);
    }

    if (node.contains("auth_env")) {
        if (!node["auth_env"].is_string() || node["auth_env"].get<std::string>().empty()) {
            invalid(where + ".auth_env", "must be a non-empty environment variable name");
        }
        source.auth_env = node["auth_env"].get<std::string>();
    }

    if (!node.contains("selectors") || !node["selectors"].is_array()) {
        raise(ErrorCode::MalformedConfig, "frontier", where + ".selectors must be an array");
    }
    for (const auto& selector : node["selectors"]) {
        if (!selector.is_string() || selector.get<std::string>().empty()) {
            raise(ErrorCode::MalformedConfig, "frontier",
                  where + ".selectors entries must be non-empty strings");
        }
        source.selectors.push_back(selector.get<std::string>());
    }

    if (node.contains("mapping")) {
        source.mapping = string_map(node["mapping"], where + ".mapping");
        for (const auto& [from, to] : source.mapping) {
            if (!is_canonical_field(to)) {
                invalid(where + ".mapping", "'" + from + "' targets unknown canonical field '" +
                                                to + "'");
            }
        }
    }
    if (node.contains("extra_metadata")) {
        source.extra_metadata = string_map(node["extra_metadata"], where + ".extra_metadata");
    }
    return source;
}

} // namespace

FrontierConfig parse_frontier_config(const std::string& json_text, const std::string& origin) {
    json document;
    try {
        document = json::parse(json_text);
    } catch (const json::parse_error& e) {
        raise(ErrorCode::MalformedConfig, "frontier", origin + ": " + e.what());
    }
    if (!document.is_object()) {
        raise(ErrorCode::MalformedConfig, "frontier", origin + ": top level must be an object");
    }
    reject_unknown_keys(document, {"schedule_seconds", "max_retries", "sources"}, origin);

    FrontierConfig config;
    if (document.contains("schedule_seconds")) {
        if (!document["schedule_seconds"].is_number_integer()) {
            raise(ErrorCode::MalformedConfig, "frontier",
                  origin + ": schedule_seconds must be an integer");
        }
        config.schedule_seconds = document["schedule_seconds"].get<int>();
        if (*config.schedule_seconds < 1) {
            invalid("schedule_seconds", "must be >= 1");
        }
    }
    if (document.contains("max_retries")) {
        if (!document["max_retries"].is_number_integer()) {
            raise(ErrorCode::MalformedConfig, "frontier",
                  origin + ": max_retries must be an integer");
        }
        config.max_retries = document["max_retries"].get<int>();
        if (config.max_retries < 0) {
            invalid("max_retries", "must be >= 0");
        }
    }
    if (!document.contains("sources") || !document["sources"].is_array()) {
        raise(ErrorCode::MalformedConfig, "frontier", origin + ": sources must be an array");
    }
    std::set<std::string> seen_ids;
    for (std::size_t i = 0; i < document["sources"].size(); ++i) {
        SourceConfig source = parse_source(document["sources"][i], i);
        if (!seen_ids.insert(source.source_id).second) {
            invalid("source_id", "duplicate '" + source.source_id + "'");
        }
        config.sources.push_back(std::move(source));
    }
    if (config.sources.empty()) {
        invalid("sources", "at least one source is required");
    }
    return config;
}

FrontierConfig load_frontier_config(const std::string& location) {
    std::string bytes;
    if (is_http_endpoint(location)) {
        const http::Response response = http::get(location);
        if (!response.transport_ok()) {
            raise(ErrorCode::UnreadableLocation, "frontier",
                  location + ": " + response.error);
        }
        if (response.status != 200) {
            raise(ErrorCode::UnreadableLocation, "frontier",
                  location + ": HTTP " + std::to_string(response.status));
        }
        bytes = response.body;
    } else {
        std::ifstream file(file_root(location), std::ios::binary);
        if (!file) {
            raise(ErrorCode::UnreadableLocation, "frontier", "cannot open " + location);
        }
        std::ostringstream buffer;
        buffer << file.rdbuf();
        if (file.bad()) {
            raise(ErrorCode::UnreadableLocation, "frontier", "read failed on " + location);
        }
        bytes = std::move(buffer).str();
    }
    return parse_frontier_config(bytes, location);
}

TaskPlan build_fetch_tasks(const FrontierConfig& config) {
    namespace fs = std::filesystem;
    TaskPlan plan;
    for (const SourceConfig& source : config.sources) {
        std::set<std::string> refs; // dedup + lexicographic within the source
        for (const std::string& selector : source.selectors) {
            if (is_http_endpoint(source.endpoint)) {
                refs.insert(selector); // remote refs cannot be enumerated here
                continue;
            }
            if (!is_glob(selector)) {
                std::error_code ec;
                const fs::path target = fs::path(file_root(source.endpoint)) / selector;
                if (fs::is_regular_file(target, ec)) {
                    refs.insert(selector);
                } else {
                    plan.notices.push_back({source.source_id, selector});
                }
                continue;
            }
            // Glob over the file tree rooted at the endpoint; refs are
            // endpoint-relative with '/' separators.
            const fs::path root(file_root(source.endpoint));
            std::size_t matched = 0;
            std::error_code ec;
            for (fs::recursive_directory_iterator it(root, ec), end; !ec && it != end;
                 it.increment(ec)) {
                if (!it->is_regular_file(ec)) {
                    continue;
                }
                const std::string rel = fs::relative(it->path(), root, ec).generic_string();
                if (ec) {
                    continue;
                }
                if (::fnmatch(selector.c_str(), rel.c_str(), FNM_PATHNAME) == 0) {
                    refs.insert(rel);
                    ++matched;
                }
            }
            if (matched == 0) {
                plan.notices.push_back({source.source_id, selector});
            }
        }
        for (const std::string& ref : refs) {
            FetchTask task;
            task.task_id = source.source_id + "/" + ref;
            task.source_id = source.source_id;
            task.object_ref = ref;
            task.mapping = source.mapping;
            task.extra_metadata = source.extra_metadata;
            task.endpoint = source.endpoint;
            task.auth_env = source.auth_env;
            task.attempt = 0;
            plan.tasks.push_back(std::move(task));
        }
    }
    return plan;
}

std::size_t enqueue_tasks(std::vector<FetchTask> tasks, BoundedQueue<Envelope<FetchTask>>& queue) {
    std::size_t count = 0;
    for (FetchTask& task : tasks) {
        Envelope<FetchTask> envelope;
        envelope.seq = count;
        envelope.payload = std::move(task);
        queue.push(std::move(envelope));
        ++count;
    }
    return count;
}

} // namespace finq::frontier
