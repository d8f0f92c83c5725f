#include "finq/extract.hpp"

#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <sys/stat.h>

#include <json.hpp>
#include <openssl/evp.h>

#include "finq/errors.hpp"
#include "finq/http_client.hpp"
#include "finq/text.hpp"

namespace finq::extract {
namespace {

constexpr std::string_view kFileScheme = "file://";

bool is_http_endpoint(const std::string& endpoint) {
    return endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0;
}

std::string file_root(const std::string& endpoint) {
    if (endpoint.rfind(kFileScheme, 0) == 0) {
        return endpoint.substr(kFileScheme.size());
    }
    return endpoint;
}

/// RFC 7231 IMF-fixdate, e.g. "Tue, 15 Nov 1994 12:45:26 GMT".
std::optional<UnixSeconds> parse_http_date(const std::string& value) {
    std::tm tm{};
    if (::strptime(value.c_str(), "%a, %d %b %Y %H:%M:%S", &tm) == nullptr) {
        return std::nullopt;
    }
    return static_cast<UnixSeconds>(::timegm(&tm));
}

struct RawPayload {
    std::string bytes;
    std::optional<UnixSeconds> source_mtime;
};

RawPayload fetch_file(const FetchTask& task) {
    namespace fs = std::filesystem;
    const fs::path path = fs::path(file_root(task.endpoint)) / task.object_ref;

    std::error_code ec;
    const auto status = fs::status(path, ec);
    if (ec || !fs::exists(status)) {
        raise(ErrorCode::ObjectNotFound, "extract", "no such file: " + path.string());
    }
    if (!fs::is_regular_file(status)) {
        raise(ErrorCode::ObjectNotFound, "extract", "not a regular file: " + path.string());
    }
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        raise(ErrorCode::SourceUnavailable, "extract", "cannot open " + path.string());
    }
    RawPayload payload;
    std::ostringstream buffer;
    buffer << file.rdbuf();
    if (file.bad()) {
        raise(ErrorCode::SourceUnavailable, "extract", "read failed on " + path.string());
    }
    payload.bytes = std::move(buffer).str();

    struct ::stat st{};
    if (::stat(path.c_str(), &st) == 0) {
        payload.source_mtime = static_cast<UnixSeconds>(st.st_mtime);
    }
    return payload;
}

RawPayload fetch_http(const FetchTask& task) {
    std::string url = task.endpoint;
    if (!url.empty() && url.back() != '/') {
        url += '/';
    }
    url += task.object_ref;

    std::string bearer;
    if (task.auth_env.has_value()) {
        if (const char* value = std::getenv(task.auth_env->c_str())) {
            bearer = value;
        }
    }

    const http::Response response = http::get(url, bearer);
    if (!response.transport_ok()) {
        raise(ErrorCode::SourceUnavailable, "extract", url + ": " + response.error);
    }
    if (response.status == 429 || response.status >= 500) {
        raise(ErrorCode::SourceUnavailable, "extract",
              url + ": HTTP " + std::to_string(response.status));
    }
    if (response.status != 200) {
        // All remaining non-200s (404 first among them) are permanent for a
        // given task; retrying cannot help.
        raise(ErrorCode::ObjectNotFound, "extract",
              url + ": HTTP " + std::to_string(response.status));
    }
    RawPayload payload;
    payload.bytes = response.body;
    if (const auto it = response.headers.find("last-modified"); it != response.headers.end()) {
        payload.source_mtime = parse_http_date(it->second);
    }
    return payload;
}

[[noreturn]] void mapping_fail(const FetchTask& task, const std::string& what) {
    raise(ErrorCode::MappingError, "extract",
          task.source_id + "/" + task.object_ref + ": " + what);
}

std::string json_as_string(const nlohmann::json& value) {
    if (value.is_string()) {
        return value.get<std::string>();
    }
    return value.dump();
}

void assign_canonical(KnowledgeObject& object, const FetchTask& task,
                      const std::string& canonical, const nlohmann::json& value) {
    if (canonical == "body") {
        object.body = strip_control_chars(json_as_string(value));
    } else if (canonical == "title") {
        object.title = strip_control_chars(json_as_string(value));
    } else if (canonical == "category") {
        const auto category = parse_category(json_as_string(value));
        if (!category) {
            mapping_fail(task, "unknown category '" + json_as_string(value) + "'");
        }
        object.category = *category;
    } else if (canonical == "timestamp") {
        if (value.is_number_integer()) {
            object.timestamp = value.get<std::int64_t>();
        } else if (const auto t = parse_iso8601(json_as_string(value))) {
            object.timestamp = *t;
        } else {
            mapping_fail(task, "unparseable timestamp '" + json_as_string(value) + "'");
        }
    } else if (canonical == "id") {
        // Object identity here is always source_id/object_ref; the source's
        // own identifier is preserved as metadata.
        object.metadata["id"] = strip_control_chars(json_as_string(value));
    } else {
        mapping_fail(task, "mapping targets unknown canonical field '" + canonical + "'");
    }
}

} // namespace

Digest sha256(std::string_view bytes) {
    Digest digest{};
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest.data(), &len) != 1 || len != digest.size()) {
        EVP_MD_CTX_free(ctx);
        raise(ErrorCode::Internal, "extract", "SHA-256 computation failed");
    }
    EVP_MD_CTX_free(ctx);
    return digest;
}

Digest compute_hash(const KnowledgeObject& object) {
    return sha256(canonicalize(object));
}

KnowledgeObject fetch_object(const FetchTask& task) {
    RawPayload payload;
    if (is_http_endpoint(task.endpoint)) {
        payload = fetch_http(task);
    } else if (task.endpoint.rfind(kFileScheme, 0) == 0 ||
               task.endpoint.find("://") == std::string::npos) {
        payload = fetch_file(task);
    } else {
        raise(ErrorCode::InvalidParameter, "extract",
              "unsupported endpoint scheme: " + task.endpoint);
    }

    KnowledgeObject object;
    object.object_id = task.source_id + "/" + task.object_ref;
    object.title = task.object_ref;
    object.category = Category::document;
    object.timestamp = payload.source_mtime.value_or(0);
    for (const auto& [key, value] : task.extra_metadata) {
        object.metadata[strip_control_chars(key)] = strip_control_chars(value);
    }

    nlohmann::json parsed = nlohmann::json::parse(payload.bytes, nullptr, false);
    if (!parsed.is_object()) {
        // Raw text payload: the whole thing is the body. Field mappings only
        // make sense for structured payloads.
        if (!task.mapping.empty()) {
            mapping_fail(task, "field mapping given but payload is not a JSON object");
        }
        object.body = strip_control_chars(payload.bytes);
        return object;
    }

    std::set<std::string> consumed;
    for (const auto& [source_field, canonical] : task.mapping) {
        const auto it = parsed.find(source_field);
        if (it == parsed.end()) {
            mapping_fail(task, "source document lacks mapped field '" + source_field + "'");
        }
        assign_canonical(object, task, canonical, *it);
        consumed.insert(source_field);
    }
    for (const auto& [key, value] : parsed.items()) {
        if (consumed.contains(key)) {
            continue;
        }
        if (is_canonical_field(key)) {
            // Canonically named source fields are implicitly identity-mapped
            // unless a mapping already claimed the slot.
            bool slot_taken = false;
            for (const auto& [src, canonical] : task.mapping) {
                slot_taken = slot_taken || canonical == key;
            }
            if (!slot_taken) {
                assign_canonical(object, task, key, value);
                continue;
            }
        }
        object.metadata[strip_control_chars(key)] = strip_control_chars(json_as_string(value));
    }
    return object;
}

KnowledgeObject fetch_with_retry(const FetchTask& task, const RetryPolicy& policy) {
    FetchTask attempt_task = task;
    for (int attempt = 0;; ++attempt) {
        attempt_task.attempt = attempt;
        try {
            return fetch_object(attempt_task);
        } catch (const Error& e) {
            if (!is_transient(e.code()) || attempt >= policy.max_retries) {
                throw;
            }
            policy.sleep_before_retry(attempt);
        }
    }
}

std::string_view to_string(ValidationFailure failure) {
    switch (failure) {
    case ValidationFailure::EmptyBody: return "empty_body";
    case ValidationFailure::BodyTooLarge: return "body_too_large";
    case ValidationFailure::InvalidUtf8: return "invalid_utf8";
    case ValidationFailure::TimestampInFuture: return "timestamp_in_future";
    }
    return "unknown";
}

ValidationReport validate_object(const KnowledgeObject& object, std::size_t max_body_bytes,
                                 UnixSeconds now) {
    ValidationReport report;
    if (text::count_tokens(object.body) == 0) {
        report.failures.push_back(ValidationFailure::EmptyBody);
    }
    if (object.body.size() > max_body_bytes) {
        report.failures.push_back(ValidationFailure::BodyTooLarge);
    }
    if (!is_valid_utf8(object.body) || !is_valid_utf8(object.title)) {
        report.failures.push_back(ValidationFailure::InvalidUtf8);
    }
    if (object.timestamp > now + kMaxFutureSkewSeconds) {
        report.failures.push_back(ValidationFailure::TimestampInFuture);
    }
    return report;
}

ExtractStats extract_worker_loop(BoundedQueue<Envelope<FetchTask>>& task_queue,
                                 ObjectMetastore& metastore,
                                 BoundedQueue<Envelope<KnowledgeObject>>& embed_queue,
                                 const RetryPolicy& policy) {
    ExtractStats stats;
    while (auto envelope = task_queue.pop()) {
        Envelope<KnowledgeObject> out;
        out.seq = envelope->seq;
        if (envelope->payload.has_value()) {
            ++stats.tasks;
            try {
                KnowledgeObject object = fetch_with_retry(*envelope->payload, policy);
                ++stats.fetched;
                const Digest digest = compute_hash(object);
                const ChangeStatus status =
                    metastore.check_and_record(object.object_id, digest, now_unix_seconds());
                if (status == ChangeStatus::Unchanged) {
                    ++stats.unchanged;
                } else {
                    const ValidationReport report = validate_object(object);
                    if (!report.ok()) {
                        ++stats.invalid;
                    } else {
                        if (status == ChangeStatus::New) {
                            ++stats.new_objects;
                        } else {
                            ++stats.modified;
                        }
                        out.payload = std::move(object);
                    }
                }
            } catch (const Error&) {
                ++stats.fetch_failed;
            }
        }
        embed_queue.push(std::move(out));
    }
    return stats;
}

} // namespace finq::extract
