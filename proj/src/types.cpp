#include "finq/types.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "finq/vecops.hpp"

namespace finq {

namespace {

// Civil-date conversions (Howard Hinnant's algorithms), so parsing and
// formatting never touch the process time zone.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

} // namespace

std::string format_iso8601(UnixSeconds t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    std::int64_t year;
    unsigned month, day;
    civil_from_days(days, year, month, day);
    const unsigned hh = static_cast<unsigned>(rem / 3600);
    const unsigned mm = static_cast<unsigned>((rem % 3600) / 60);
    const unsigned ss = static_cast<unsigned>(rem % 60);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02u:%02u:%02uZ",
                  static_cast<long long>(year), month, day, hh, mm, ss);
    return buf;
}

std::optional<UnixSeconds> parse_iso8601(std::string_view text) {
    long long y = 0;
    unsigned mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
    char tz = '\0';
    // Accepts YYYY-MM-DDTHH:MM:SSZ; a trailing "+00:00" is treated like Z.
    std::string buf(text);
    int n = std::sscanf(buf.c_str(), "%lld-%u-%uT%u:%u:%u%c", &y, &mo, &d, &hh, &mm, &ss, &tz);
    if (n < 6) {
        return std::nullopt;
    }
    if (n == 7 && tz != 'Z' && tz != 'z' && tz != '+') {
        return std::nullopt;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mm > 59 || ss > 60) {
        return std::nullopt;
    }
    return days_from_civil(y, mo, d) * 86400 + hh * 3600 + mm * 60 + ss;
}

UnixSeconds now_unix_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string strip_control_chars(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (u == 0x7F || (u < 0x20 && c != '\t' && c != '\n' && c != '\r')) {
            continue;
        }
        out.push_back(c);
    }
    return out;
}

bool is_valid_utf8(std::string_view text) {
    const auto* p = reinterpret_cast<const unsigned char*>(text.data());
    const auto* end = p + text.size();
    while (p < end) {
        if (*p < 0x80) {
            ++p;
            continue;
        }
        int len;
        unsigned cp;
        if ((*p & 0xE0) == 0xC0) {
            len = 2;
            cp = *p & 0x1F;
        } else if ((*p & 0xF0) == 0xE0) {
            len = 3;
            cp = *p & 0x0F;
        } else if ((*p & 0xF8) == 0xF0) {
            len = 4;
            cp = *p & 0x07;
        } else {
            return false;
        }
        if (end - p < len) {
            return false;
        }
        for (int i = 1; i < len; ++i) {
            if ((p[i] & 0xC0) != 0x80) {
                return false;
            }
            cp = (cp << 6) | (p[i] & 0x3F);
        }
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) {
            return false; // overlong
        }
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        p += len;
    }
    return true;
}

std::string_view to_string(Category c) {
    switch (c) {
    case Category::document: return "document";
    case Category::metadata_catalog: return "metadata_catalog";
    case Category::article: return "article";
    case Category::news_feed: return "news_feed";
    case Category::dataset_record: return "dataset_record";
    }
    return "document";
}

std::optional<Category> parse_category(std::string_view name) {
    if (name == "document") return Category::document;
    if (name == "metadata_catalog") return Category::metadata_catalog;
    if (name == "article") return Category::article;
    if (name == "news_feed") return Category::news_feed;
    if (name == "dataset_record") return Category::dataset_record;
    return std::nullopt;
}

bool is_canonical_field(std::string_view name) {
    return name == "id" || name == "title" || name == "body" || name == "category" ||
           name == "timestamp";
}

std::string to_hex(const Digest& digest) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : digest) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0x0F]);
    }
    return out;
}

std::optional<Digest> digest_from_hex(std::string_view hex) {
    if (hex.size() != 64) {
        return std::nullopt;
    }
    Digest d{};
    for (std::size_t i = 0; i < 32; ++i) {
        auto nibble = [](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            return -1;
        };
        const int hi = nibble(hex[2 * i]);
        const int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            return std::nullopt;
        }
        d[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return d;
}

bool is_valid_embedding(const EmbeddingVector& v, std::size_t dims) {
    if (v.values.size() != dims || dims == 0) {
        return false;
    }
    for (float x : v.values) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    const float norm = vec::l2_norm(v.values);
    return std::fabs(norm - 1.0f) <= 1e-5f;
}

std::string_view to_string(EntityType t) {
    switch (t) {
    case EntityType::PERSON: return "PERSON";
    case EntityType::ORGANIZATION: return "ORGANIZATION";
    case EntityType::PLACE: return "PLACE";
    case EntityType::FINANCIAL_SYSTEM: return "FINANCIAL_SYSTEM";
    }
    return "ORGANIZATION";
}

std::optional<EntityType> parse_entity_type(std::string_view name) {
    if (name == "PERSON") return EntityType::PERSON;
    if (name == "ORGANIZATION") return EntityType::ORGANIZATION;
    if (name == "PLACE") return EntityType::PLACE;
    if (name == "FINANCIAL_SYSTEM") return EntityType::FINANCIAL_SYSTEM;
    return std::nullopt;
}

std::string_view to_string(ChangeStatus s) {
    switch (s) {
    case ChangeStatus::New: return "new";
    case ChangeStatus::Modified: return "modified";
    case ChangeStatus::Unchanged: return "unchanged";
    }
    return "unchanged";
}

std::string canonicalize(const KnowledgeObject& object) {
    constexpr char kFieldSep = '\x1F';
    constexpr char kRecordEnd = '\x1E';
    std::string out;
    out.reserve(object.body.size() + object.title.size() + 128);
    out += object.object_id;
    out += kFieldSep;
    out += object.title;
    out += kFieldSep;
    out += object.body;
    out += kFieldSep;
    out += to_string(object.category);
    out += kFieldSep;
    out += format_iso8601(object.timestamp);
    for (const auto& [key, value] : object.metadata) { // std::map: sorted by key
        out += kFieldSep;
        out += key;
        out += kFieldSep;
        out += value;
    }
    out += kRecordEnd;
    return out;
}

} // namespace finq
