#include "finq/metastore.hpp"

#include <filesystem>
#include <fstream>
#include <vector>

#include "finq/errors.hpp"

namespace finq::extract {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

} // namespace

ObjectMetastore::ObjectMetastore(std::string path) : path_(std::move(path)) {
    std::ifstream file(path_);
    if (!file) {
        return; // fresh store; file appears on first record
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_tabs(line);
        const std::string where = path_ + ":" + std::to_string(line_no);
        if (fields.size() != 4) {
            raise(ErrorCode::MetastoreIOError, "extract",
                  "expected 4 tab-separated fields at " + where);
        }
        const auto digest = digest_from_hex(fields[1]);
        const auto first_seen = parse_iso8601(fields[2]);
        const auto last_indexed = parse_iso8601(fields[3]);
        if (fields[0].empty() || !digest || !first_seen || !last_indexed) {
            raise(ErrorCode::MetastoreIOError, "extract", "unparseable record at " + where);
        }
        MetastoreEntry entry;
        entry.object_id = fields[0];
        entry.content_hash = *digest;
        entry.first_seen = *first_seen;
        entry.last_indexed = *last_indexed;
        entries_[entry.object_id] = std::move(entry); // later lines override
    }
}

void ObjectMetastore::append_record(const MetastoreEntry& entry) {
    if (path_.empty()) {
        return;
    }
    std::ofstream file(path_, std::ios::app);
    if (!file) {
        raise(ErrorCode::MetastoreIOError, "extract", "cannot append to " + path_);
    }
    file << entry.object_id << '\t' << to_hex(entry.content_hash) << '\t'
         << format_iso8601(entry.first_seen) << '\t' << format_iso8601(entry.last_indexed)
         << '\n';
    file.flush();
    if (!file) {
        raise(ErrorCode::MetastoreIOError, "extract", "write failed on " + path_);
    }
}

ChangeStatus ObjectMetastore::check_and_record(const std::string& object_id, const Digest& digest,
                                               UnixSeconds now) {
    if (object_id.empty() || object_id.find('\t') != std::string::npos ||
        object_id.find('\n') != std::string::npos) {
        raise(ErrorCode::InvalidParameter, "extract",
              "object_id must be non-empty and tab/newline-free");
    }
    std::lock_guard lock(mutex_);
    auto it = entries_.find(object_id);
    if (it == entries_.end()) {
        MetastoreEntry entry;
        entry.object_id = object_id;
        entry.content_hash = digest;
        entry.first_seen = now;
        entry.last_indexed = now;
        append_record(entry);
        entries_.emplace(object_id, std::move(entry));
        return ChangeStatus::New;
    }
    if (it->second.content_hash == digest) {
        return ChangeStatus::Unchanged;
    }
    it->second.content_hash = digest;
    it->second.last_indexed = now;
    append_record(it->second);
    return ChangeStatus::Modified;
}

std::optional<MetastoreEntry> ObjectMetastore::find(const std::string& object_id) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(object_id);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t ObjectMetastore::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void ObjectMetastore::flush() {
    std::lock_guard lock(mutex_);
    if (path_.empty()) {
        return;
    }
    const std::string tmp = path_ + ".tmp";
    {
        std::ofstream file(tmp, std::ios::trunc);
        if (!file) {
            raise(ErrorCode::MetastoreIOError, "extract", "cannot open " + tmp);
        }
        for (const auto& [id, entry] : entries_) {
            file << id << '\t' << to_hex(entry.content_hash) << '\t'
                 << format_iso8601(entry.first_seen) << '\t'
                 << format_iso8601(entry.last_indexed) << '\n';
        }
        file.flush();
        if (!file) {
            raise(ErrorCode::MetastoreIOError, "extract", "write failed on " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path_, ec);
    if (ec) {
        raise(ErrorCode::MetastoreIOError, "extract",
              "rename failed: " + path_ + " (" + ec.message() + ")");
    }
}

} // namespace finq::extract
