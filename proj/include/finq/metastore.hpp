#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "finq/types.hpp"

namespace finq::extract {

/// Change-detection ledger: object_id -> content digest. Appends one record
/// per change to a tab-separated log (later lines win on reload); flush()
/// compacts the log to one line per object.
class ObjectMetastore {
public:
    /// In-memory only (no persistence).
    ObjectMetastore() = default;

    /// Binds to `path`, loading existing records if the file exists.
    explicit ObjectMetastore(std::string path);

    /// Atomically compares and updates in one step:
    ///   no entry          -> New       (entry created)
    ///   different digest  -> Modified  (digest replaced, last_indexed = now)
    ///   equal digest      -> Unchanged (entry untouched)
    ChangeStatus check_and_record(const std::string& object_id, const Digest& digest,
                                  UnixSeconds now);

    std::optional<MetastoreEntry> find(const std::string& object_id) const;
    std::size_t size() const;

    /// Rewrites the backing file as one record per entry (atomic replace).
    void flush();

    const std::string& path() const { return path_; }

private:
    void append_record(const MetastoreEntry& entry);

    mutable std::mutex mutex_;
    std::map<std::string, MetastoreEntry> entries_;
    std::string path_; // empty = memory-only
};

} // namespace finq::extract
