#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "finq/queue.hpp"
#include "finq/types.hpp"

namespace finq::frontier {

struct FrontierConfig {
    std::vector<SourceConfig> sources;
    std::optional<int> schedule_seconds;
    int max_retries = 3;
};

/// Parses and validates a config document already in memory. `origin` names
/// the document in error messages.
FrontierConfig parse_frontier_config(const std::string& json_text, const std::string& origin);

/// Loads from a file path or an http(s) URL; both transports yield identical
/// configs for identical bytes.
FrontierConfig load_frontier_config(const std::string& location);

/// Warning-level outcome of a selector that matched nothing.
struct SelectorNotice {
    std::string source_id;
    std::string selector;
};

struct TaskPlan {
    std::vector<FetchTask> tasks;
    std::vector<SelectorNotice> notices;
};

/// One task per (source, matched object_ref): sources in config order,
/// object_refs deduplicated and lexicographic within each source. Selectors
/// containing `* ? [` enumerate the directory tree of a file source
/// (shell-style match, `*` does not cross `/`); all other selectors are
/// literal refs taken as-is.
TaskPlan build_fetch_tasks(const FrontierConfig& config);

/// Wraps tasks in sequence-numbered envelopes (seq = position) and pushes
/// them; returns the count. Throws QueueClosed.
std::size_t enqueue_tasks(std::vector<FetchTask> tasks,
                          BoundedQueue<Envelope<FetchTask>>& queue);

} // namespace finq::frontier
