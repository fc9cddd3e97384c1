#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sktree/tree.hpp"

namespace sktree {

/// One host-telemetry record, reduced to the fields the featurizer consumes.
/// The "properties" payload is deliberately dropped.
struct HostEvent {
  std::string action;
  std::string actor_id;
  std::string object;
  std::string object_id;
  std::string hostname;
  std::int64_t timestamp_ms = 0;

  double seconds() const { return static_cast<double>(timestamp_ms) / 1000.0; }
};

struct ParseIssue {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ParseResult {
  std::vector<HostEvent> events;
  std::vector<ParseIssue> issues;
  std::size_t lines = 0;
};

/// Newline-delimited JSON records. Malformed lines and records missing a
/// required field become issues and are skipped; parsing never aborts.
ParseResult parse_events(std::istream& in);

/// File variant; paths ending in ".gz" are inflated first.
ParseResult parse_events_file(const std::string& path);

/// Malicious root process ids, one per line. Blank lines and lines starting
/// with '#' are skipped.
std::unordered_set<std::string> load_label_file(const std::string& path);

/// Ordered (object, action) pairs, each owning one counter channel. The
/// process-creation pair is structural — it drives branching — and is
/// rejected here.
class EventTypeMap {
 public:
  EventTypeMap();  // default 20-entry table over the common telemetry vocabulary
  explicit EventTypeMap(std::vector<std::pair<std::string, std::string>> pairs);

  int channel_count() const { return static_cast<int>(pairs_.size()); }
  /// Counter index for (object, action) in [0, channel_count), or -1.
  int channel(const std::string& object, const std::string& action) const;
  const std::vector<std::pair<std::string, std::string>>& pairs() const {
    return pairs_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
  std::map<std::pair<std::string, std::string>, int> index_;
};

/// Which knot population feeds normalization statistics: every knot of every
/// branch (shared prefixes weighted by the branches through them) or every
/// node knot exactly once.
enum class Pooling { branches, nodes };

struct FeaturizationConfig {
  EventTypeMap event_type_map;
  double window_seconds = 900.0;
  int min_events = 2;    // consumed input events per tree, inclusive
  int max_events = 200;  // inclusive
  bool normalize = true;
  Pooling pooling = Pooling::branches;

  /// 1 time channel + depth + spawn count + one per map entry.
  int tree_dim() const { return 3 + event_type_map.channel_count(); }

  nlohmann::json to_json() const;
  static FeaturizationConfig from_json(const nlohmann::json& j);
};

struct TreeMeta {
  std::string hostname;
  double window_start = 0.0;  // absolute seconds, aligned to window_seconds
  std::string root_id;
  bool orphan = false;  // parent process known globally but not in this window
  std::size_t consumed_events = 0;

  nlohmann::json to_json() const;
  static TreeMeta from_json(const nlohmann::json& j);
};

struct IngestStats {
  std::size_t events_total = 0;
  std::size_t events_mapped = 0;  // creation events plus counter-mapped ones
  std::size_t events_ignored = 0;         // (object, action) outside the map
  std::size_t events_skipped_create = 0;  // duplicate/self/empty-target creates
  std::size_t trees_kept = 0;
  std::size_t trees_discarded = 0;
  std::size_t events_in_discarded = 0;

  nlohmann::json to_json() const;
};

struct LabeledDataset {
  std::vector<StreamingTree> trees;
  std::vector<int> labels;  // {0, 1}
  std::vector<TreeMeta> meta;
  IngestStats stats;  // build-time only; not persisted

  std::size_t size() const { return trees.size(); }

  /// One {"tree":…, "label":…, "meta":…} record per line.
  void save_jsonl(const std::string& path) const;
  static LabeledDataset load_jsonl(const std::string& path);
};

/// Reconstructs per-(window, root process) streaming trees from an event
/// stream and featurizes them:
///   channel 0: event time in seconds relative to the window start
///   channel 1: depth in the process tree (window roots are depth 1)
///   channel 2: cumulative processes spawned along the branch
///   channel 3+i: cumulative count of event-type-map entry i along the branch
/// A process-creation event closes the actor's current node and opens two
/// children from the same pre-event state: the actor's continuation (spawn
/// count +1) and the new process (depth +1). Any other mapped event appends
/// one knot to the actor's current node. Every node gets a zero-counter birth
/// knot, so knot counts exceed event counts; the 2–200 filter and the
/// conservation statistics are over consumed input events. Timestamp ties are
/// broken in input order with +1 microsecond offsets. A tree is labeled 1
/// when any process in it is one of the given roots or descends from one.
/// Output is sorted by (hostname, window start, root id) and is a
/// deterministic function of the input.
LabeledDataset build_process_trees(
    std::vector<HostEvent> events,
    const std::unordered_set<std::string>& malicious_roots,
    const FeaturizationConfig& config);

/// Standardizes every non-time channel to mean 0, sd 1 (population
/// convention) over the pooled knots, and maps the time channel affinely from
/// [window_start, window_end] to [0, 1]. Channels with sd below 1e-12
/// collapse to all zeros.
StreamingTree normalize_tree(const StreamingTree& tree, double window_start,
                             double window_end,
                             Pooling pooling = Pooling::branches);

}  // namespace sktree
