#include "sktree/ingest.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace sktree {

namespace {

// Millisecond logs collide; ties are pushed apart by 1 us in input order.
constexpr double kTieEpsilonSeconds = 1e-6;

bool get_string(const nlohmann::json& j, const char* key, std::string& out) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return false;
  out = it->get<std::string>();
  return true;
}

}  // namespace

ParseResult parse_events(std::istream& in) {
  ParseResult result;
  std::string line;
  while (std::getline(in, line)) {
    ++result.lines;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      result.issues.push_back(
          {result.lines, std::string("malformed JSON: ") + e.what()});
      continue;
    }
    if (!j.is_object()) {
      result.issues.push_back({result.lines, "not a JSON object"});
      continue;
    }
    HostEvent e;
    std::string missing;
    if (!get_string(j, "action", e.action)) {
      missing = "action";
    } else if (!get_string(j, "actorID", e.actor_id)) {
      missing = "actorID";
    } else if (!get_string(j, "object", e.object)) {
      missing = "object";
    } else if (!get_string(j, "objectID", e.object_id)) {
      missing = "objectID";
    }
    if (!missing.empty()) {
      result.issues.push_back({result.lines, "missing field: " + missing});
      continue;
    }
    get_string(j, "hostname", e.hostname);  // optional
    const auto ts = j.find("timestamp");
    if (ts == j.end() || !ts->is_number()) {
      result.issues.push_back({result.lines, "missing field: timestamp"});
      continue;
    }
    e.timestamp_ms = ts->is_number_integer()
                         ? ts->get<std::int64_t>()
                         : static_cast<std::int64_t>(ts->get<double>());
    if (e.actor_id.empty()) {
      result.issues.push_back({result.lines, "empty actorID"});
      continue;
    }
    if (e.timestamp_ms < 0) {
      result.issues.push_back({result.lines, "negative timestamp"});
      continue;
    }
    result.events.push_back(std::move(e));
  }
  return result;
}

ParseResult parse_events_file(const std::string& path) {
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) {
      throw std::runtime_error("parse_events: cannot open " + path);
    }
    std::string content;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) {
      content.append(buf, static_cast<std::size_t>(n));
    }
    const bool bad = n < 0;
    gzclose(f);
    if (bad) {
      throw std::runtime_error("parse_events: gzip read error in " + path);
    }
    std::istringstream in(content);
    return parse_events(in);
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_events: cannot open " + path);
  return parse_events(in);
}

std::unordered_set<std::string> load_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_label_file: cannot open " + path);
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line[0] == '#') continue;
    out.insert(line);
  }
  return out;
}

EventTypeMap::EventTypeMap()
    : EventTypeMap(std::vector<std::pair<std::string, std::string>>{
          {"FILE", "CREATE"},     {"FILE", "DELETE"},
          {"FILE", "MODIFY"},     {"FILE", "READ"},
          {"FILE", "RENAME"},     {"FILE", "WRITE"},
          {"FLOW", "MESSAGE"},    {"FLOW", "OPEN"},
          {"FLOW", "START"},      {"MODULE", "LOAD"},
          {"PROCESS", "OPEN"},    {"PROCESS", "TERMINATE"},
          {"REGISTRY", "ADD"},    {"REGISTRY", "EDIT"},
          {"REGISTRY", "REMOVE"}, {"SHELL", "COMMAND"},
          {"TASK", "CREATE"},     {"TASK", "DELETE"},
          {"TASK", "MODIFY"},     {"THREAD", "CREATE"}}) {}

EventTypeMap::EventTypeMap(
    std::vector<std::pair<std::string, std::string>> pairs)
    : pairs_(std::move(pairs)) {
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& [object, action] = pairs_[i];
    if (object.empty() || action.empty()) {
      throw std::invalid_argument("EventTypeMap: empty object or action");
    }
    if (object == "PROCESS" && action == "CREATE") {
      throw std::invalid_argument(
          "EventTypeMap: (PROCESS, CREATE) is structural and cannot be a "
          "counter channel");
    }
    if (!index_.emplace(pairs_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("EventTypeMap: duplicate pair (" + object +
                                  ", " + action + ")");
    }
  }
}

int EventTypeMap::channel(const std::string& object,
                          const std::string& action) const {
  const auto it = index_.find({object, action});
  return it == index_.end() ? -1 : it->second;
}

nlohmann::json FeaturizationConfig::to_json() const {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [object, action] : event_type_map.pairs()) {
    pairs.push_back({object, action});
  }
  return nlohmann::json{
      {"event_type_map", pairs},
      {"window_seconds", window_seconds},
      {"min_events", min_events},
      {"max_events", max_events},
      {"normalize", normalize},
      {"pooling", pooling == Pooling::branches ? "branches" : "nodes"}};
}

FeaturizationConfig FeaturizationConfig::from_json(const nlohmann::json& j) {
  FeaturizationConfig c;
  if (j.contains("event_type_map")) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& p : j.at("event_type_map")) {
      pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    }
    c.event_type_map = EventTypeMap(std::move(pairs));
  }
  if (j.contains("window_seconds")) {
    c.window_seconds = j.at("window_seconds").get<double>();
  }
  if (j.contains("min_events")) c.min_events = j.at("min_events").get<int>();
  if (j.contains("max_events")) c.max_events = j.at("max_events").get<int>();
  if (j.contains("normalize")) c.normalize = j.at("normalize").get<bool>();
  if (j.contains("pooling")) {
    const std::string p = j.at("pooling").get<std::string>();
    if (p == "branches") {
      c.pooling = Pooling::branches;
    } else if (p == "nodes") {
      c.pooling = Pooling::nodes;
    } else {
      throw std::invalid_argument("FeaturizationConfig: unknown pooling '" + p +
                                  "'");
    }
  }
  return c;
}

nlohmann::json TreeMeta::to_json() const {
  return nlohmann::json{{"hostname", hostname},
                        {"window_start", window_start},
                        {"root_id", root_id},
                        {"orphan", orphan},
                        {"consumed_events", consumed_events}};
}

TreeMeta TreeMeta::from_json(const nlohmann::json& j) {
  TreeMeta m;
  m.hostname = j.at("hostname").get<std::string>();
  m.window_start = j.at("window_start").get<double>();
  m.root_id = j.at("root_id").get<std::string>();
  m.orphan = j.at("orphan").get<bool>();
  m.consumed_events = j.at("consumed_events").get<std::size_t>();
  return m;
}

nlohmann::json IngestStats::to_json() const {
  return nlohmann::json{{"events_total", events_total},
                        {"events_mapped", events_mapped},
                        {"events_ignored", events_ignored},
                        {"events_skipped_create", events_skipped_create},
                        {"trees_kept", trees_kept},
                        {"trees_discarded", trees_discarded},
                        {"events_in_discarded", events_in_discarded}};
}

void LabeledDataset::save_jsonl(const std::string& path) const {
  if (trees.size() != labels.size() || trees.size() != meta.size()) {
    throw std::logic_error("LabeledDataset: trees/labels/meta lengths differ");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("LabeledDataset: cannot write " + path);
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const nlohmann::json rec{{"tree", trees[i].to_json()},
                             {"label", labels[i]},
                             {"meta", meta[i].to_json()}};
    out << rec.dump() << '\n';
  }
}

LabeledDataset LabeledDataset::load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("LabeledDataset: cannot read " + path);
  LabeledDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("LabeledDataset: bad record at line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    const int label = rec.at("label").get<int>();
    if (label != 0 && label != 1) {
      throw std::runtime_error("LabeledDataset: label must be 0 or 1 at line " +
                               std::to_string(lineno));
    }
    ds.trees.push_back(StreamingTree::from_json(rec.at("tree")));
    ds.labels.push_back(label);
    ds.meta.push_back(TreeMeta::from_json(rec.at("meta")));
  }
  return ds;
}

namespace {

struct NodeBuild {
  std::vector<std::vector<double>> knots;  // channel 0 holds absolute seconds
  std::vector<int> children;

  double last_time() const { return knots.back()[0]; }
};

struct ProcState {
  int node = -1;              // node currently accepting this process's knots
  std::vector<double> state;  // last knot written
  std::string root;           // id of this process's window root
};

}  // namespace

LabeledDataset build_process_trees(
    std::vector<HostEvent> events,
    const std::unordered_set<std::string>& malicious_roots,
    const FeaturizationConfig& config) {
  if (config.min_events < 1 || config.max_events < config.min_events) {
    throw std::invalid_argument(
        "FeaturizationConfig: need 1 <= min_events <= max_events");
  }
  if (!(config.window_seconds > 0.0)) {
    throw std::invalid_argument(
        "FeaturizationConfig: window_seconds must be positive");
  }
  const int dim = config.tree_dim();

  std::stable_sort(events.begin(), events.end(),
                   [](const HostEvent& a, const HostEvent& b) {
                     if (a.hostname != b.hostname) {
                       return a.hostname < b.hostname;
                     }
                     return a.timestamp_ms < b.timestamp_ms;
                   });

  // Global parent links (first creation wins), for orphan flags and the
  // descendant closure of the label set.
  std::unordered_map<std::string, std::string> parent_of;
  for (const HostEvent& e : events) {
    if (e.object == "PROCESS" && e.action == "CREATE" && !e.object_id.empty() &&
        e.object_id != e.actor_id && parent_of.count(e.object_id) == 0) {
      parent_of.emplace(e.object_id, e.actor_id);
    }
  }

  std::unordered_map<std::string, int> malicious_memo;
  auto is_malicious = [&](const std::string& id) -> int {
    std::vector<std::string> chain;
    std::string cur = id;
    int verdict = 0;
    for (std::size_t hops = 0; hops <= parent_of.size(); ++hops) {
      const auto memo = malicious_memo.find(cur);
      if (memo != malicious_memo.end()) {
        verdict = memo->second;
        break;
      }
      if (malicious_roots.count(cur) > 0) {
        verdict = 1;
        break;
      }
      chain.push_back(cur);
      const auto p = parent_of.find(cur);
      if (p == parent_of.end()) break;
      cur = p->second;
    }
    for (const std::string& c : chain) malicious_memo[c] = verdict;
    return verdict;
  };

  LabeledDataset out;
  IngestStats& stats = out.stats;
  stats.events_total = events.size();

  struct Built {
    TreeMeta meta;
    StreamingTree tree;
    int label;
  };
  std::vector<Built> built;

  // Per-window state.
  std::vector<NodeBuild> nodes;
  std::unordered_map<std::string, ProcState> procs;
  std::vector<std::string> root_order;
  std::unordered_map<std::string, int> root_node_of;
  std::unordered_map<std::string, std::size_t> consumed;
  std::unordered_map<std::string, bool> orphan;
  std::unordered_map<std::string, std::vector<std::string>> members;
  std::string cur_host;
  double cur_window = std::numeric_limits<double>::quiet_NaN();

  auto build_node = [&](auto&& self, int idx, double w0) -> StreamingTree {
    const NodeBuild& nb = nodes[static_cast<std::size_t>(idx)];
    PointMatrix k(static_cast<Eigen::Index>(nb.knots.size()), dim);
    for (std::size_t r = 0; r < nb.knots.size(); ++r) {
      k(static_cast<Eigen::Index>(r), 0) = nb.knots[r][0] - w0;
      for (int c = 1; c < dim; ++c) {
        k(static_cast<Eigen::Index>(r), c) = nb.knots[r][static_cast<std::size_t>(c)];
      }
    }
    std::vector<StreamingTree> children;
    children.reserve(nb.children.size());
    for (const int c : nb.children) children.push_back(self(self, c, w0));
    return StreamingTree(TimeSeries(std::move(k)), std::move(children));
  };

  auto flush_window = [&]() {
    for (const std::string& rid : root_order) {
      const std::size_t used = consumed[rid];
      if (used < static_cast<std::size_t>(config.min_events) ||
          used > static_cast<std::size_t>(config.max_events)) {
        ++stats.trees_discarded;
        stats.events_in_discarded += used;
        continue;
      }
      StreamingTree tree = build_node(build_node, root_node_of[rid], cur_window);
      if (config.normalize) {
        tree = normalize_tree(tree, 0.0, config.window_seconds, config.pooling);
      }
      int label = 0;
      for (const std::string& member : members[rid]) {
        if (is_malicious(member) != 0) {
          label = 1;
          break;
        }
      }
      ++stats.trees_kept;
      built.push_back(Built{TreeMeta{cur_host, cur_window, rid, orphan[rid], used},
                            std::move(tree), label});
    }
    nodes.clear();
    procs.clear();
    root_order.clear();
    root_node_of.clear();
    consumed.clear();
    orphan.clear();
    members.clear();
  };

  auto ensure_proc = [&](const std::string& actor, double t) -> ProcState& {
    const auto it = procs.find(actor);
    if (it != procs.end()) return it->second;
    // New window root: a zero-counter birth knot at the first event's time;
    // the event itself lands one tie-step later.
    std::vector<double> s0(static_cast<std::size_t>(dim), 0.0);
    s0[0] = t;
    s0[1] = 1.0;  // depth
    NodeBuild nb;
    nb.knots.push_back(s0);
    nodes.push_back(std::move(nb));
    ProcState ps;
    ps.node = static_cast<int>(nodes.size()) - 1;
    ps.state = std::move(s0);
    ps.root = actor;
    root_order.push_back(actor);
    root_node_of[actor] = ps.node;
    orphan[actor] = parent_of.count(actor) > 0;
    consumed[actor] = 0;
    members[actor] = {actor};
    return procs.emplace(actor, std::move(ps)).first->second;
  };

  for (const HostEvent& e : events) {
    const bool is_create = e.object == "PROCESS" && e.action == "CREATE";
    const int ch = config.event_type_map.channel(e.object, e.action);
    if (!is_create && ch < 0) {
      ++stats.events_ignored;
      continue;
    }

    const double t = e.seconds();
    const double w =
        std::floor(t / config.window_seconds) * config.window_seconds;
    if (e.hostname != cur_host || w != cur_window) {
      flush_window();
      cur_host = e.hostname;
      cur_window = w;
    }

    if (is_create) {
      if (e.object_id.empty() || e.object_id == e.actor_id ||
          procs.count(e.object_id) > 0) {
        ++stats.events_skipped_create;
        continue;
      }
      ++stats.events_mapped;
      ProcState& actor = ensure_proc(e.actor_id, t);
      const std::string root = actor.root;
      const int actor_node = actor.node;
      const double last = nodes[static_cast<std::size_t>(actor_node)].last_time();
      const double t_eff = t > last ? t : last + kTieEpsilonSeconds;

      // Both successors start from the actor's pre-event state: the actor's
      // continuation bumps the spawn counter, the new process bumps depth.
      std::vector<double> cont = actor.state;
      cont[0] = t_eff;
      cont[2] += 1.0;
      std::vector<double> child = actor.state;
      child[0] = t_eff;
      child[1] += 1.0;

      NodeBuild cont_nb;
      cont_nb.knots.push_back(cont);
      nodes.push_back(std::move(cont_nb));
      const int cont_idx = static_cast<int>(nodes.size()) - 1;
      NodeBuild child_nb;
      child_nb.knots.push_back(child);
      nodes.push_back(std::move(child_nb));
      const int child_idx = static_cast<int>(nodes.size()) - 1;
      nodes[static_cast<std::size_t>(actor_node)].children.push_back(cont_idx);
      nodes[static_cast<std::size_t>(actor_node)].children.push_back(child_idx);

      actor.node = cont_idx;
      actor.state = std::move(cont);

      ProcState spawned;
      spawned.node = child_idx;
      spawned.state = std::move(child);
      spawned.root = root;
      members[root].push_back(e.object_id);
      consumed[root] += 1;
      procs.emplace(e.object_id, std::move(spawned));  // invalidates `actor`
    } else {
      ++stats.events_mapped;
      ProcState& actor = ensure_proc(e.actor_id, t);
      const double last =
          nodes[static_cast<std::size_t>(actor.node)].last_time();
      const double t_eff = t > last ? t : last + kTieEpsilonSeconds;
      std::vector<double> next = actor.state;
      next[0] = t_eff;
      next[static_cast<std::size_t>(3 + ch)] += 1.0;
      nodes[static_cast<std::size_t>(actor.node)].knots.push_back(next);
      actor.state = std::move(next);
      consumed[actor.root] += 1;
    }
  }
  flush_window();

  std::stable_sort(built.begin(), built.end(), [](const Built& a, const Built& b) {
    if (a.meta.hostname != b.meta.hostname) {
      return a.meta.hostname < b.meta.hostname;
    }
    if (a.meta.window_start != b.meta.window_start) {
      return a.meta.window_start < b.meta.window_start;
    }
    return a.meta.root_id < b.meta.root_id;
  });
  out.trees.reserve(built.size());
  for (Built& b : built) {
    out.trees.push_back(std::move(b.tree));
    out.labels.push_back(b.label);
    out.meta.push_back(std::move(b.meta));
  }
  return out;
}

StreamingTree normalize_tree(const StreamingTree& tree, double window_start,
                             double window_end, Pooling pooling) {
  if (!(window_end > window_start)) {
    throw std::invalid_argument("normalize_tree: window must have positive length");
  }
  const int dim = tree.dim();

  std::vector<PointMatrix> groups;
  if (pooling == Pooling::branches) {
    for (const Branch& b : enumerate_branches(tree)) {
      groups.push_back(b.series.knots());
    }
  } else {
    std::function<void(const StreamingTree&)> walk = [&](const StreamingTree& n) {
      groups.push_back(n.series().knots());
      for (const StreamingTree& c : n.children()) walk(c);
    };
    walk(tree);
  }

  Eigen::Index total = 0;
  for (const PointMatrix& g : groups) total += g.rows();
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(dim);
  for (const PointMatrix& g : groups) mean += g.colwise().sum();
  mean /= static_cast<double>(total);
  Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(dim);
  for (const PointMatrix& g : groups) {
    var +=
        (g.rowwise() - mean).array().square().colwise().sum().matrix();
  }
  var /= static_cast<double>(total);  // population convention
  const Eigen::RowVectorXd sd = var.cwiseSqrt();

  const double span = window_end - window_start;
  auto rebuild = [&](auto&& self, const StreamingTree& n) -> StreamingTree {
    PointMatrix k = n.series().knots();
    for (Eigen::Index r = 0; r < k.rows(); ++r) {
      k(r, 0) = (k(r, 0) - window_start) / span;
      for (int c = 1; c < dim; ++c) {
        k(r, c) = sd(c) < 1e-12 ? 0.0 : (k(r, c) - mean(c)) / sd(c);
      }
    }
    std::vector<StreamingTree> children;
    children.reserve(n.children().size());
    for (const StreamingTree& c : n.children()) {
      children.push_back(self(self, c));
    }
    return StreamingTree(TimeSeries(std::move(k)), std::move(children));
  };
  return rebuild(rebuild, tree);
}

}  // namespace sktree
