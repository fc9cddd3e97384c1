#include "doctest.h"

#include <zlib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sktree/ingest.hpp"
#include "sktree/tree.hpp"

using namespace sktree;

namespace {

std::string event_line(const std::string& object, const std::string& action,
                       const std::string& actor, const std::string& object_id,
                       std::int64_t timestamp_ms,
                       const std::string& hostname = "host-a") {
  nlohmann::json j{{"action", action},     {"actorID", actor},
                   {"object", object},     {"objectID", object_id},
                   {"hostname", hostname}, {"timestamp", timestamp_ms}};
  return j.dump();
}

ParseResult parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_events(in);
}

LabeledDataset run(const std::vector<std::string>& lines,
                   const std::unordered_set<std::string>& malicious = {},
                   FeaturizationConfig config = {}) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  ParseResult parsed = parse_text(text);
  REQUIRE(parsed.issues.empty());
  return build_process_trees(std::move(parsed.events), malicious, config);
}

FeaturizationConfig raw_config() {
  FeaturizationConfig c;
  c.normalize = false;
  return c;
}

}  // namespace

TEST_CASE("parses the canonical process-creation record") {
  const std::string line =
      R"({"action":"CREATE",)"
      R"("actorID":"437acfc7-d9ef-4c60-a108-...",)"
      R"("hostname":"SysClient0201.systemia.com",)"
      R"("object":"PROCESS",)"
      R"("objectID":"b9d06a48-0968-4bda-b743-...",)"
      R"("properties":{"image_path":"c:\\windows\\x.exe"},)"
      R"("timestamp":1569245579591})";
  const ParseResult r = parse_text(line + "\n");
  REQUIRE(r.events.size() == 1);
  CHECK(r.issues.empty());
  const HostEvent& e = r.events[0];
  CHECK(e.action == "CREATE");
  CHECK(e.actor_id == "437acfc7-d9ef-4c60-a108-...");
  CHECK(e.object == "PROCESS");
  CHECK(e.object_id == "b9d06a48-0968-4bda-b743-...");
  CHECK(e.hostname == "SysClient0201.systemia.com");
  CHECK(e.timestamp_ms == 1569245579591);
  CHECK(e.seconds() == doctest::Approx(1569245579.591));
}

TEST_CASE("parse issues carry line numbers and do not abort") {
  const std::string text =
      event_line("FILE", "WRITE", "p1", "f1", 1000) + "\n" +
      "not json at all\n" +
      R"({"action":"WRITE","actorID":"p1","object":"FILE","objectID":"f2"})" "\n" +
      "\n" +
      event_line("FILE", "READ", "p1", "f3", 2000) + "\n";
  const ParseResult r = parse_text(text);
  CHECK(r.events.size() == 2);
  REQUIRE(r.issues.size() == 2);
  CHECK(r.issues[0].line == 2);
  CHECK(r.issues[0].reason.find("malformed") != std::string::npos);
  CHECK(r.issues[1].line == 3);
  CHECK(r.issues[1].reason.find("timestamp") != std::string::npos);
  CHECK(r.lines == 5);
}

TEST_CASE("empty input parses to nothing") {
  const ParseResult r = parse_text("");
  CHECK(r.events.empty());
  CHECK(r.issues.empty());
}

TEST_CASE("gzip input is transparently decompressed") {
  namespace fs = std::filesystem;
  const std::string text = event_line("FILE", "WRITE", "p1", "f1", 5000) + "\n" +
                           event_line("FILE", "READ", "p1", "f2", 6000) + "\n";
  const fs::path path = fs::temp_directory_path() / "sktree_events.json.gz";
  gzFile gz = gzopen(path.string().c_str(), "wb");
  REQUIRE(gz != nullptr);
  gzwrite(gz, text.data(), static_cast<unsigned>(text.size()));
  gzclose(gz);
  const ParseResult r = parse_events_file(path.string());
  CHECK(r.events.size() == 2);
  CHECK(r.events[1].object == "FILE");
  fs::remove(path);
}

TEST_CASE("label files ignore comments and blanks") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "sktree_labels.txt";
  {
    std::ofstream out(path);
    out << "# malicious roots\nproc-1\n\n  proc-2  \n";
  }
  const auto set = load_label_file(path.string());
  CHECK(set.size() == 2);
  CHECK(set.count("proc-1") == 1);
  CHECK(set.count("proc-2") == 1);
  fs::remove(path);
}

TEST_CASE("default event-type map has 20 ordered channels") {
  const EventTypeMap map;
  CHECK(map.channel_count() == 20);
  CHECK(map.channel("FILE", "CREATE") == 0);
  CHECK(map.channel("FILE", "DELETE") == 1);
  CHECK(map.channel("MODULE", "LOAD") == 9);
  CHECK(map.channel("THREAD", "CREATE") == 19);
  CHECK(map.channel("PROCESS", "CREATE") == -1);  // drives branching instead
  CHECK(map.channel("NO_SUCH", "THING") == -1);
}

TEST_CASE("custom event-type maps are validated") {
  using P = std::pair<std::string, std::string>;
  CHECK_THROWS_AS(EventTypeMap({P{"FILE", "WRITE"}, P{"FILE", "WRITE"}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(EventTypeMap({P{"PROCESS", "CREATE"}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(EventTypeMap({P{"", "WRITE"}}), std::invalid_argument);
  const EventTypeMap tiny({P{"FILE", "WRITE"}, P{"FLOW", "OPEN"}});
  CHECK(tiny.channel_count() == 2);
  CHECK(tiny.channel("FLOW", "OPEN") == 1);
}

TEST_CASE("a create event splits the tree into two branches") {
  // Window 900s: t=1000s lands in [900, 1800).
  const LabeledDataset ds = run(
      {
          event_line("FILE", "DELETE", "P", "f1", 1000000),
          event_line("PROCESS", "CREATE", "P", "C", 1010000),
      },
      {}, raw_config());
  REQUIRE(ds.size() == 1);
  const StreamingTree& tree = ds.trees[0];
  CHECK(tree.dim() == 23);
  CHECK(tree.series().size() >= 2);
  CHECK(tree.branch_count() == 2);
  CHECK(ds.meta[0].hostname == "host-a");
  CHECK(ds.meta[0].window_start == 900.0);
  CHECK(ds.meta[0].root_id == "P");
  CHECK(ds.meta[0].orphan == false);
  CHECK(ds.meta[0].consumed_events == 2);
  CHECK(ds.labels[0] == 0);

  // Root: birth knot then the FILE DELETE increment on channel 3+1.
  const PointMatrix& root = tree.series().knots();
  CHECK(root(0, 0) == 100.0);  // relative to window start
  CHECK(root(0, 1) == 1.0);    // depth of a window root
  CHECK(root(0, 2) == 0.0);
  CHECK(root(0, 4) == 0.0);
  CHECK(root(root.rows() - 1, 4) == 1.0);  // FILE DELETE channel

  const std::vector<Branch> branches = enumerate_branches(tree);
  REQUIRE(branches.size() == 2);
  // Branch 0 continues the parent: spawn counter steps 0 -> 1 at t2.
  const PointMatrix& parent = branches[0].series.knots();
  const Eigen::Index last = parent.rows() - 1;
  CHECK(parent(last, 0) == 110.0);
  CHECK(parent(last, 2) == 1.0);
  CHECK(parent(last, 1) == 1.0);  // depth unchanged
  CHECK(parent(last - 1, 2) == 0.0);
  // Branch 1 is the child: depth parent+1 from t2 on, history replicated.
  const PointMatrix& child = branches[1].series.knots();
  CHECK(child(child.rows() - 1, 0) == 110.0);
  CHECK(child(child.rows() - 1, 1) == 2.0);
  CHECK(child(child.rows() - 1, 2) == 0.0);
  CHECK(child(child.rows() - 1, 4) == 1.0);  // inherited FILE DELETE count
  CHECK(child.topRows(child.rows() - 1) == parent.topRows(last));

  // Counter channels never decrease along a branch.
  for (const Branch& b : branches) {
    const PointMatrix& k = b.series.knots();
    for (Eigen::Index r = 1; r < k.rows(); ++r) {
      for (int c = 1; c < 23; ++c) CHECK(k(r, c) >= k(r - 1, c));
    }
  }
}

TEST_CASE("trees outside the event-count band are discarded") {
  const LabeledDataset tiny =
      run({event_line("FILE", "READ", "Q", "f", 1000)}, {}, raw_config());
  CHECK(tiny.size() == 0);
  CHECK(tiny.stats.trees_discarded == 1);
  CHECK(tiny.stats.events_in_discarded == 1);

  std::vector<std::string> many;
  for (int k = 0; k <= 200; ++k) {
    many.push_back(event_line("FILE", "WRITE", "R", "f", 1000ll * k));
  }
  const LabeledDataset big = run(many, {}, raw_config());
  CHECK(big.size() == 0);
  CHECK(big.stats.trees_discarded == 1);
  CHECK(big.stats.events_in_discarded == 201);

  many.pop_back();  // exactly 200 is kept
  const LabeledDataset edge = run(many, {}, raw_config());
  CHECK(edge.size() == 1);
  CHECK(edge.meta[0].consumed_events == 200);
}

TEST_CASE("window boundaries reset per-tree state") {
  const LabeledDataset ds = run(
      {
          event_line("FILE", "WRITE", "P", "f", 10000),
          event_line("FILE", "WRITE", "P", "f", 20000),
          event_line("FILE", "WRITE", "P", "f", 30000),
          event_line("FILE", "WRITE", "P", "f", 910000),
          event_line("FILE", "WRITE", "P", "f", 920000),
      },
      {}, raw_config());
  REQUIRE(ds.size() == 2);
  CHECK(ds.meta[0].window_start == 0.0);
  CHECK(ds.meta[1].window_start == 900.0);
  CHECK(ds.meta[0].consumed_events == 3);
  CHECK(ds.meta[1].consumed_events == 2);
  const PointMatrix& second = ds.trees[1].series().knots();
  CHECK(second(0, 0) == 10.0);  // 910 relative to 900
  CHECK(second(0, 8) == 0.0);   // FILE WRITE counter starts over
  CHECK(second(second.rows() - 1, 8) == 2.0);
}

TEST_CASE("descendants in later windows are malicious orphan roots") {
  const LabeledDataset ds = run(
      {
          event_line("FILE", "WRITE", "M", "f", 10000),
          event_line("FILE", "WRITE", "M", "f", 11000),
          event_line("PROCESS", "CREATE", "M", "C", 20000),
          event_line("FILE", "READ", "C", "f", 30000),
          event_line("FILE", "WRITE", "C", "f", 910000),
          event_line("FILE", "WRITE", "C", "f", 911000),
      },
      {"M"}, raw_config());
  REQUIRE(ds.size() == 2);
  CHECK(ds.meta[0].root_id == "M");
  CHECK(ds.meta[0].orphan == false);
  CHECK(ds.labels[0] == 1);
  CHECK(ds.meta[1].root_id == "C");
  CHECK(ds.meta[1].window_start == 900.0);
  CHECK(ds.meta[1].orphan == true);  // parent exists globally, outside window
  CHECK(ds.labels[1] == 1);          // descendant of a malicious root
}

TEST_CASE("unrelated roots stay benign") {
  const LabeledDataset ds = run(
      {
          event_line("FILE", "WRITE", "A", "f", 10000),
          event_line("FILE", "WRITE", "A", "f", 11000),
      },
      {"M"}, raw_config());
  REQUIRE(ds.size() == 1);
  CHECK(ds.labels[0] == 0);
  CHECK(ds.meta[0].orphan == false);  // parent unknown anywhere: plain root
}

TEST_CASE("degenerate create events are skipped but counted") {
  const LabeledDataset ds = run(
      {
          event_line("FILE", "WRITE", "P", "f", 10000),
          event_line("PROCESS", "CREATE", "P", "P", 20000),  // self
          event_line("PROCESS", "CREATE", "P", "C", 30000),
          event_line("PROCESS", "CREATE", "P", "C", 40000),  // duplicate child
          event_line("FILE", "READ", "C", "f", 50000),
      },
      {}, raw_config());
  CHECK(ds.stats.events_skipped_create == 2);
  REQUIRE(ds.size() == 1);
  CHECK(ds.trees[0].branch_count() == 2);
}

TEST_CASE("unmapped events are ignored and counted") {
  const LabeledDataset ds = run(
      {
          event_line("FILE", "WRITE", "P", "f", 10000),
          event_line("USER_SESSION", "LOGIN", "P", "s", 20000),
          event_line("FILE", "WRITE", "P", "f", 30000),
      },
      {}, raw_config());
  CHECK(ds.stats.events_ignored == 1);
  CHECK(ds.stats.events_mapped == 2);
  REQUIRE(ds.size() == 1);
  CHECK(ds.meta[0].consumed_events == 2);
}

TEST_CASE("identical timestamps fall back to microsecond ordering") {
  const LabeledDataset ds = run(
      {
          event_line("FILE", "WRITE", "P", "f", 10000),
          event_line("FILE", "WRITE", "P", "f", 10000),
      },
      {}, raw_config());
  REQUIRE(ds.size() == 1);
  const PointMatrix& k = ds.trees[0].series().knots();
  for (Eigen::Index r = 1; r < k.rows(); ++r) CHECK(k(r, 0) > k(r - 1, 0));
  CHECK(ds.meta[0].consumed_events == 2);
}

TEST_CASE("event bookkeeping is conserved on a messy log") {
  std::mt19937_64 rng(91);
  const EventTypeMap map;
  std::vector<std::string> lines;
  std::vector<std::string> procs{"p0", "p1", "p2"};
  int created = 0;
  for (int k = 0; k < 300; ++k) {
    const std::string host = (rng() % 2 == 0) ? "host-a" : "host-b";
    const std::string actor = procs[rng() % procs.size()];
    const std::int64_t t = 1000ll * static_cast<std::int64_t>(rng() % 4000);
    const int roll = static_cast<int>(rng() % 10);
    if (roll == 0) {
      lines.push_back(event_line("WEIRD", "THING", actor, "x", t, host));
    } else if (roll == 1 && created < 20) {
      const std::string child = "c" + std::to_string(created++);
      lines.push_back(event_line("PROCESS", "CREATE", actor, child, t, host));
      procs.push_back(child);
    } else {
      const auto& [object, action] = map.pairs()[rng() % map.pairs().size()];
      lines.push_back(event_line(object, action, actor, "obj", t, host));
    }
  }
  const LabeledDataset ds = run(lines, {}, raw_config());
  const IngestStats& s = ds.stats;
  CHECK(s.events_total == 300);
  CHECK(s.events_total ==
        s.events_mapped + s.events_ignored + s.events_skipped_create);
  std::size_t consumed_kept = 0;
  for (const TreeMeta& m : ds.meta) consumed_kept += m.consumed_events;
  CHECK(s.events_mapped == consumed_kept + s.events_in_discarded);
  CHECK(s.trees_kept == ds.size());

  // Output ordering is canonical: hostname, then window, then root id.
  for (std::size_t i = 1; i < ds.size(); ++i) {
    const TreeMeta& a = ds.meta[i - 1];
    const TreeMeta& b = ds.meta[i];
    CHECK(std::tie(a.hostname, a.window_start, a.root_id) <=
          std::tie(b.hostname, b.window_start, b.root_id));
  }
}

TEST_CASE("ingestion output is byte-deterministic") {
  namespace fs = std::filesystem;
  std::vector<std::string> lines{
      event_line("FILE", "WRITE", "P", "f", 10000),
      event_line("PROCESS", "CREATE", "P", "C", 20000),
      event_line("FILE", "READ", "C", "f", 30000, "host-b"),
      event_line("FILE", "READ", "P", "f", 40000),
  };
  const fs::path p1 = fs::temp_directory_path() / "sktree_det1.jsonl";
  const fs::path p2 = fs::temp_directory_path() / "sktree_det2.jsonl";
  run(lines, {}, raw_config()).save_jsonl(p1.string());
  run(lines, {}, raw_config()).save_jsonl(p2.string());
  std::ifstream f1(p1), f2(p2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  CHECK(!s1.str().empty());
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("dataset persistence round-trips") {
  namespace fs = std::filesystem;
  const LabeledDataset ds = run(
      {
          event_line("FILE", "WRITE", "P", "f", 10000),
          event_line("PROCESS", "CREATE", "P", "C", 20000),
          event_line("FILE", "READ", "C", "f", 30000),
      },
      {"P"});
  const fs::path path = fs::temp_directory_path() / "sktree_ds_rt.jsonl";
  ds.save_jsonl(path.string());
  const LabeledDataset back = LabeledDataset::load_jsonl(path.string());
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.trees[i] == ds.trees[i]);
    CHECK(back.labels[i] == ds.labels[i]);
    CHECK(back.meta[i].hostname == ds.meta[i].hostname);
    CHECK(back.meta[i].window_start == ds.meta[i].window_start);
    CHECK(back.meta[i].root_id == ds.meta[i].root_id);
    CHECK(back.meta[i].orphan == ds.meta[i].orphan);
    CHECK(back.meta[i].consumed_events == ds.meta[i].consumed_events);
  }
  fs::remove(path);
}

TEST_CASE("loading rejects corrupt dataset lines") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "sktree_ds_bad.jsonl";
  {
    std::ofstream out(path);
    out << "{\"tree\":{},\"label\":2,\"meta\":{}}\n";
  }
  CHECK_THROWS_AS(LabeledDataset::load_jsonl(path.string()),
                  std::runtime_error);
  fs::remove(path);
}

TEST_CASE("two-point standardization hits minus-one and one") {
  PointMatrix knots(2, 2);
  knots << 900.0, 0.0, 1350.0, 2.0;
  const StreamingTree tree((TimeSeries(knots)));
  const StreamingTree normed = normalize_tree(tree, 900.0, 1800.0);
  const PointMatrix& k = normed.series().knots();
  CHECK(k(0, 0) == doctest::Approx(0.0));
  CHECK(k(1, 0) == doctest::Approx(0.5));
  CHECK(k(0, 1) == doctest::Approx(-1.0));
  CHECK(k(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("constant channels flatten to zero") {
  PointMatrix knots(3, 2);
  knots << 900.0, 7.0, 1350.0, 7.0, 1800.0, 7.0;
  const StreamingTree tree((TimeSeries(knots)));
  const StreamingTree normed = normalize_tree(tree, 900.0, 1800.0);
  const PointMatrix& k = normed.series().knots();
  CHECK(k(0, 0) == doctest::Approx(0.0));
  CHECK(k(1, 0) == doctest::Approx(0.5));
  CHECK(k(2, 0) == doctest::Approx(1.0));
  CHECK(k.col(1).isZero());
}

TEST_CASE("branch pooling weighs shared prefixes by branch count") {
  PointMatrix rootk(1, 2), c1(1, 2), c2(1, 2);
  rootk << 0.0, 0.0;
  c1 << 1.0, 2.0;
  c2 << 2.0, 4.0;
  const StreamingTree tree(
      TimeSeries(rootk),
      {StreamingTree(TimeSeries(c1)), StreamingTree(TimeSeries(c2))});
  // Branch pooling sees {0,2,0,4}: mean 1.5, sd sqrt(11)/2.
  const StreamingTree by_branch = normalize_tree(tree, 0.0, 4.0,
                                                 Pooling::branches);
  CHECK(by_branch.series().knots()(0, 1) ==
        doctest::Approx(-3.0 / std::sqrt(11.0)).epsilon(1e-12));
  // Node pooling sees {0,2,4}: mean 2, sd sqrt(8/3).
  const StreamingTree by_node = normalize_tree(tree, 0.0, 4.0, Pooling::nodes);
  CHECK(by_node.series().knots()(0, 1) ==
        doctest::Approx(-std::sqrt(1.5)).epsilon(1e-12));
}

TEST_CASE("featurization config round-trips through json") {
  FeaturizationConfig c;
  c.window_seconds = 300.0;
  c.min_events = 3;
  c.max_events = 50;
  c.normalize = false;
  c.pooling = Pooling::nodes;
  const FeaturizationConfig back = FeaturizationConfig::from_json(c.to_json());
  CHECK(back.window_seconds == 300.0);
  CHECK(back.min_events == 3);
  CHECK(back.max_events == 50);
  CHECK(back.normalize == false);
  CHECK(back.pooling == Pooling::nodes);
  CHECK(back.tree_dim() == 23);
}

TEST_CASE("invalid featurization configs are rejected") {
  FeaturizationConfig c;
  c.min_events = 0;
  CHECK_THROWS_AS(build_process_trees({}, {}, c), std::invalid_argument);
  c = FeaturizationConfig{};
  c.max_events = 1;
  CHECK_THROWS_AS(build_process_trees({}, {}, c), std::invalid_argument);
  c = FeaturizationConfig{};
  c.window_seconds = 0.0;
  CHECK_THROWS_AS(build_process_trees({}, {}, c), std::invalid_argument);
}

TEST_CASE("normalization leaves tree shape intact end to end") {
  const LabeledDataset ds = run({
      event_line("FILE", "WRITE", "P", "f", 10000),
      event_line("PROCESS", "CREATE", "P", "C", 20000),
      event_line("FILE", "READ", "C", "f", 30000),
  });
  REQUIRE(ds.size() == 1);
  CHECK(ds.trees[0].branch_count() == 2);
  // Time channel lives in [0, 1] after normalization.
  for (const Branch& b : enumerate_branches(ds.trees[0])) {
    const PointMatrix& k = b.series.knots();
    CHECK(k.col(0).minCoeff() >= 0.0);
    CHECK(k.col(0).maxCoeff() <= 1.0);
  }
}
