// Command-line front end: ingest event logs, build Gram matrices, train and
// evaluate classifiers, generate synthetic datasets. Every verb exits 0 on
// success; failures print one JSON object {"error": ...} to stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sktree/eval.hpp"
#include "sktree/hash.hpp"
#include "sktree/ingest.hpp"
#include "sktree/mmd.hpp"
#include "sktree/svm.hpp"

namespace {

using nlohmann::json;

std::string env_cache_dir() {
  const char* v = std::getenv("SKTREE_CACHE_DIR");
  return v == nullptr ? std::string{} : std::string{v};
}

sktree::MmdEstimator estimator_from_flag(const std::string& name) {
  if (name == "unbiased") return sktree::MmdEstimator::unbiased;
  if (name == "biased") return sktree::MmdEstimator::biased;
  if (name == "algorithm1_literal") {
    return sktree::MmdEstimator::algorithm1_literal;
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

sktree::BaseKernel base_from_flags(const std::string& kind, double bandwidth) {
  if (kind == "linear") return sktree::BaseKernel::linear();
  if (kind == "rbf") return sktree::BaseKernel::rbf(bandwidth);
  throw std::invalid_argument("unknown base kernel '" + kind + "'");
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

struct IngestArgs {
  std::string events, labels, out, stats, pooling = "branches";
  std::string config_path;
  double window_seconds = 900.0;
  int min_events = 2, max_events = 200;
  bool no_normalize = false;
};

int run_ingest(const IngestArgs& a, const CLI::App& cmd) {
  sktree::FeaturizationConfig config;
  if (!a.config_path.empty()) {
    config = sktree::FeaturizationConfig::from_json(load_json_file(a.config_path));
  }
  if (cmd.count("--window-seconds") > 0) config.window_seconds = a.window_seconds;
  if (cmd.count("--min-events") > 0) config.min_events = a.min_events;
  if (cmd.count("--max-events") > 0) config.max_events = a.max_events;
  if (cmd.count("--pooling") > 0 || a.config_path.empty()) {
    config.pooling = a.pooling == "nodes" ? sktree::Pooling::nodes
                                          : sktree::Pooling::branches;
  }
  if (a.no_normalize) config.normalize = false;

  sktree::ParseResult parsed = sktree::parse_events_file(a.events);
  std::unordered_set<std::string> malicious;
  if (!a.labels.empty()) malicious = sktree::load_label_file(a.labels);

  sktree::LabeledDataset dataset =
      sktree::build_process_trees(std::move(parsed.events), malicious, config);
  dataset.save_jsonl(a.out);

  json stats = dataset.stats.to_json();
  stats["parse_lines"] = parsed.lines;
  stats["parse_issues"] = parsed.issues.size();
  const std::string stats_path = a.stats.empty() ? a.out + ".stats.json" : a.stats;
  std::ofstream sf(stats_path, std::ios::trunc);
  if (!sf) throw std::runtime_error("cannot write " + stats_path);
  sf << stats.dump(2) << '\n';

  std::cout << json{{"trees", dataset.size()},
                    {"out", a.out},
                    {"stats", stats_path}}
                   .dump()
            << '\n';
  return 0;
}

struct SynthArgs {
  int n = 100;
  std::uint64_t seed = 7;
  std::string profile = "separable";
  std::string out;
};

int run_synth(const SynthArgs& a) {
  sktree::LabeledDataset dataset =
      sktree::generate_synthetic(a.n, a.seed, a.profile);
  dataset.save_jsonl(a.out);
  const std::string stats_path = a.out + ".stats.json";
  std::ofstream sf(stats_path, std::ios::trunc);
  if (!sf) throw std::runtime_error("cannot write " + stats_path);
  sf << sktree::synthetic_stats(dataset, a.profile).dump(2) << '\n';
  json note;
  note["trees"] = dataset.size();
  note["out"] = a.out;
  if (dataset.size() < 10) note["warning"] = "dataset too small for k-fold CV";
  std::cout << note.dump() << '\n';
  return 0;
}

struct GramArgs {
  std::string dataset, out;
  double sigma = 1.0;
  std::string base = "rbf", estimator = "unbiased";
  double bandwidth = 1.0;
  int refinement = 2;
  bool no_clamp = false;
  int threads = 1;
  std::string cache_dir;
};

int run_gram(const GramArgs& a) {
  sktree::LabeledDataset dataset = sktree::LabeledDataset::load_jsonl(a.dataset);
  sktree::MmdConfig config;
  config.estimator = estimator_from_flag(a.estimator);
  config.clamp_negative = !a.no_clamp;
  config.base = base_from_flags(a.base, a.bandwidth);
  config.grid.refinement = a.refinement;

  sktree::GramOptions options;
  options.threads = a.threads;
  options.cache_dir = a.cache_dir.empty() ? env_cache_dir() : a.cache_dir;

  sktree::GramMatrix g = sktree::gram(dataset.trees, a.sigma, config, options);
  g.save(a.out);
  std::cout << json{{"size", g.size()},
                    {"psd_shift", g.psd_shift},
                    {"single_branch_fallbacks", g.single_branch_fallbacks},
                    {"out", a.out}}
                   .dump()
            << '\n';
  return 0;
}

struct TrainArgs {
  std::string gram, dataset, out;
  double C = 1.0;
  double tol = 1e-3;
};

int run_train(const TrainArgs& a) {
  sktree::GramMatrix g = sktree::GramMatrix::load(a.gram);
  sktree::LabeledDataset dataset = sktree::LabeledDataset::load_jsonl(a.dataset);
  if (static_cast<Eigen::Index>(dataset.size()) != g.size()) {
    throw std::invalid_argument("gram size " + std::to_string(g.size()) +
                                " does not match dataset size " +
                                std::to_string(dataset.size()));
  }
  sktree::SvmModel model = sktree::train_svm(g, dataset.labels, a.C, a.tol);
  model.save(a.out);
  std::cout << json{{"support_vectors", model.support_indices.size()},
                    {"bias", model.bias},
                    {"out", a.out}}
                   .dump()
            << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string dataset, out, roc, config_path;
  int folds = 5, inner_folds = 3;
  std::uint64_t seed = 7;
  std::vector<double> sigma_grid, bandwidth_scales, c_grid;
  std::string base = "rbf", estimator = "unbiased";
  int refinement = 2;
  double svm_tol = 1e-3;
  int threads = 1;
  std::string cache_dir;
};

int run_evaluate(const EvaluateArgs& a, const CLI::App& cmd) {
  sktree::ExperimentConfig config;
  if (!a.config_path.empty()) {
    config = sktree::ExperimentConfig::from_json(load_json_file(a.config_path));
  }
  if (cmd.count("--folds") > 0) config.folds = a.folds;
  if (cmd.count("--inner-folds") > 0) config.inner_folds = a.inner_folds;
  if (cmd.count("--seed") > 0) config.seed = a.seed;
  if (!a.sigma_grid.empty()) config.sigma_grid = a.sigma_grid;
  if (!a.bandwidth_scales.empty()) config.bandwidth_scales = a.bandwidth_scales;
  if (!a.c_grid.empty()) config.c_grid = a.c_grid;
  if (cmd.count("--base") > 0) {
    config.mmd.base = base_from_flags(a.base, 1.0);
  }
  if (cmd.count("--estimator") > 0) {
    config.mmd.estimator = estimator_from_flag(a.estimator);
  }
  if (cmd.count("--refinement") > 0) config.mmd.grid.refinement = a.refinement;
  if (cmd.count("--svm-tol") > 0) config.svm_tol = a.svm_tol;
  if (cmd.count("--threads") > 0) config.threads = a.threads;
  config.cache_dir = a.cache_dir.empty() ? env_cache_dir() : a.cache_dir;

  sktree::LabeledDataset dataset = sktree::LabeledDataset::load_jsonl(a.dataset);
  if (dataset.size() == 0) throw std::invalid_argument("empty dataset");
  sktree::EvalReport report = sktree::cross_validate(dataset, config);
  report.save(a.out);
  if (!a.roc.empty()) report.save_roc_csv(a.roc);

  std::cout << json{{"mean_auroc", report.mean_auroc},
                    {"sd_auroc", report.sd_auroc},
                    {"folds", report.folds.size()},
                    {"audit_violations", report.audit_violations},
                    {"out", a.out}}
                   .dump()
            << '\n';
  return 0;
}

struct ReportArgs {
  std::string in, roc;
};

int run_report(const ReportArgs& a) {
  const json j = load_json_file(a.in);
  std::cout << "mean AUROC " << j.at("mean_auroc").get<double>() << " +- "
            << j.at("sd_auroc").get<double>() << " over "
            << j.at("folds").size() << " folds (seed "
            << j.at("seed").get<std::uint64_t>() << ")\n";
  for (const auto& f : j.at("folds")) {
    std::cout << "  fold " << f.at("fold").get<int>() << ": auroc "
              << f.at("auroc").get<double>() << "  sigma "
              << f.at("sigma").get<double>() << "  bandwidth "
              << f.at("bandwidth").get<double>() << "  C "
              << f.at("C").get<double>() << '\n';
  }
  if (!a.roc.empty()) {
    std::ofstream out(a.roc, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + a.roc);
    out << "fpr,tpr,threshold\n";
    char buf[128];
    for (const auto& p : j.at("roc")) {
      const auto& t = p.at(2);
      const double threshold =
          t.is_string()
              ? (t.get<std::string>() == "-inf"
                     ? -std::numeric_limits<double>::infinity()
                     : std::numeric_limits<double>::infinity())
              : t.get<double>();
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n",
                    p.at(0).get<double>(), p.at(1).get<double>(), threshold);
      out << buf;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming-tree classification pipeline"};
  app.require_subcommand(1);

  IngestArgs ia;
  CLI::App* ingest = app.add_subcommand(
      "ingest", "build labeled trees from an event log (.json or .json.gz)");
  ingest->add_option("--events", ia.events, "event log path")->required();
  ingest->add_option("--labels", ia.labels, "malicious root-id list, one per line");
  ingest->add_option("--out", ia.out, "output dataset (jsonl)")->required();
  ingest->add_option("--stats", ia.stats, "stats json path (default <out>.stats.json)");
  ingest->add_option("--config", ia.config_path, "featurization config json");
  ingest->add_option("--window-seconds", ia.window_seconds);
  ingest->add_option("--min-events", ia.min_events);
  ingest->add_option("--max-events", ia.max_events);
  ingest->add_option("--pooling", ia.pooling)
      ->check(CLI::IsMember({"branches", "nodes"}));
  ingest->add_flag("--no-normalize", ia.no_normalize);

  SynthArgs sa;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--n", sa.n, "trees per class")->required();
  synth->add_option("--seed", sa.seed);
  synth->add_option("--profile", sa.profile)
      ->check(CLI::IsMember({"separable", "null"}));
  synth->add_option("--out", sa.out, "output dataset (jsonl)")->required();

  GramArgs ga;
  CLI::App* gramc = app.add_subcommand("gram", "Gram matrix of tree kernels");
  gramc->add_option("--dataset", ga.dataset)->required();
  gramc->add_option("--sigma", ga.sigma)->required();
  gramc->add_option("--out", ga.out, "output prefix (.csv/.json)")->required();
  gramc->add_option("--base", ga.base)->check(CLI::IsMember({"linear", "rbf"}));
  gramc->add_option("--bandwidth", ga.bandwidth);
  gramc->add_option("--estimator", ga.estimator)
      ->check(CLI::IsMember({"unbiased", "biased", "algorithm1_literal"}));
  gramc->add_option("--refinement", ga.refinement);
  gramc->add_flag("--no-clamp", ga.no_clamp);
  gramc->add_option("--threads", ga.threads);
  gramc->add_option("--cache-dir", ga.cache_dir,
                    "block cache dir (or SKTREE_CACHE_DIR)");

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "train an SVM on a saved Gram");
  train->add_option("--gram", ta.gram, "gram prefix")->required();
  train->add_option("--dataset", ta.dataset, "dataset for labels")->required();
  train->add_option("--C", ta.C);
  train->add_option("--tol", ta.tol);
  train->add_option("--out", ta.out, "model json path")->required();

  EvaluateArgs ea;
  CLI::App* eval = app.add_subcommand(
      "evaluate", "k-fold cross-validated grid search and AUROC report");
  eval->add_option("--dataset", ea.dataset)->required();
  eval->add_option("--out", ea.out, "report json path")->required();
  eval->add_option("--roc", ea.roc, "pooled ROC csv path");
  eval->add_option("--config", ea.config_path, "experiment config json");
  eval->add_option("--folds", ea.folds);
  eval->add_option("--inner-folds", ea.inner_folds);
  eval->add_option("--seed", ea.seed);
  eval->add_option("--sigma-grid", ea.sigma_grid)->delimiter(',');
  eval->add_option("--bandwidth-scales", ea.bandwidth_scales)->delimiter(',');
  eval->add_option("--c-grid", ea.c_grid)->delimiter(',');
  eval->add_option("--base", ea.base)->check(CLI::IsMember({"linear", "rbf"}));
  eval->add_option("--estimator", ea.estimator)
      ->check(CLI::IsMember({"unbiased", "biased", "algorithm1_literal"}));
  eval->add_option("--refinement", ea.refinement);
  eval->add_option("--svm-tol", ea.svm_tol);
  eval->add_option("--threads", ea.threads);
  eval->add_option("--cache-dir", ea.cache_dir,
                   "block cache dir (or SKTREE_CACHE_DIR)");

  ReportArgs ra;
  CLI::App* reportc =
      app.add_subcommand("report", "summarize a saved evaluation report");
  reportc->add_option("--in", ra.in, "report json path")->required();
  reportc->add_option("--roc", ra.roc, "re-emit pooled ROC csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (ingest->parsed()) return run_ingest(ia, *ingest);
    if (synth->parsed()) return run_synth(sa);
    if (gramc->parsed()) return run_gram(ga);
    if (train->parsed()) return run_train(ta);
    if (eval->parsed()) return run_evaluate(ea, *eval);
    if (reportc->parsed()) return run_report(ra);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
