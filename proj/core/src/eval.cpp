#include "sktree/eval.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "sktree/hash.hpp"

namespace sktree {

namespace {

void check_binary_labels(const std::vector<int>& labels01) {
  for (const int l : labels01) {
    if (l != 0 && l != 1) {
      throw std::invalid_argument("labels must be 0 or 1");
    }
  }
}

}  // namespace

double auroc(const std::vector<double>& scores,
             const std::vector<int>& labels01) {
  if (scores.size() != labels01.size()) {
    throw std::invalid_argument("auroc: scores/labels length mismatch");
  }
  check_binary_labels(labels01);
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (const int l : labels01) pos += static_cast<std::size_t>(l);
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("auroc: need both classes");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Average-rank sum over positives; tied scores share their mean rank.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) +
                                   static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (labels01[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  const double q = static_cast<double>(neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels01) {
  if (scores.size() != labels01.size()) {
    throw std::invalid_argument("roc_points: scores/labels length mismatch");
  }
  check_binary_labels(labels01);
  std::size_t pos = 0;
  for (const int l : labels01) pos += static_cast<std::size_t>(l);
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("roc_points: need both classes");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<RocPoint> out;
  out.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels01[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    out.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos),
                   threshold});
  }
  return out;
}

std::vector<int> stratified_folds(const std::vector<StreamingTree>& trees,
                                  const std::vector<int>& labels01, int folds,
                                  std::uint64_t seed) {
  if (trees.size() != labels01.size()) {
    throw std::invalid_argument("stratified_folds: trees/labels length mismatch");
  }
  if (folds < 2) throw std::invalid_argument("stratified_folds: folds must be >= 2");
  check_binary_labels(labels01);

  std::vector<int> fold_of(trees.size(), -1);
  for (const int cls : {0, 1}) {
    // Order class members by seeded content hash; deal round-robin. The fold
    // of a tree then depends only on its content and the class's hash
    // multiset, so dataset permutations do not move anyone.
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    for (std::size_t i = 0; i < trees.size(); ++i) {
      if (labels01[i] != cls) continue;
      keyed.emplace_back(hash_combine(seed, tree_content_hash(trees[i])), i);
    }
    if (keyed.size() < static_cast<std::size_t>(folds)) {
      throw std::invalid_argument(
          "stratified_folds: class " + std::to_string(cls) + " has " +
          std::to_string(keyed.size()) + " members, need at least " +
          std::to_string(folds) + " to keep every fold two-class");
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t r = 0; r < keyed.size(); ++r) {
      fold_of[keyed[r].second] = static_cast<int>(r % static_cast<std::size_t>(folds));
    }
  }
  return fold_of;
}

nlohmann::json ExperimentConfig::to_json() const {
  return nlohmann::json{{"folds", folds},
                        {"inner_folds", inner_folds},
                        {"sigma_grid", sigma_grid},
                        {"bandwidth_scales", bandwidth_scales},
                        {"c_grid", c_grid},
                        {"seed", seed},
                        {"mmd", mmd.to_json()},
                        {"svm_tol", svm_tol},
                        {"threads", threads},
                        {"cache_dir", cache_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("folds")) c.folds = j.at("folds").get<int>();
  if (j.contains("inner_folds")) c.inner_folds = j.at("inner_folds").get<int>();
  if (j.contains("sigma_grid")) {
    c.sigma_grid = j.at("sigma_grid").get<std::vector<double>>();
  }
  if (j.contains("bandwidth_scales")) {
    c.bandwidth_scales = j.at("bandwidth_scales").get<std::vector<double>>();
  }
  if (j.contains("c_grid")) c.c_grid = j.at("c_grid").get<std::vector<double>>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("mmd")) c.mmd = MmdConfig::from_json(j.at("mmd"));
  if (j.contains("svm_tol")) c.svm_tol = j.at("svm_tol").get<double>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
  return c;
}

std::uint64_t ExperimentConfig::hash() const {
  // threads and cache_dir do not affect results and stay out of the hash.
  std::uint64_t h = fnv1a("experiment");
  h = hash_combine(h, static_cast<std::uint64_t>(folds));
  h = hash_combine(h, static_cast<std::uint64_t>(inner_folds));
  for (const double s : sigma_grid) h = hash_double(h, s);
  for (const double s : bandwidth_scales) h = hash_double(h, s);
  for (const double s : c_grid) h = hash_double(h, s);
  h = hash_combine(h, seed);
  h = hash_combine(h, mmd.hash());
  h = hash_double(h, svm_tol);
  return h;
}

namespace {

nlohmann::json roc_to_json(const std::vector<RocPoint>& roc) {
  nlohmann::json arr = nlohmann::json::array();
  for (const RocPoint& p : roc) {
    // JSON has no infinity; the leading threshold is emitted as a string.
    nlohmann::json t = p.threshold;
    if (std::isinf(p.threshold)) t = p.threshold > 0 ? "inf" : "-inf";
    arr.push_back({p.fpr, p.tpr, t});
  }
  return arr;
}

nlohmann::json fold_to_json(const FoldReport& f) {
  return nlohmann::json{{"fold", f.fold},
                        {"auroc", f.auroc},
                        {"sigma", f.sigma},
                        {"bandwidth", f.bandwidth},
                        {"C", f.C},
                        {"inner_auroc", f.inner_auroc},
                        {"psd_shift", f.psd_shift},
                        {"train_size", f.train_size},
                        {"test_size", f.test_size}};
}

}  // namespace

nlohmann::json EvalReport::canonical_json() const {
  nlohmann::json folds_j = nlohmann::json::array();
  for (const FoldReport& f : folds) folds_j.push_back(fold_to_json(f));
  return nlohmann::json{{"folds", folds_j},
                        {"mean_auroc", mean_auroc},
                        {"sd_auroc", sd_auroc},
                        {"outer_folds", outer_folds},
                        {"inner_folds", inner_folds},
                        {"seed", seed},
                        {"config_hash", config_hash},
                        {"audit_violations", audit_violations},
                        {"roc", roc_to_json(roc)}};
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = canonical_json();
  j["timings"] = timings;
  return j;
}

void EvalReport::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("EvalReport: cannot write " + path);
  out << to_json().dump(2) << '\n';
}

void EvalReport::save_roc_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("EvalReport: cannot write " + path);
  out << "fpr,tpr,threshold\n";
  char buf[128];
  for (const RocPoint& p : roc) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.fpr, p.tpr,
                  p.threshold);
    out << buf;
  }
}

namespace {

double round_to_sig(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  const double mag =
      std::pow(10.0, std::floor(std::log10(std::abs(x))) - (digits - 1));
  return std::round(x / mag) * mag;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m,
                          const std::vector<std::size_t>& rows,
                          const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          m(static_cast<Eigen::Index>(rows[r]),
            static_cast<Eigen::Index>(cols[c]));
    }
  }
  return out;
}

}  // namespace

EvalReport cross_validate(const LabeledDataset& dataset,
                          const ExperimentConfig& config) {
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();

  if (dataset.size() == 0) {
    throw std::invalid_argument("cross_validate: empty dataset");
  }
  if (dataset.trees.size() != dataset.labels.size()) {
    throw std::invalid_argument("cross_validate: trees/labels length mismatch");
  }
  if (config.folds < 2 || config.inner_folds < 2) {
    throw std::invalid_argument("cross_validate: need folds >= 2 and inner_folds >= 2");
  }
  if (config.sigma_grid.empty() || config.c_grid.empty()) {
    throw std::invalid_argument("cross_validate: empty hyperparameter grid");
  }
  const bool rbf_base = config.mmd.base.kind() == BaseKernel::Kind::rbf;
  if (rbf_base && config.bandwidth_scales.empty()) {
    throw std::invalid_argument("cross_validate: empty bandwidth grid");
  }

  const std::vector<int> fold_of =
      stratified_folds(dataset.trees, dataset.labels, config.folds, config.seed);
  BlockProvider blocks(dataset.trees, config.cache_dir);

  EvalReport report;
  report.outer_folds = config.folds;
  report.inner_folds = config.inner_folds;
  report.seed = config.seed;
  report.config_hash = config.hash();

  std::vector<double> pooled_scores;
  std::vector<int> pooled_labels;
  std::vector<double> fold_ms;

  for (int f = 0; f < config.folds; ++f) {
    const auto t_fold = Clock::now();

    std::vector<std::size_t> train_ids, test_ids;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      (fold_of[i] == f ? test_ids : train_ids).push_back(i);
    }

    std::vector<char> forbidden(dataset.size(), 0);
    for (const std::size_t id : test_ids) forbidden[id] = 1;
    std::size_t violations = 0;

    // Every squared-MMD value used for hyperparameter selection flows through
    // here; touching a test tree trips the audit counter.
    auto audited_mmd_submatrix = [&](const std::vector<std::size_t>& ids,
                                     const MmdConfig& cfg) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(ids.size()),
                        static_cast<Eigen::Index>(ids.size()));
      for (std::size_t a = 0; a < ids.size(); ++a) {
        for (std::size_t b = a; b < ids.size(); ++b) {
          if (forbidden[ids[a]] != 0 || forbidden[ids[b]] != 0) ++violations;
          const double d2 = blocks.mmd_entry(ids[a], ids[b], cfg);
          m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = d2;
          m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = d2;
        }
      }
      return m;
    };

    std::vector<StreamingTree> train_trees;
    std::vector<int> train_labels;
    train_trees.reserve(train_ids.size());
    for (const std::size_t id : train_ids) {
      train_trees.push_back(dataset.trees[id]);
      train_labels.push_back(dataset.labels[id]);
    }

    // Bandwidth grid: per-fold median heuristic, rounded to 2 significant
    // digits so equal-enough folds share cache entries.
    std::vector<double> bandwidths;
    if (rbf_base) {
      const double med =
          round_to_sig(median_heuristic_bandwidth(train_trees), 2);
      for (const double s : config.bandwidth_scales) bandwidths.push_back(med * s);
    } else {
      bandwidths.push_back(0.0);
    }

    const std::uint64_t inner_seed =
        hash_combine(hash_combine(config.seed, fnv1a("inner")), static_cast<std::uint64_t>(f));
    const std::vector<int> inner_fold_of = stratified_folds(
        train_trees, train_labels, config.inner_folds, inner_seed);

    // Inner-fold index sets as positions within train_ids.
    std::vector<std::vector<std::size_t>> inner_train(static_cast<std::size_t>(config.inner_folds)),
        inner_test(static_cast<std::size_t>(config.inner_folds));
    for (std::size_t p = 0; p < train_ids.size(); ++p) {
      for (int g = 0; g < config.inner_folds; ++g) {
        (inner_fold_of[p] == g ? inner_test : inner_train)[static_cast<std::size_t>(g)]
            .push_back(p);
      }
    }

    double best_score = -1.0;
    double best_sigma = config.sigma_grid.front();
    double best_bw = bandwidths.front();
    double best_c = config.c_grid.front();
    std::map<double, Eigen::MatrixXd> mmd_by_bw;

    for (const double bw : bandwidths) {
      MmdConfig cfg = config.mmd;
      if (rbf_base) cfg.base = BaseKernel::rbf(bw);
      const Eigen::MatrixXd mmd_train = audited_mmd_submatrix(train_ids, cfg);
      mmd_by_bw.emplace(bw, mmd_train);

      for (const double sigma : config.sigma_grid) {
        const Eigen::MatrixXd k_train =
            (-sigma * sigma * mmd_train.array()).exp().matrix();

        // Scores per C value, pooled decision-AUROC per inner fold.
        std::vector<std::vector<double>> fold_aurocs(config.c_grid.size());
        for (int g = 0; g < config.inner_folds; ++g) {
          const auto& itr = inner_train[static_cast<std::size_t>(g)];
          const auto& ite = inner_test[static_cast<std::size_t>(g)];
          Eigen::MatrixXd k_sub = submatrix(k_train, itr, itr);
          k_sub.diagonal().array() += psd_shift_for(k_sub);
          const Eigen::MatrixXd k_cross = submatrix(k_train, ite, itr);
          std::vector<int> y_tr, y_te;
          for (const std::size_t p : itr) y_tr.push_back(train_labels[p]);
          for (const std::size_t p : ite) y_te.push_back(train_labels[p]);

          for (std::size_t ci = 0; ci < config.c_grid.size(); ++ci) {
            const SvmModel model =
                train_svm_raw(k_sub, y_tr, config.c_grid[ci], config.svm_tol);
            std::vector<double> scores;
            scores.reserve(ite.size());
            for (Eigen::Index r = 0; r < k_cross.rows(); ++r) {
              scores.push_back(
                  decision_value(model, k_cross.row(r).transpose()));
            }
            fold_aurocs[ci].push_back(auroc(scores, y_te));
          }
        }
        for (std::size_t ci = 0; ci < config.c_grid.size(); ++ci) {
          double mean = 0.0;
          for (const double a : fold_aurocs[ci]) mean += a;
          mean /= static_cast<double>(fold_aurocs[ci].size());
          if (mean > best_score) {
            best_score = mean;
            best_sigma = sigma;
            best_bw = bw;
            best_c = config.c_grid[ci];
          }
        }
      }
    }

    // Refit on the full training split with the winning cell.
    MmdConfig best_cfg = config.mmd;
    if (rbf_base) best_cfg.base = BaseKernel::rbf(best_bw);
    const Eigen::MatrixXd& mmd_best = mmd_by_bw.at(best_bw);
    Eigen::MatrixXd k_refit =
        (-best_sigma * best_sigma * mmd_best.array()).exp().matrix();
    const double shift = psd_shift_for(k_refit);
    k_refit.diagonal().array() += shift;
    const SvmModel model =
        train_svm_raw(k_refit, train_labels, best_c, config.svm_tol);

    // Score the held-out fold.
    std::vector<double> test_scores;
    std::vector<int> test_labels;
    test_scores.reserve(test_ids.size());
    for (const std::size_t id : test_ids) {
      Eigen::VectorXd row(static_cast<Eigen::Index>(train_ids.size()));
      for (std::size_t c = 0; c < train_ids.size(); ++c) {
        row(static_cast<Eigen::Index>(c)) = tree_kernel_sigma_from_mmd(
            blocks.mmd_entry(id, train_ids[c], best_cfg), best_sigma);
      }
      test_scores.push_back(decision_value(model, row));
      test_labels.push_back(dataset.labels[id]);
    }

    FoldReport fr;
    fr.fold = f;
    fr.auroc = auroc(test_scores, test_labels);
    fr.sigma = best_sigma;
    fr.bandwidth = rbf_base ? best_bw : 0.0;
    fr.C = best_c;
    fr.inner_auroc = best_score;
    fr.psd_shift = shift;
    fr.train_size = train_ids.size();
    fr.test_size = test_ids.size();
    report.folds.push_back(fr);
    report.audit_violations += violations;

    pooled_scores.insert(pooled_scores.end(), test_scores.begin(),
                         test_scores.end());
    pooled_labels.insert(pooled_labels.end(), test_labels.begin(),
                         test_labels.end());
    fold_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() -
                                                                t_fold)
                          .count());
  }

  double mean = 0.0;
  for (const FoldReport& fr : report.folds) mean += fr.auroc;
  mean /= static_cast<double>(report.folds.size());
  double var = 0.0;
  for (const FoldReport& fr : report.folds) {
    var += (fr.auroc - mean) * (fr.auroc - mean);
  }
  var /= static_cast<double>(report.folds.size());
  report.mean_auroc = mean;
  report.sd_auroc = std::sqrt(var);
  report.roc = roc_points(pooled_scores, pooled_labels);
  report.timings = nlohmann::json{
      {"total_ms",
       std::chrono::duration<double, std::milli>(Clock::now() - t_start).count()},
      {"per_fold_ms", fold_ms}};
  return report;
}

namespace {

struct SynthClassParams {
  double p_branch = 0.1;
  int max_creates = 5;
  bool chain_newest = false;          // spawn from the newest process: depth
  std::array<double, 20> channel_weights{};
};

struct SynthParams {
  int min_events = 12;
  int max_events = 28;
  SynthClassParams cls[2];
};

SynthParams profile_params(const std::string& profile) {
  SynthParams p;
  SynthClassParams benign;
  benign.p_branch = 0.05;
  benign.max_creates = 2;
  benign.chain_newest = false;
  // spread over the non-file channels
  benign.channel_weights = {0.5, 0.5, 0.5, 1.5, 0.5, 0.5, 2.0, 2.0, 1.5, 1.5,
                            2.0, 1.0, 1.0, 1.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0};

  if (profile == "null") {
    p.cls[0] = benign;
    p.cls[1] = benign;
    return p;
  }
  if (profile == "separable") {
    SynthClassParams hot;
    hot.p_branch = 0.45;
    hot.max_creates = 5;
    hot.chain_newest = true;
    // bursty file activity
    hot.channel_weights = {6.0, 4.0, 5.0, 2.0, 3.0, 8.0, 0.3, 0.3, 0.3, 0.5,
                           0.3, 0.3, 0.5, 0.5, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
    p.cls[0] = benign;
    p.cls[1] = hot;
    return p;
  }
  throw std::invalid_argument("generate_synthetic: unknown profile '" + profile +
                              "' (expected 'separable' or 'null')");
}

}  // namespace

LabeledDataset generate_synthetic(int n_per_class, std::uint64_t seed,
                                  const std::string& profile) {
  if (n_per_class < 1) {
    throw std::invalid_argument("generate_synthetic: n_per_class must be >= 1");
  }
  const SynthParams params = profile_params(profile);
  const EventTypeMap type_map;  // default table drives both synth and ingest

  std::vector<HostEvent> events;
  std::unordered_set<std::string> malicious;

  const int total = 2 * n_per_class;
  for (int k = 0; k < total; ++k) {
    const int cls = k % 2;
    const SynthClassParams& cp = params.cls[cls];
    std::mt19937_64 rng(hash_combine(hash_combine(fnv1a("synth"), seed),
                                     static_cast<std::uint64_t>(k)));

    // One tree per 15-minute window; windows are disjoint across trees.
    const std::int64_t window_ms = 900ll * 1000ll;
    const std::int64_t t0 = static_cast<std::int64_t>(k) * window_ms;
    std::uniform_int_distribution<int> n_events_dist(params.min_events,
                                                     params.max_events);
    const int n_events = n_events_dist(rng);
    std::uniform_int_distribution<std::int64_t> time_dist(
        t0 + 1000, t0 + window_ms - 1000);
    std::vector<std::int64_t> times(static_cast<std::size_t>(n_events));
    for (auto& t : times) t = time_dist(rng);
    std::sort(times.begin(), times.end());

    const std::string root = "p" + std::to_string(k) + "root";
    if (cls == 1) malicious.insert(root);
    std::vector<std::string> live{root};
    int creates = 0;

    std::discrete_distribution<int> channel_dist(cp.channel_weights.begin(),
                                                 cp.channel_weights.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int e = 0; e < n_events; ++e) {
      HostEvent ev;
      ev.hostname = "synthetic-host";
      ev.timestamp_ms = times[static_cast<std::size_t>(e)];
      const bool branch =
          creates < cp.max_creates && unit(rng) < cp.p_branch && e > 0;
      auto pick_actor = [&]() -> const std::string& {
        if (cp.chain_newest) return live.back();
        std::uniform_int_distribution<std::size_t> d(0, live.size() - 1);
        return live[d(rng)];
      };
      if (branch) {
        ev.object = "PROCESS";
        ev.action = "CREATE";
        ev.actor_id = pick_actor();
        ev.object_id = "p" + std::to_string(k) + "c" + std::to_string(creates);
        live.push_back(ev.object_id);
        ++creates;
      } else {
        const int ch = channel_dist(rng);
        const auto& [object, action] =
            type_map.pairs()[static_cast<std::size_t>(ch)];
        ev.object = object;
        ev.action = action;
        ev.actor_id = pick_actor();
        ev.object_id = "obj" + std::to_string(k) + "-" + std::to_string(e);
      }
      events.push_back(std::move(ev));
    }
  }

  FeaturizationConfig config;  // defaults: 900 s windows, 2-200 filter, normalize
  return build_process_trees(std::move(events), malicious, config);
}

nlohmann::json synthetic_stats(const LabeledDataset& dataset,
                               const std::string& profile) {
  const SynthParams params = profile_params(profile);
  nlohmann::json per_class = nlohmann::json::array();
  for (const int cls : {0, 1}) {
    std::size_t count = 0, branches = 0, knots = 0, consumed = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.labels[i] != cls) continue;
      ++count;
      branches += dataset.trees[i].branch_count();
      knots += dataset.trees[i].event_count();
      consumed += dataset.meta[i].consumed_events;
    }
    const double denom = count == 0 ? 1.0 : static_cast<double>(count);
    per_class.push_back(
        {{"label", cls},
         {"trees", count},
         {"mean_branches", static_cast<double>(branches) / denom},
         {"mean_knots", static_cast<double>(knots) / denom},
         {"mean_consumed_events", static_cast<double>(consumed) / denom},
         {"p_branch", params.cls[cls].p_branch},
         {"max_creates", params.cls[cls].max_creates},
         {"chain_newest", params.cls[cls].chain_newest}});
  }
  return nlohmann::json{{"profile", profile},
                        {"event_range", {params.min_events, params.max_events}},
                        {"classes", per_class}};
}

}  // namespace sktree
