#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "sktree/ingest.hpp"
#include "sktree/mmd.hpp"
#include "sktree/svm.hpp"

namespace sktree {

/// Probability that a uniformly chosen positive is scored above a uniformly
/// chosen negative, ties counting one half; computed from average ranks.
/// Throws std::invalid_argument when only one class is present.
double auroc(const std::vector<double>& scores,
             const std::vector<int>& labels01);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

/// Points of the ROC step curve, threshold descending from +inf; first point
/// is (0, 0), last is (1, 1).
std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels01);

/// Stratified fold ids (one per tree, in [0, folds)). Within each class,
/// trees are ordered by a seeded content hash and dealt round-robin, so the
/// assignment depends only on (seed, tree content): permuting the dataset
/// permutes the fold ids identically. Throws when some class has fewer
/// members than folds (a fold would lose that class).
std::vector<int> stratified_folds(const std::vector<StreamingTree>& trees,
                                  const std::vector<int>& labels01, int folds,
                                  std::uint64_t seed);

struct ExperimentConfig {
  int folds = 5;
  int inner_folds = 3;
  std::vector<double> sigma_grid{0.01, 0.1, 1.0, 10.0};
  /// Multiples of the per-fold median-heuristic bandwidth (rbf base only).
  std::vector<double> bandwidth_scales{0.25, 1.0, 4.0};
  std::vector<double> c_grid{0.1, 1.0, 10.0, 100.0};
  std::uint64_t seed = 7;
  /// Estimator/clamp/refinement and the base-kernel kind; for an rbf base the
  /// bandwidth field is overwritten by the grid search.
  MmdConfig mmd = default_mmd();
  double svm_tol = 1e-3;
  int threads = 1;
  std::string cache_dir;  // optional on-disk block cache

  static MmdConfig default_mmd() {
    MmdConfig c;
    c.base = BaseKernel::rbf(1.0);
    return c;
  }

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  std::uint64_t hash() const;
};

struct FoldReport {
  int fold = 0;
  double auroc = 0.0;
  double sigma = 0.0;
  double bandwidth = 0.0;  // 0 for a linear base
  double C = 0.0;
  double inner_auroc = 0.0;  // selection score of the winning grid cell
  double psd_shift = 0.0;    // diagonal repair applied at refit
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

struct EvalReport {
  std::vector<FoldReport> folds;
  double mean_auroc = 0.0;
  double sd_auroc = 0.0;  // population convention over folds
  int outer_folds = 0;
  int inner_folds = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  /// Gram lookups that touched a test id during hyperparameter selection;
  /// must be zero, kept as a tripwire rather than an assumption.
  std::size_t audit_violations = 0;
  std::vector<RocPoint> roc;  // test decisions pooled over folds
  nlohmann::json timings;     // wall-clock; excluded from the canonical form

  nlohmann::json to_json() const;
  /// Deterministic content: everything except timings. Two runs with the same
  /// seed and dataset produce byte-identical canonical dumps.
  nlohmann::json canonical_json() const;
  void save(const std::string& path) const;
  void save_roc_csv(const std::string& path) const;
};

/// Outer stratified CV with an inner grid search per fold (sigma x bandwidth
/// x C, selection by mean inner-fold AUROC on the training split only), then
/// refit and test scoring. Branch-kernel blocks are memoized in memory and
/// optionally on disk, so the grid search costs one PDE pass per bandwidth.
EvalReport cross_validate(const LabeledDataset& dataset,
                          const ExperimentConfig& config);

/// Synthetic event logs pushed through the real ingestion pipeline: one tree
/// per (window, root), labels assigned via the malicious-root mechanism.
/// Profile "separable" draws the two classes from different branching rates
/// and channel mixes; "null" draws both from the same distribution.
LabeledDataset generate_synthetic(int n_per_class, std::uint64_t seed,
                                  const std::string& profile);

/// Generator parameters and per-class summary statistics for a synthetic
/// dataset, for inclusion in reports.
nlohmann::json synthetic_stats(const LabeledDataset& dataset,
                               const std::string& profile);

}  // namespace sktree
