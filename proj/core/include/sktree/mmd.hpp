#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "sktree/sig_kernel.hpp"
#include "sktree/tree.hpp"

namespace sktree {

/// How the squared MMD between two branch measures is estimated from the
/// pairwise branch-kernel blocks.
///
/// unbiased            within-tree sums exclude the diagonal, denominator
///                     m(m-1); the default.
/// biased              diagonals included, denominators m^2 / n^2; gives
///                     exactly 0 for a tree against itself.
/// algorithm1_literal  diagonals included but m(m-1) denominators. This mixes
///                     the two conventions and is not a consistent estimator;
///                     kept only so the combination can be reproduced and
///                     compared. Do not use for real runs.
enum class MmdEstimator { unbiased, biased, algorithm1_literal };

struct MmdConfig {
  MmdEstimator estimator = MmdEstimator::unbiased;
  bool clamp_negative = true;  // floor the squared distance at 0
  BaseKernel base = BaseKernel::linear();
  PdeGrid grid{};

  /// Hash of everything that affects numeric output.
  std::uint64_t hash() const;
  /// Hash of the part that determines branch-kernel blocks (base + grid only).
  std::uint64_t block_hash() const;

  nlohmann::json to_json() const;
  static MmdConfig from_json(const nlohmann::json& j);
};

/// Pairwise path-kernel evaluations between the branches of two trees:
/// entry (p, q) is the kernel of branch p of t1 and branch q of t2. For
/// content-equal trees the block is evaluated on one triangle and mirrored,
/// so it is symmetric by construction.
Eigen::MatrixXd branch_kernel_block(const StreamingTree& t1,
                                    const StreamingTree& t2,
                                    const MmdConfig& config);

/// Squared MMD between the empirical branch measures, from precomputed
/// blocks: k11 within t1, k22 within t2, k12 across. Single-branch trees fall
/// back to the biased within-term (the m(m-1) denominator is undefined).
double mmd_squared_from_blocks(const Eigen::MatrixXd& k11,
                               const Eigen::MatrixXd& k22,
                               const Eigen::MatrixXd& k12,
                               const MmdConfig& config);

double mmd_squared(const StreamingTree& t1, const StreamingTree& t2,
                   const MmdConfig& config);

/// exp(-sigma^2 * d^2) lifted to a kernel on trees. sigma must be positive.
double tree_kernel_sigma(const StreamingTree& t1, const StreamingTree& t2,
                         double sigma, const MmdConfig& config);

inline double tree_kernel_sigma_from_mmd(double mmd_sq, double sigma) {
  return std::exp(-sigma * sigma * mmd_sq);
}

struct GramOptions {
  int threads = 1;
  std::string cache_dir;  // empty disables the on-disk block cache
};

/// Diagonal shift that makes the matrix positive semidefinite with a small
/// safety margin: max(0, -lambda_min + 1e-10).
double psd_shift_for(const Eigen::MatrixXd& m);

/// Gram matrix of tree-kernel values plus everything needed to reuse or audit
/// it. `values` holds the raw kernel entries; the PSD repair shift is recorded
/// but not applied — consumers add it to the diagonal when a positive
/// semidefinite matrix is required (the SVM trainer does this).
struct GramMatrix {
  Eigen::MatrixXd values;
  double sigma = 1.0;
  MmdConfig config;
  double psd_shift = 0.0;
  std::vector<std::uint64_t> tree_ids;  // content hashes, row order
  std::size_t single_branch_fallbacks = 0;

  Eigen::Index size() const { return values.rows(); }

  /// Writes <prefix>.csv (matrix, full precision) and <prefix>.json (sidecar
  /// with sigma, config, psd_shift, tree ids).
  void save(const std::string& prefix) const;
  static GramMatrix load(const std::string& prefix);
};

/// Memoizing source of branch-kernel blocks over a fixed tree list: an
/// in-memory map keyed by (config block hash, pair), backed by the optional
/// on-disk cache. Thread-safe; concurrent misses may compute a block twice
/// but always agree on the value.
class BlockProvider {
 public:
  explicit BlockProvider(const std::vector<StreamingTree>& trees,
                         std::string cache_dir = "");

  /// Block for the ordered pair i <= j (callers wanting (j, i) transpose or,
  /// for sums, use it as is).
  const Eigen::MatrixXd& block(std::size_t i, std::size_t j,
                               const MmdConfig& config);

  /// Squared MMD between trees i and j; symmetric in (i, j).
  double mmd_entry(std::size_t i, std::size_t j, const MmdConfig& config);

  std::size_t size() const { return trees_->size(); }

 private:
  const std::vector<StreamingTree>* trees_;
  std::vector<std::uint64_t> hashes_;
  std::string cache_dir_;
  std::mutex mu_;
  std::map<std::tuple<std::uint64_t, std::size_t, std::size_t>, Eigen::MatrixXd>
      memo_;
};

/// Symmetric matrix of squared MMD values over the dataset; entry (i, j)
/// matches mmd_squared(trees[i], trees[j], config). Blocks are evaluated once
/// per unordered pair, optionally in parallel and through the disk cache.
Eigen::MatrixXd mmd_matrix(const std::vector<StreamingTree>& trees,
                           const MmdConfig& config,
                           const GramOptions& options = {});

/// Algorithm: per-tree self blocks, per-pair cross blocks, squared MMD, then
/// exp(-sigma^2 *). Symmetric by construction; psd_shift precomputed.
GramMatrix gram(const std::vector<StreamingTree>& trees, double sigma,
                const MmdConfig& config, const GramOptions& options = {});

/// Gram from an already computed squared-MMD matrix (grid searches reuse one
/// mmd_matrix across many sigmas).
GramMatrix gram_from_mmd(const Eigen::MatrixXd& mmd, double sigma,
                         const MmdConfig& config,
                         std::vector<std::uint64_t> tree_ids = {});

}  // namespace sktree
