#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "sktree/tree.hpp"

namespace sktree {

/// Static kernel applied to path values in R^d.
class BaseKernel {
 public:
  enum class Kind { linear, rbf };

  static BaseKernel linear() { return BaseKernel(Kind::linear, 0.0); }
  static BaseKernel rbf(double bandwidth);

  Kind kind() const { return kind_; }
  double bandwidth() const { return bandwidth_; }

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                    const Eigen::Ref<const Eigen::RowVectorXd>& y) const;

  /// Stable content hash; feeds cache keys and config hashes.
  std::uint64_t hash() const;

  bool operator==(const BaseKernel& other) const {
    return kind_ == other.kind_ && bandwidth_ == other.bandwidth_;
  }

 private:
  BaseKernel(Kind kind, double bandwidth) : kind_(kind), bandwidth_(bandwidth) {}

  Kind kind_;
  double bandwidth_;
};

/// Discretization control for the kernel solve: every knot interval of each
/// path is split into 2^refinement equal steps.
struct PdeGrid {
  int refinement = 2;
};

/// Kernel of two paths defined as the inner product of their full (untruncated)
/// signatures under the lifted base kernel. Solved as a hyperbolic
/// boundary-value problem on the product grid with a second-order
/// finite-difference scheme; cost is O(#cells) with two rolling rows.
///
/// Constant (single-knot) paths give exactly 1. Throws std::runtime_error if
/// the base kernel produces a non-finite value, std::invalid_argument on
/// dimension mismatch or refinement outside [0, 10].
double signature_kernel(const PiecewiseLinearPath& x,
                        const PiecewiseLinearPath& y, const BaseKernel& base,
                        const PdeGrid& grid);

/// Median pairwise distance over knot values collected from every node of the
/// given trees, deterministically subsampled to at most max_points points.
/// Falls back to the smallest positive distance, then 1.0, if the median is
/// zero or fewer than two points exist.
double median_heuristic_bandwidth(const std::vector<StreamingTree>& trees,
                                  std::size_t max_points = 500);

}  // namespace sktree
