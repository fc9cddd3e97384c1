#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <vector>

namespace sktree {

// Row-major so that per-point rows are contiguous; kernel inner loops walk rows.
using PointMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A multivariate time series: rows (t, v_1, ..., v_{d-1}) with strictly
/// increasing timestamps. dim() is d, i.e. the time column counts.
class TimeSeries {
 public:
  explicit TimeSeries(PointMatrix knots);

  int dim() const { return static_cast<int>(knots_.cols()); }
  Eigen::Index size() const { return knots_.rows(); }
  double time(Eigen::Index i) const { return knots_(i, 0); }
  double first_time() const { return knots_(0, 0); }
  double last_time() const { return knots_(knots_.rows() - 1, 0); }
  const PointMatrix& knots() const { return knots_; }

  bool operator==(const TimeSeries& other) const {
    return knots_.rows() == other.knots_.rows() &&
           knots_.cols() == other.knots_.cols() && knots_ == other.knots_;
  }

 private:
  PointMatrix knots_;
};

/// A node carrying a time series plus an ordered list of subtrees. Children
/// continue the parent's history: each child's first timestamp is strictly
/// greater than the parent's last. Immutable after construction.
class StreamingTree {
 public:
  explicit StreamingTree(TimeSeries series,
                         std::vector<StreamingTree> children = {});

  const TimeSeries& series() const { return series_; }
  const std::vector<StreamingTree>& children() const { return children_; }
  bool is_leaf() const { return children_.empty(); }
  int dim() const { return series_.dim(); }

  /// Number of leaves, i.e. number of branches.
  std::size_t branch_count() const;
  /// Total knot points across all nodes.
  std::size_t event_count() const;

  nlohmann::json to_json() const;
  static StreamingTree from_json(const nlohmann::json& j);

  bool operator==(const StreamingTree& other) const;

 private:
  TimeSeries series_;
  std::vector<StreamingTree> children_;
};

/// One root-to-leaf history of a streaming tree, concatenated into a single
/// series starting at the tree's first timestamp.
struct Branch {
  TimeSeries series;
};

/// All branches of a tree in depth-first order (children in creation order).
std::vector<Branch> enumerate_branches(const StreamingTree& tree);

/// Continuous piecewise-linear interpolation of a knot sequence. Values may be
/// any vectors in R^d; the parameter is strictly increasing. Branch paths use
/// the timestamps as the parameter and carry time as coordinate 0.
class PiecewiseLinearPath {
 public:
  PiecewiseLinearPath(Eigen::VectorXd params, PointMatrix values);
  static PiecewiseLinearPath from_branch(const Branch& branch);

  double t_first() const { return params_(0); }
  double t_last() const { return params_(params_.size() - 1); }
  Eigen::Index knot_count() const { return params_.size(); }
  int dim() const { return static_cast<int>(values_.cols()); }
  const Eigen::VectorXd& params() const { return params_; }
  const PointMatrix& values() const { return values_; }

  /// Evaluate at parameter t in [t_first, t_last]; exact at knots, affine in
  /// between. Throws std::invalid_argument outside the domain.
  Eigen::VectorXd at(double t) const;

  /// Knot values with each interval subdivided into 2^refinement equal parts.
  /// Rows are sample points; knots appear exactly.
  PointMatrix sample_dyadic(int refinement) const;

 private:
  Eigen::VectorXd params_;
  PointMatrix values_;
};

inline PiecewiseLinearPath interpolate(const Branch& branch) {
  return PiecewiseLinearPath::from_branch(branch);
}

}  // namespace sktree
