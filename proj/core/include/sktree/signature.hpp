#pragma once

#include <Eigen/Dense>

#include "sktree/tensor.hpp"
#include "sktree/tree.hpp"

namespace sktree {

/// Signature of a single linear segment with the given increment: level k is
/// increment^{tensor k} / k!.
TruncatedTensor segment_signature(const Eigen::VectorXd& increment,
                                  int truncation);

/// Truncated signature of a piecewise-linear path, exact for such paths:
/// Chen concatenation of the per-segment signatures. Depends only on the
/// sequence of knot values, not on the parametrization.
TruncatedTensor truncated_signature(const PiecewiseLinearPath& path,
                                    int truncation);

/// Truncated signature of a knot-value sequence (rows are points in R^d).
TruncatedTensor truncated_signature(const PointMatrix& knots, int truncation);

/// Truncated expected signature of the empirical measure that puts equal mass
/// on every branch of the tree. Computed recursively: a node contributes the
/// signature of its own segment (including the connecting segment from the
/// parent), Chen-multiplied with the branch-count-weighted mean over children.
/// Equals the arithmetic mean of the branch signatures.
TruncatedTensor expected_signature(const StreamingTree& tree, int truncation);

}  // namespace sktree
