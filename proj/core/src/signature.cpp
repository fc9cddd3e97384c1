#include "sktree/signature.hpp"

#include <stdexcept>

namespace sktree {

TruncatedTensor segment_signature(const Eigen::VectorXd& increment,
                                  int truncation) {
  const int d = static_cast<int>(increment.size());
  TruncatedTensor sig = TruncatedTensor::unit(d, truncation);
  for (int k = 1; k <= truncation; ++k) {
    const Eigen::VectorXd& prev = sig.level(k - 1);
    Eigen::VectorXd& cur = sig.level(k);
    const double inv_k = 1.0 / static_cast<double>(k);
    for (Eigen::Index alpha = 0; alpha < prev.size(); ++alpha) {
      cur.segment(alpha * d, d) = (prev(alpha) * inv_k) * increment;
    }
  }
  return sig;
}

TruncatedTensor truncated_signature(const PointMatrix& knots, int truncation) {
  if (knots.rows() < 1) {
    throw std::invalid_argument("truncated_signature: empty knot sequence");
  }
  const int d = static_cast<int>(knots.cols());
  TruncatedTensor sig = TruncatedTensor::unit(d, truncation);
  for (Eigen::Index i = 0; i + 1 < knots.rows(); ++i) {
    const Eigen::VectorXd inc = (knots.row(i + 1) - knots.row(i)).transpose();
    sig = chen_product(sig, segment_signature(inc, truncation));
  }
  return sig;
}

TruncatedTensor truncated_signature(const PiecewiseLinearPath& path,
                                    int truncation) {
  return truncated_signature(path.values(), truncation);
}

namespace {

// Expected signature of the sub-measure rooted at `node`. The node's series is
// prefixed with the parent's last knot so the connecting segment is part of the
// node's own contribution. Children are weighted by their branch counts, which
// makes the recursion equal the plain arithmetic mean over branch signatures.
TruncatedTensor expected_rec(const StreamingTree& node,
                             const Eigen::RowVectorXd* incoming,
                             int truncation) {
  const PointMatrix& own = node.series().knots();
  TruncatedTensor node_sig(node.dim(), truncation);
  if (incoming != nullptr) {
    PointMatrix knots(own.rows() + 1, own.cols());
    knots.row(0) = *incoming;
    knots.bottomRows(own.rows()) = own;
    node_sig = truncated_signature(knots, truncation);
  } else {
    node_sig = truncated_signature(own, truncation);
  }
  if (node.is_leaf()) return node_sig;

  const Eigen::RowVectorXd last = own.row(own.rows() - 1);
  double total = 0.0;
  for (const StreamingTree& child : node.children()) {
    total += static_cast<double>(child.branch_count());
  }
  TruncatedTensor mix(node.dim(), truncation);
  for (const StreamingTree& child : node.children()) {
    TruncatedTensor part = expected_rec(child, &last, truncation);
    part *= static_cast<double>(child.branch_count()) / total;
    mix += part;
  }
  return chen_product(node_sig, mix);
}

}  // namespace

TruncatedTensor expected_signature(const StreamingTree& tree, int truncation) {
  return expected_rec(tree, nullptr, truncation);
}

}  // namespace sktree
