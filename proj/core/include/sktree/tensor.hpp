#pragma once

#include <Eigen/Dense>

#include <vector>

namespace sktree {

/// Element of the graded tensor algebra over R^d truncated at level m.
/// Level k is stored flat with row-major multi-index, size d^k; level 0 is a
/// scalar (equal to 1 for any signature).
class TruncatedTensor {
 public:
  TruncatedTensor(int dim, int truncation);
  static TruncatedTensor unit(int dim, int truncation);

  int dim() const { return dim_; }
  int truncation() const { return truncation_; }
  Eigen::VectorXd& level(int k) { return levels_[static_cast<std::size_t>(k)]; }
  const Eigen::VectorXd& level(int k) const {
    return levels_[static_cast<std::size_t>(k)];
  }
  double scalar() const { return levels_[0](0); }

  TruncatedTensor& operator+=(const TruncatedTensor& other);
  TruncatedTensor& operator*=(double s);

  /// Largest absolute entry difference over all levels.
  double max_abs_diff(const TruncatedTensor& other) const;

 private:
  int dim_;
  int truncation_;
  std::vector<Eigen::VectorXd> levels_;
};

/// Graded (Chen) product: level k of the output is sum over i+j=k of the
/// outer product of a's level i with b's level j, truncated at a.truncation().
TruncatedTensor chen_product(const TruncatedTensor& a, const TruncatedTensor& b);

/// Sum over levels of the Euclidean inner product of matching levels.
double inner(const TruncatedTensor& a, const TruncatedTensor& b);

}  // namespace sktree
