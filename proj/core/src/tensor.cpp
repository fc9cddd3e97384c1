#include "sktree/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace sktree {

namespace {

Eigen::Index pow_index(int d, int k) {
  Eigen::Index n = 1;
  for (int i = 0; i < k; ++i) n *= d;
  return n;
}

void check_compatible(const TruncatedTensor& a, const TruncatedTensor& b) {
  if (a.dim() != b.dim() || a.truncation() != b.truncation()) {
    throw std::invalid_argument(
        "TruncatedTensor: dimension or truncation mismatch");
  }
}

}  // namespace

TruncatedTensor::TruncatedTensor(int dim, int truncation)
    : dim_(dim), truncation_(truncation) {
  if (dim < 1) throw std::invalid_argument("TruncatedTensor: dim must be >= 1");
  if (truncation < 0) {
    throw std::invalid_argument("TruncatedTensor: truncation must be >= 0");
  }
  levels_.reserve(static_cast<std::size_t>(truncation) + 1);
  for (int k = 0; k <= truncation; ++k) {
    levels_.push_back(Eigen::VectorXd::Zero(pow_index(dim, k)));
  }
}

TruncatedTensor TruncatedTensor::unit(int dim, int truncation) {
  TruncatedTensor t(dim, truncation);
  t.levels_[0](0) = 1.0;
  return t;
}

TruncatedTensor& TruncatedTensor::operator+=(const TruncatedTensor& other) {
  check_compatible(*this, other);
  for (int k = 0; k <= truncation_; ++k) {
    levels_[static_cast<std::size_t>(k)] +=
        other.levels_[static_cast<std::size_t>(k)];
  }
  return *this;
}

TruncatedTensor& TruncatedTensor::operator*=(double s) {
  for (auto& lvl : levels_) lvl *= s;
  return *this;
}

double TruncatedTensor::max_abs_diff(const TruncatedTensor& other) const {
  check_compatible(*this, other);
  double worst = 0.0;
  for (int k = 0; k <= truncation_; ++k) {
    const double m = (levels_[static_cast<std::size_t>(k)] -
                      other.levels_[static_cast<std::size_t>(k)])
                         .cwiseAbs()
                         .maxCoeff();
    worst = std::max(worst, m);
  }
  return worst;
}

TruncatedTensor chen_product(const TruncatedTensor& a,
                             const TruncatedTensor& b) {
  check_compatible(a, b);
  const int m = a.truncation();
  TruncatedTensor out(a.dim(), m);
  for (int k = 0; k <= m; ++k) {
    Eigen::VectorXd& dst = out.level(k);
    for (int i = 0; i <= k; ++i) {
      const int j = k - i;
      const Eigen::VectorXd& ai = a.level(i);
      const Eigen::VectorXd& bj = b.level(j);
      const Eigen::Index nb = bj.size();
      // dst[alpha * d^j + beta] += ai[alpha] * bj[beta]
      for (Eigen::Index alpha = 0; alpha < ai.size(); ++alpha) {
        dst.segment(alpha * nb, nb) += ai(alpha) * bj;
      }
    }
  }
  return out;
}

double inner(const TruncatedTensor& a, const TruncatedTensor& b) {
  check_compatible(a, b);
  double sum = 0.0;
  for (int k = 0; k <= a.truncation(); ++k) {
    sum += a.level(k).dot(b.level(k));
  }
  return sum;
}

}  // namespace sktree
