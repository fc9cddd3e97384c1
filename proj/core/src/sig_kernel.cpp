#include "sktree/sig_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "sktree/hash.hpp"

namespace sktree {

BaseKernel BaseKernel::rbf(double bandwidth) {
  if (!(bandwidth > 0.0)) {
    throw std::invalid_argument("BaseKernel: rbf bandwidth must be positive");
  }
  return BaseKernel(Kind::rbf, bandwidth);
}

double BaseKernel::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                              const Eigen::Ref<const Eigen::RowVectorXd>& y) const {
  if (x.size() != y.size()) {
    throw std::invalid_argument("BaseKernel: point dimensions differ");
  }
  if (kind_ == Kind::linear) return x.dot(y);
  const double sq = (x - y).squaredNorm();
  return std::exp(-sq / (2.0 * bandwidth_ * bandwidth_));
}

std::uint64_t BaseKernel::hash() const {
  std::uint64_t h = fnv1a("base_kernel");
  h = hash_combine(h, static_cast<std::uint64_t>(kind_));
  h = hash_double(h, bandwidth_);
  return h;
}

namespace {

// kappa(x_pt, y_j) for every sample row of sy, written into out. sy_sq holds
// precomputed row squared norms (rbf only).
void kernel_row(const BaseKernel& base, const Eigen::RowVectorXd& x_pt,
                const PointMatrix& sy, const Eigen::VectorXd& sy_sq,
                Eigen::VectorXd& out) {
  out.noalias() = sy * x_pt.transpose();
  if (base.kind() == BaseKernel::Kind::linear) return;
  const double h = base.bandwidth();
  const double inv = 1.0 / (2.0 * h * h);
  const double x_sq = x_pt.squaredNorm();
  out = (-(sy_sq.array() + x_sq - 2.0 * out.array()) * inv).exp();
}

}  // namespace

double signature_kernel(const PiecewiseLinearPath& x,
                        const PiecewiseLinearPath& y, const BaseKernel& base,
                        const PdeGrid& grid) {
  if (x.dim() != y.dim()) {
    throw std::invalid_argument("signature_kernel: path dimensions differ");
  }
  if (grid.refinement < 0 || grid.refinement > 10) {
    throw std::invalid_argument("PdeGrid: refinement must be in [0, 10]");
  }

  const PointMatrix sx = x.sample_dyadic(grid.refinement);
  const PointMatrix sy = y.sample_dyadic(grid.refinement);
  const Eigen::Index np = sx.rows() - 1;  // cells along each axis
  const Eigen::Index nq = sy.rows() - 1;
  if (np == 0 || nq == 0) return 1.0;  // a constant path has trivial signature

  Eigen::VectorXd sy_sq;
  if (base.kind() == BaseKernel::Kind::rbf) {
    sy_sq = sy.rowwise().squaredNorm();
  }

  Eigen::VectorXd kappa_prev(nq + 1), kappa_cur(nq + 1);
  kernel_row(base, sx.row(0), sy, sy_sq, kappa_prev);
  if (!kappa_prev.allFinite()) {
    throw std::runtime_error("signature_kernel: non-finite base kernel value");
  }

  Eigen::VectorXd u_prev = Eigen::VectorXd::Ones(nq + 1);
  Eigen::VectorXd u_cur(nq + 1);

  for (Eigen::Index i = 0; i < np; ++i) {
    kernel_row(base, sx.row(i + 1), sy, sy_sq, kappa_cur);
    if (!kappa_cur.allFinite()) {
      throw std::runtime_error(
          "signature_kernel: non-finite base kernel value at sample row " +
          std::to_string(i + 1));
    }
    u_cur(0) = 1.0;
    const double* kp = kappa_prev.data();
    const double* kc = kappa_cur.data();
    const double* up = u_prev.data();
    double* uc = u_cur.data();
    for (Eigen::Index j = 0; j < nq; ++j) {
      // Mixed increment of kappa over the cell, grouped so that swapping the
      // paths yields the identical floating-point value.
      const double delta = (kc[j + 1] + kp[j]) - (kc[j] + kp[j + 1]);
      const double sq12 = delta * delta * (1.0 / 12.0);
      uc[j + 1] =
          (uc[j] + up[j + 1]) * (1.0 + 0.5 * delta + sq12) - up[j] * (1.0 - sq12);
    }
    std::swap(u_prev, u_cur);
    std::swap(kappa_prev, kappa_cur);
  }
  const double out = u_prev(nq);
  if (!std::isfinite(out)) {
    throw std::runtime_error("signature_kernel: solution diverged");
  }
  return out;
}

double median_heuristic_bandwidth(const std::vector<StreamingTree>& trees,
                                  std::size_t max_points) {
  std::vector<Eigen::RowVectorXd> points;
  std::size_t total = 0;
  std::function<void(const StreamingTree&, bool)> walk =
      [&](const StreamingTree& node, bool collect) {
        if (collect) {
          const PointMatrix& k = node.series().knots();
          for (Eigen::Index i = 0; i < k.rows(); ++i) points.push_back(k.row(i));
        } else {
          total += static_cast<std::size_t>(node.series().size());
        }
        for (const StreamingTree& c : node.children()) walk(c, collect);
      };
  for (const StreamingTree& t : trees) walk(t, false);
  if (total < 2) return 1.0;

  // Deterministic stride subsample, no RNG: same input -> same bandwidth.
  const std::size_t stride = std::max<std::size_t>(1, total / max_points);
  points.reserve(std::min(max_points + 1, total));
  std::size_t index = 0;
  std::function<void(const StreamingTree&)> pick = [&](const StreamingTree& node) {
    const PointMatrix& k = node.series().knots();
    for (Eigen::Index i = 0; i < k.rows(); ++i, ++index) {
      if (index % stride == 0 && points.size() <= max_points) {
        points.push_back(k.row(i));
      }
    }
    for (const StreamingTree& c : node.children()) pick(c);
  };
  for (const StreamingTree& t : trees) pick(t);
  if (points.size() < 2) return 1.0;

  std::vector<double> dists;
  dists.reserve(points.size() * (points.size() - 1) / 2);
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t b = a + 1; b < points.size(); ++b) {
      dists.push_back((points[a] - points[b]).norm());
    }
  }
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  double med = dists[dists.size() / 2];
  if (med > 0.0) return med;
  double smallest = 0.0;
  for (double d : dists) {
    if (d > 0.0 && (smallest == 0.0 || d < smallest)) smallest = d;
  }
  return smallest > 0.0 ? smallest : 1.0;
}

}  // namespace sktree
