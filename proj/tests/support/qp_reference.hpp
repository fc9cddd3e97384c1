#pragma once

// Generic reference solver for the soft-margin SVM dual:
//   minimize (1/2) a^T Q a - 1^T a,  Q = (y y^T) .* K
//   subject to 0 <= a <= C, y^T a = 0.
// Accelerated projected gradient with exact projection onto the feasible set;
// slow but solver-agnostic, used to cross-check dual objectives.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace testutil {

/// Euclidean projection of z onto {0 <= a <= C} intersect {y^T a = 0}:
/// a(lam) = clip(z - lam*y, 0, C) with lam found by bisection on the
/// monotone function y^T a(lam).
inline Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& z,
                                              const Eigen::VectorXi& y,
                                              double C) {
  const Eigen::Index n = z.size();
  auto alpha_of = [&](double lam) {
    Eigen::VectorXd a(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      a(i) = std::clamp(z(i) - lam * static_cast<double>(y(i)), 0.0, C);
    }
    return a;
  };
  auto g = [&](double lam) {
    const Eigen::VectorXd a = alpha_of(lam);
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += static_cast<double>(y(i)) * a(i);
    return s;
  };
  double lo = -(z.cwiseAbs().maxCoeff() + C + 1.0);
  double hi = -lo;
  if (g(lo) < 0.0 || g(hi) > 0.0) throw std::runtime_error("projection bracket failed");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return alpha_of(0.5 * (lo + hi));
}

inline double qp_dual_objective(const Eigen::MatrixXd& kernel,
                                const Eigen::VectorXi& y,
                                const Eigen::VectorXd& alphas) {
  const Eigen::VectorXd u =
      alphas.array() * y.cast<double>().array();
  return 0.5 * u.dot(kernel * u) - alphas.sum();
}

/// FISTA with monotone restart on the dual. Returns the alpha vector.
inline Eigen::VectorXd qp_reference_solve(const Eigen::MatrixXd& kernel,
                                          const Eigen::VectorXi& y, double C,
                                          int iterations = 20000) {
  const Eigen::Index n = kernel.rows();
  const Eigen::MatrixXd q =
      (y.cast<double>() * y.cast<double>().transpose()).cwiseProduct(kernel);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q,
                                                    Eigen::EigenvaluesOnly);
  const double lip =
      std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-8) * 1.01;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = x;
  double t = 1.0;
  double fx = qp_dual_objective(kernel, y, x);
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad = q * v - Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd x_new =
        project_box_hyperplane(v - grad / lip, y, C);
    const double fx_new = qp_dual_objective(kernel, y, x_new);
    if (fx_new > fx) {  // restart momentum
      v = x;
      t = 1.0;
      continue;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    v = x_new + ((t - 1.0) / t_new) * (x_new - x);
    x = x_new;
    fx = fx_new;
    t = t_new;
  }
  return x;
}

/// Worst KKT violation of a trained model against the kernel it was trained
/// on. Free points must sit on the margin, zero points at or beyond it,
/// bound points at or inside it.
inline double max_kkt_violation(const Eigen::MatrixXd& kernel,
                                const Eigen::VectorXi& y,
                                const Eigen::VectorXd& alphas, double bias,
                                double C) {
  const Eigen::Index n = kernel.rows();
  const Eigen::VectorXd u = alphas.array() * y.cast<double>().array();
  const Eigen::VectorXd f = kernel * u + Eigen::VectorXd::Constant(n, bias);
  const double eps = 1e-9 * C;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double margin = static_cast<double>(y(i)) * f(i);
    double viol = 0.0;
    if (alphas(i) <= eps) {
      viol = std::max(0.0, 1.0 - margin);
    } else if (alphas(i) >= C - eps) {
      viol = std::max(0.0, margin - 1.0);
    } else {
      viol = std::abs(margin - 1.0);
    }
    worst = std::max(worst, viol);
  }
  return worst;
}

}  // namespace testutil
