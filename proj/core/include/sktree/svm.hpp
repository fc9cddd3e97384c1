#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "sktree/mmd.hpp"

namespace sktree {

/// Soft-margin kernel SVM in dual form. Decision value for a query is
/// bias + sum_i alphas[i] * labels[i] * kernel_row[i]; predictions threshold
/// at 0 and map to {0, 1}.
struct SvmModel {
  Eigen::VectorXd alphas;  // in [0, C]
  double bias = 0.0;
  std::vector<Eigen::Index> support_indices;  // indices with alphas > 0
  Eigen::VectorXi labels;                     // {-1, +1}, one per training point
  double C = 1.0;
  std::uint64_t config_hash = 0;  // kernel config + sigma that built the Gram
  std::vector<std::uint64_t> tree_ids;

  Eigen::Index size() const { return alphas.size(); }

  nlohmann::json to_json() const;
  static SvmModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static SvmModel load(const std::string& path);
};

/// Trains on gram.values with the recorded psd_shift added to the diagonal.
/// labels01 are {0, 1} and are mapped to {-1, +1} internally. Single-class
/// input degenerates to a constant model (zero alphas, bias = that class's
/// sign). Throws std::runtime_error on non-convergence or a kernel matrix
/// that is not positive semidefinite despite the shift.
SvmModel train_svm(const GramMatrix& gram, const std::vector<int>& labels01,
                   double C, double tol = 1e-3);

/// Same, on a raw kernel matrix used as-is (caller guarantees PSD).
SvmModel train_svm_raw(const Eigen::MatrixXd& kernel,
                       const std::vector<int>& labels01, double C,
                       double tol = 1e-3);

/// Signed margin for a query given its kernel values against the training
/// set; kernel_row[i] = k(query, training tree i).
double decision_value(const SvmModel& model,
                      const Eigen::Ref<const Eigen::VectorXd>& kernel_row);

/// 1 if the decision value is positive, else 0.
int predict_label(const SvmModel& model,
                  const Eigen::Ref<const Eigen::VectorXd>& kernel_row);

/// (1/2) sum_ij a_i a_j y_i y_j K_ij - sum_i a_i; the quantity the trainer
/// minimizes, shared with test oracles.
double dual_objective(const Eigen::MatrixXd& kernel,
                      const Eigen::VectorXi& labels_pm,
                      const Eigen::VectorXd& alphas);

}  // namespace sktree
