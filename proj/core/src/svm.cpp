#include "sktree/svm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "sktree/hash.hpp"

namespace sktree {

namespace {

constexpr int kMaxIterations = 100000;

Eigen::VectorXi to_pm_labels(const std::vector<int>& labels01) {
  Eigen::VectorXi y(static_cast<Eigen::Index>(labels01.size()));
  for (std::size_t i = 0; i < labels01.size(); ++i) {
    if (labels01[i] != 0 && labels01[i] != 1) {
      throw std::invalid_argument("train_svm: labels must be 0 or 1");
    }
    y(static_cast<Eigen::Index>(i)) = labels01[i] == 1 ? 1 : -1;
  }
  return y;
}

}  // namespace

SvmModel train_svm_raw(const Eigen::MatrixXd& kernel,
                       const std::vector<int>& labels01, double C, double tol) {
  const Eigen::Index n = kernel.rows();
  if (kernel.cols() != n) {
    throw std::invalid_argument("train_svm: kernel matrix must be square");
  }
  if (static_cast<Eigen::Index>(labels01.size()) != n) {
    throw std::invalid_argument("train_svm: label count != kernel size");
  }
  if (!(C > 0.0)) throw std::invalid_argument("train_svm: C must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("train_svm: tol must be positive");

  SvmModel model;
  model.labels = to_pm_labels(labels01);
  model.C = C;
  model.alphas = Eigen::VectorXd::Zero(n);

  const bool has_pos = (model.labels.array() == 1).any();
  const bool has_neg = (model.labels.array() == -1).any();
  if (!has_pos || !has_neg) {
    // Degenerate margin: constant decision at the only class.
    model.bias = has_pos ? 1.0 : -1.0;
    return model;
  }

  const Eigen::VectorXd y = model.labels.cast<double>();
  Eigen::VectorXd& alpha = model.alphas;
  // grad_i = y_i * sum_j alpha_j y_j K_ij - 1, the dual gradient.
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);

  int iter = 0;
  for (;; ++iter) {
    if (iter >= kMaxIterations) {
      throw std::runtime_error(
          "train_svm: no convergence within 100000 iterations (tol too tight "
          "or kernel matrix ill-conditioned)");
    }

    // Maximal violating pair: i maximizes -y*grad over the set that can grow
    // along +y, j minimizes it over the set that can grow along -y.
    double up_best = -std::numeric_limits<double>::infinity();
    double low_best = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double v = -y(k) * grad(k);
      const bool in_up = (y(k) > 0.0 && alpha(k) < C) || (y(k) < 0.0 && alpha(k) > 0.0);
      const bool in_low = (y(k) > 0.0 && alpha(k) > 0.0) || (y(k) < 0.0 && alpha(k) < C);
      if (in_up && v > up_best) {
        up_best = v;
        i = k;
      }
      if (in_low && v < low_best) {
        low_best = v;
        j = k;
      }
    }
    if (i < 0 || j < 0 || up_best - low_best <= tol) break;

    double eta = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
    if (eta < -1e-8 * (std::abs(kernel(i, i)) + std::abs(kernel(j, j)) + 1.0)) {
      throw std::runtime_error(
          "train_svm: kernel matrix is not positive semidefinite; add the "
          "recorded psd_shift to the diagonal before training");
    }
    eta = std::max(eta, 1e-12);

    // Move alpha_i by +y_i*t and alpha_j by -y_j*t, clipped to the box.
    double t = (up_best - low_best) / eta;
    double t_max = t;
    t_max = std::min(t_max, y(i) > 0.0 ? C - alpha(i) : alpha(i));
    t_max = std::min(t_max, y(j) > 0.0 ? alpha(j) : C - alpha(j));
    t = std::min(t, t_max);
    if (t <= 0.0) {
      // Numerically stuck pair at a box corner; treat as converged.
      break;
    }

    alpha(i) += y(i) > 0.0 ? t : -t;
    alpha(j) -= y(j) > 0.0 ? t : -t;
    grad += (y.array() * (kernel.col(i) - kernel.col(j)).array()).matrix() * t;
  }

  // Recover the bias: free support vectors pin y_i * f(x_i) = 1.
  double free_sum = 0.0;
  int free_count = 0;
  double up_best = -std::numeric_limits<double>::infinity();
  double low_best = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double v = -y(k) * grad(k);
    if (alpha(k) > 0.0 && alpha(k) < C) {
      free_sum += v;
      ++free_count;
    }
    const bool in_up = (y(k) > 0.0 && alpha(k) < C) || (y(k) < 0.0 && alpha(k) > 0.0);
    const bool in_low = (y(k) > 0.0 && alpha(k) > 0.0) || (y(k) < 0.0 && alpha(k) < C);
    if (in_up) up_best = std::max(up_best, v);
    if (in_low) low_best = std::min(low_best, v);
  }
  if (free_count > 0) {
    model.bias = free_sum / free_count;
  } else {
    model.bias = 0.5 * (up_best + low_best);
  }

  for (Eigen::Index k = 0; k < n; ++k) {
    if (alpha(k) > 0.0) model.support_indices.push_back(k);
  }
  return model;
}

SvmModel train_svm(const GramMatrix& gram, const std::vector<int>& labels01,
                   double C, double tol) {
  Eigen::MatrixXd kernel = gram.values;
  if (gram.psd_shift > 0.0) {
    kernel.diagonal().array() += gram.psd_shift;
  }
  SvmModel model = train_svm_raw(kernel, labels01, C, tol);
  std::uint64_t h = gram.config.hash();
  h = hash_double(h, gram.sigma);
  model.config_hash = h;
  model.tree_ids = gram.tree_ids;
  return model;
}

double decision_value(const SvmModel& model,
                      const Eigen::Ref<const Eigen::VectorXd>& kernel_row) {
  if (kernel_row.size() != model.alphas.size()) {
    throw std::invalid_argument(
        "decision_value: kernel row length != training size");
  }
  const double s =
      (model.alphas.array() * model.labels.cast<double>().array() *
       kernel_row.array())
          .sum();
  return model.bias + s;
}

int predict_label(const SvmModel& model,
                  const Eigen::Ref<const Eigen::VectorXd>& kernel_row) {
  return decision_value(model, kernel_row) > 0.0 ? 1 : 0;
}

double dual_objective(const Eigen::MatrixXd& kernel,
                      const Eigen::VectorXi& labels_pm,
                      const Eigen::VectorXd& alphas) {
  const Eigen::VectorXd u =
      (alphas.array() * labels_pm.cast<double>().array()).matrix();
  return 0.5 * u.dot(kernel * u) - alphas.sum();
}

nlohmann::json SvmModel::to_json() const {
  nlohmann::json j;
  j["alphas"] = std::vector<double>(alphas.data(), alphas.data() + alphas.size());
  j["bias"] = bias;
  j["support_indices"] = support_indices;
  j["labels"] = std::vector<int>(labels.data(), labels.data() + labels.size());
  j["C"] = C;
  j["config_hash"] = config_hash;
  j["tree_ids"] = tree_ids;
  return j;
}

SvmModel SvmModel::from_json(const nlohmann::json& j) {
  SvmModel m;
  const auto a = j.at("alphas").get<std::vector<double>>();
  m.alphas = Eigen::Map<const Eigen::VectorXd>(a.data(),
                                               static_cast<Eigen::Index>(a.size()));
  m.bias = j.at("bias").get<double>();
  m.support_indices = j.at("support_indices").get<std::vector<Eigen::Index>>();
  const auto l = j.at("labels").get<std::vector<int>>();
  m.labels = Eigen::Map<const Eigen::VectorXi>(l.data(),
                                               static_cast<Eigen::Index>(l.size()));
  for (Eigen::Index k = 0; k < m.labels.size(); ++k) {
    if (m.labels(k) != 1 && m.labels(k) != -1) {
      throw std::invalid_argument("SvmModel: stored labels must be -1 or +1");
    }
  }
  m.C = j.at("C").get<double>();
  m.config_hash = j.at("config_hash").get<std::uint64_t>();
  m.tree_ids = j.at("tree_ids").get<std::vector<std::uint64_t>>();
  return m;
}

void SvmModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("SvmModel: cannot write " + path);
  out << to_json().dump(2) << '\n';
}

SvmModel SvmModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("SvmModel: cannot read " + path);
  return from_json(nlohmann::json::parse(in));
}

}  // namespace sktree
