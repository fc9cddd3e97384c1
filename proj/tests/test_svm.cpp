#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <vector>

#include "sktree/mmd.hpp"
#include "sktree/svm.hpp"
#include "qp_reference.hpp"

using namespace sktree;

namespace {

Eigen::MatrixXd random_psd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, std::max(2, n / 2));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = g(rng);
  }
  Eigen::MatrixXd k = a * a.transpose();
  k.diagonal().array() += 0.1;
  return k;
}

std::vector<int> random_labels(std::mt19937_64& rng, int n) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = static_cast<int>(rng() % 2);
  y[0] = 0;  // force both classes
  y[1] = 1;
  return y;
}

Eigen::VectorXi to_pm(const std::vector<int>& labels01) {
  Eigen::VectorXi y(static_cast<Eigen::Index>(labels01.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y(i) = labels01[static_cast<std::size_t>(i)] == 1 ? 1 : -1;
  }
  return y;
}

}  // namespace

TEST_CASE("two-point closed form") {
  const double g = 0.5;
  Eigen::MatrixXd k(2, 2);
  k << 1.0, g, g, 1.0;
  const SvmModel model = train_svm_raw(k, {0, 1}, 1e6, 1e-6);
  CHECK(model.alphas(0) == doctest::Approx(1.0 / (1.0 - g)).epsilon(1e-4));
  CHECK(model.alphas(1) == doctest::Approx(1.0 / (1.0 - g)).epsilon(1e-4));
  CHECK(std::abs(model.bias) < 1e-6);
  CHECK(model.support_indices == std::vector<Eigen::Index>{0, 1});

  // Symmetric query sits on the boundary: decision = bias = 0.
  Eigen::VectorXd row(2);
  row << 0.7, 0.7;
  CHECK(std::abs(decision_value(model, row)) < 1e-6);
}

TEST_CASE("two-point solution caps at C") {
  Eigen::MatrixXd k(2, 2);
  k << 1.0, 0.9, 0.9, 1.0;  // uncapped alpha would be 10
  const SvmModel model = train_svm_raw(k, {0, 1}, 2.0, 1e-6);
  CHECK(model.alphas(0) == doctest::Approx(2.0));
  CHECK(model.alphas(1) == doctest::Approx(2.0));
}

TEST_CASE("single-class training yields a constant decision") {
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(3, 3);
  const SvmModel pos = train_svm_raw(k, {1, 1, 1}, 1.0, 1e-3);
  CHECK(pos.alphas.isZero());
  Eigen::VectorXd row = Eigen::VectorXd::Zero(3);
  CHECK(decision_value(pos, row) == 1.0);
  CHECK(predict_label(pos, row) == 1);
  const SvmModel neg = train_svm_raw(k, {0, 0, 0}, 1.0, 1e-3);
  CHECK(decision_value(neg, row) == -1.0);
  CHECK(predict_label(neg, row) == 0);
}

TEST_CASE("zero alphas reduce the decision to the bias") {
  SvmModel model;
  model.alphas = Eigen::VectorXd::Zero(4);
  model.labels = Eigen::VectorXi::Ones(4);
  model.bias = -0.25;
  model.C = 1.0;
  Eigen::VectorXd row = Eigen::VectorXd::Random(4);
  CHECK(decision_value(model, row) == -0.25);
  CHECK(predict_label(model, row) == 0);
}

TEST_CASE("separable data reaches zero hinge loss at large C") {
  std::mt19937_64 rng(41);
  const int n = 20;
  // Gram plus identity is always strictly separable in feature space.
  Eigen::MatrixXd k = random_psd(rng, n);
  k.diagonal().array() += 1.0;
  const std::vector<int> labels = random_labels(rng, n);
  const SvmModel model = train_svm_raw(k, labels, 1e6, 1e-3);
  const Eigen::VectorXi y = to_pm(labels);
  const Eigen::VectorXd u = model.alphas.array() * y.cast<double>().array();
  const Eigen::VectorXd f = k * u + Eigen::VectorXd::Constant(n, model.bias);
  double hinge = 0.0;
  for (int i = 0; i < n; ++i) {
    hinge += std::max(0.0, 1.0 - static_cast<double>(y(i)) * f(i));
  }
  CHECK(hinge < 0.05);
}

TEST_CASE("dual objective matches the reference quadratic-program solver") {
  std::mt19937_64 rng(42);
  const double c_grid[3] = {0.5, 5.0, 50.0};
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 26);
    const Eigen::MatrixXd k = random_psd(rng, n);
    const std::vector<int> labels = random_labels(rng, n);
    const double C = c_grid[trial % 3];
    const SvmModel model = train_svm_raw(k, labels, C, 1e-8);
    const Eigen::VectorXi y = to_pm(labels);
    const Eigen::VectorXd ref = testutil::qp_reference_solve(k, y, C);
    const double obj_model = dual_objective(k, y, model.alphas);
    const double obj_ref = testutil::qp_dual_objective(k, y, ref);
    CHECK(std::abs(obj_model - obj_ref) <=
          1e-6 * std::max(1.0, std::abs(obj_ref)));
  }
}

TEST_CASE("trained models satisfy the KKT conditions") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 6 + static_cast<int>(rng() % 20);
    const Eigen::MatrixXd k = random_psd(rng, n);
    const std::vector<int> labels = random_labels(rng, n);
    const double C = trial % 2 == 0 ? 1.0 : 10.0;
    const SvmModel model = train_svm_raw(k, labels, C, 1e-3);
    const Eigen::VectorXi y = to_pm(labels);
    CHECK(testutil::max_kkt_violation(k, y, model.alphas, model.bias, C) <=
          1.01e-3);
    // Equality constraint of the dual.
    CHECK(std::abs(model.alphas.dot(y.cast<double>())) <= 1e-6 * C * n);
    // Box constraints.
    CHECK((model.alphas.array() >= 0.0).all());
    CHECK((model.alphas.array() <= C + 1e-12).all());
  }
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 rng(44);
  const Eigen::MatrixXd k = random_psd(rng, 12);
  const std::vector<int> labels = random_labels(rng, 12);
  const SvmModel a = train_svm_raw(k, labels, 3.0, 1e-4);
  const SvmModel b = train_svm_raw(k, labels, 3.0, 1e-4);
  CHECK(a.alphas == b.alphas);
  CHECK(a.bias == b.bias);
  CHECK(a.support_indices == b.support_indices);
}

TEST_CASE("indefinite kernels fail with a pointer to the repair knob") {
  Eigen::MatrixXd k(2, 2);
  k << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  CHECK_THROWS_WITH_AS(train_svm_raw(k, {0, 1}, 1.0, 1e-3),
                       doctest::Contains("psd_shift"), std::runtime_error);
}

TEST_CASE("the recorded psd shift makes gram training succeed") {
  GramMatrix g;
  g.values.resize(2, 2);
  g.values << 1.0, 2.0, 2.0, 1.0;
  g.sigma = 1.0;
  g.psd_shift = psd_shift_for(g.values);
  CHECK(g.psd_shift >= 1.0);
  const SvmModel model = train_svm(g, {0, 1}, 1.0, 1e-3);
  CHECK(model.size() == 2);
}

TEST_CASE("input validation") {
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(train_svm_raw(k, {0, 1}, 1.0, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(train_svm_raw(k, {0, 1, 2}, 1.0, 1e-3),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_svm_raw(k, {0, 1, 1}, 0.0, 1e-3),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_svm_raw(k, {0, 1, 1}, 1.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_svm_raw(Eigen::MatrixXd::Identity(3, 2), {0, 1, 1},
                                1.0, 1e-3),
                  std::invalid_argument);

  const SvmModel model = train_svm_raw(k, {0, 1, 1}, 1.0, 1e-3);
  Eigen::VectorXd short_row(2);
  short_row << 0.1, 0.2;
  CHECK_THROWS_AS(decision_value(model, short_row), std::invalid_argument);
}

TEST_CASE("model persistence round-trips") {
  std::mt19937_64 rng(45);
  const Eigen::MatrixXd k = random_psd(rng, 8);
  const std::vector<int> labels = random_labels(rng, 8);
  SvmModel model = train_svm_raw(k, labels, 2.0, 1e-4);
  model.tree_ids = {10, 11, 12, 13, 14, 15, 16, 17};
  const std::string path =
      (std::filesystem::temp_directory_path() / "sktree_svm_rt.json").string();
  model.save(path);
  const SvmModel back = SvmModel::load(path);
  CHECK(back.alphas == model.alphas);
  CHECK(back.bias == model.bias);
  CHECK(back.labels == model.labels);
  CHECK(back.support_indices == model.support_indices);
  CHECK(back.C == model.C);
  CHECK(back.tree_ids == model.tree_ids);
  Eigen::VectorXd row = Eigen::VectorXd::Constant(8, 0.3);
  CHECK(decision_value(back, row) == decision_value(model, row));
  std::filesystem::remove(path);
}
