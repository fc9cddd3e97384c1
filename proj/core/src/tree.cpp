#include "sktree/tree.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sktree {

TimeSeries::TimeSeries(PointMatrix knots) : knots_(std::move(knots)) {
  if (knots_.rows() < 1) {
    throw std::invalid_argument("TimeSeries: needs at least one point");
  }
  if (knots_.cols() < 1) {
    throw std::invalid_argument("TimeSeries: needs a time column");
  }
  for (Eigen::Index i = 0; i + 1 < knots_.rows(); ++i) {
    if (!(knots_(i, 0) < knots_(i + 1, 0))) {
      throw std::invalid_argument(
          "TimeSeries: timestamps must be strictly increasing (rows " +
          std::to_string(i) + ", " + std::to_string(i + 1) + ")");
    }
  }
  if (!knots_.allFinite()) {
    throw std::invalid_argument("TimeSeries: non-finite entry");
  }
}

StreamingTree::StreamingTree(TimeSeries series,
                             std::vector<StreamingTree> children)
    : series_(std::move(series)), children_(std::move(children)) {
  for (const auto& child : children_) {
    if (child.dim() != series_.dim()) {
      throw std::invalid_argument("StreamingTree: child dimension mismatch");
    }
    if (!(child.series_.first_time() > series_.last_time())) {
      throw std::invalid_argument(
          "StreamingTree: child must start strictly after parent's last "
          "timestamp");
    }
  }
}

std::size_t StreamingTree::branch_count() const {
  if (children_.empty()) return 1;
  std::size_t n = 0;
  for (const auto& child : children_) n += child.branch_count();
  return n;
}

std::size_t StreamingTree::event_count() const {
  std::size_t n = static_cast<std::size_t>(series_.size());
  for (const auto& child : children_) n += child.event_count();
  return n;
}

bool StreamingTree::operator==(const StreamingTree& other) const {
  return series_ == other.series_ && children_ == other.children_;
}

nlohmann::json StreamingTree::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  const auto& k = series_.knots();
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < k.cols(); ++c) row.push_back(k(i, c));
    rows.push_back(std::move(row));
  }
  nlohmann::json kids = nlohmann::json::array();
  for (const auto& child : children_) kids.push_back(child.to_json());
  return nlohmann::json{{"series", std::move(rows)},
                        {"children", std::move(kids)}};
}

StreamingTree StreamingTree::from_json(const nlohmann::json& j) {
  const auto& rows = j.at("series");
  if (!rows.is_array() || rows.empty()) {
    throw std::invalid_argument("StreamingTree::from_json: empty series");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = static_cast<Eigen::Index>(rows.front().size());
  PointMatrix knots(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != d) {
      throw std::invalid_argument("StreamingTree::from_json: ragged series");
    }
    for (Eigen::Index c = 0; c < d; ++c) {
      knots(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  std::vector<StreamingTree> kids;
  for (const auto& cj : j.at("children")) kids.push_back(from_json(cj));
  return StreamingTree(TimeSeries(std::move(knots)), std::move(kids));
}

namespace {

void collect_branches(const StreamingTree& node, PointMatrix& prefix,
                      std::vector<Branch>& out) {
  const auto& k = node.series().knots();
  PointMatrix combined(prefix.rows() + k.rows(), k.cols());
  if (prefix.rows() > 0) combined.topRows(prefix.rows()) = prefix;
  combined.bottomRows(k.rows()) = k;
  if (node.is_leaf()) {
    out.push_back(Branch{TimeSeries(combined)});
    return;
  }
  for (const auto& child : node.children()) {
    collect_branches(child, combined, out);
  }
}

}  // namespace

std::vector<Branch> enumerate_branches(const StreamingTree& tree) {
  std::vector<Branch> out;
  PointMatrix empty(0, tree.dim());
  collect_branches(tree, empty, out);
  return out;
}

PiecewiseLinearPath::PiecewiseLinearPath(Eigen::VectorXd params,
                                         PointMatrix values)
    : params_(std::move(params)), values_(std::move(values)) {
  if (params_.size() != values_.rows() || params_.size() < 1) {
    throw std::invalid_argument("PiecewiseLinearPath: knot count mismatch");
  }
  for (Eigen::Index i = 0; i + 1 < params_.size(); ++i) {
    if (!(params_(i) < params_(i + 1))) {
      throw std::invalid_argument(
          "PiecewiseLinearPath: parameter must be strictly increasing");
    }
  }
}

PiecewiseLinearPath PiecewiseLinearPath::from_branch(const Branch& branch) {
  const auto& k = branch.series.knots();
  return PiecewiseLinearPath(k.col(0), k);
}

Eigen::VectorXd PiecewiseLinearPath::at(double t) const {
  if (t < t_first() || t > t_last()) {
    throw std::invalid_argument("PiecewiseLinearPath::at: t outside domain");
  }
  const double* begin = params_.data();
  const double* end = begin + params_.size();
  const double* it = std::lower_bound(begin, end, t);
  if (it != end && *it == t) {
    return values_.row(it - begin);
  }
  const Eigen::Index hi = it - begin;  // params_[hi-1] < t < params_[hi]
  const Eigen::Index lo = hi - 1;
  const double frac = (t - params_(lo)) / (params_(hi) - params_(lo));
  return values_.row(lo) + frac * (values_.row(hi) - values_.row(lo));
}

PointMatrix PiecewiseLinearPath::sample_dyadic(int refinement) const {
  if (refinement < 0) {
    throw std::invalid_argument("sample_dyadic: negative refinement");
  }
  const Eigen::Index intervals = params_.size() - 1;
  const Eigen::Index sub = Eigen::Index{1} << refinement;
  PointMatrix out(intervals * sub + 1, values_.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < intervals; ++i) {
    out.row(r++) = values_.row(i);
    for (Eigen::Index s = 1; s < sub; ++s) {
      const double frac = static_cast<double>(s) / static_cast<double>(sub);
      out.row(r++) =
          values_.row(i) + frac * (values_.row(i + 1) - values_.row(i));
    }
  }
  out.row(r) = values_.row(intervals);
  return out;
}

}  // namespace sktree
