#include "sktree/mmd.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"
#include "sktree/hash.hpp"

namespace sktree {

namespace fs = std::filesystem;

namespace {

const char* estimator_name(MmdEstimator e) {
  switch (e) {
    case MmdEstimator::unbiased: return "unbiased";
    case MmdEstimator::biased: return "biased";
    case MmdEstimator::algorithm1_literal: return "algorithm1_literal";
  }
  throw std::logic_error("estimator_name: bad enum");
}

MmdEstimator estimator_from_name(const std::string& s) {
  if (s == "unbiased") return MmdEstimator::unbiased;
  if (s == "biased") return MmdEstimator::biased;
  if (s == "algorithm1_literal") return MmdEstimator::algorithm1_literal;
  throw std::invalid_argument("MmdConfig: unknown estimator '" + s + "'");
}

double sum_all(const Eigen::MatrixXd& m) { return m.sum(); }

double sum_offdiag(const Eigen::MatrixXd& m) { return m.sum() - m.trace(); }

// Within-tree term. Falls back to the biased convention for single-branch
// trees, where m(m-1) would divide by zero.
double within_term(const Eigen::MatrixXd& k, MmdEstimator estimator) {
  const double m = static_cast<double>(k.rows());
  if (k.rows() == 1 || estimator == MmdEstimator::biased) {
    return sum_all(k) / (m * m);
  }
  if (estimator == MmdEstimator::algorithm1_literal) {
    return sum_all(k) / (m * (m - 1.0));
  }
  return sum_offdiag(k) / (m * (m - 1.0));
}

}  // namespace

std::uint64_t MmdConfig::hash() const {
  std::uint64_t h = block_hash();
  h = hash_combine(h, static_cast<std::uint64_t>(estimator));
  h = hash_combine(h, clamp_negative ? 1u : 0u);
  return h;
}

std::uint64_t MmdConfig::block_hash() const {
  std::uint64_t h = fnv1a("mmd_block");
  h = hash_combine(h, base.hash());
  h = hash_combine(h, static_cast<std::uint64_t>(grid.refinement));
  return h;
}

nlohmann::json MmdConfig::to_json() const {
  nlohmann::json base_j;
  base_j["kind"] = base.kind() == BaseKernel::Kind::linear ? "linear" : "rbf";
  if (base.kind() == BaseKernel::Kind::rbf) {
    base_j["bandwidth"] = base.bandwidth();
  }
  return nlohmann::json{{"estimator", estimator_name(estimator)},
                        {"clamp_negative", clamp_negative},
                        {"base", base_j},
                        {"refinement", grid.refinement}};
}

MmdConfig MmdConfig::from_json(const nlohmann::json& j) {
  MmdConfig c;
  if (j.contains("estimator")) {
    c.estimator = estimator_from_name(j.at("estimator").get<std::string>());
  }
  if (j.contains("clamp_negative")) {
    c.clamp_negative = j.at("clamp_negative").get<bool>();
  }
  if (j.contains("base")) {
    const auto& b = j.at("base");
    const std::string kind = b.at("kind").get<std::string>();
    if (kind == "linear") {
      c.base = BaseKernel::linear();
    } else if (kind == "rbf") {
      c.base = BaseKernel::rbf(b.at("bandwidth").get<double>());
    } else {
      throw std::invalid_argument("MmdConfig: unknown base kernel '" + kind + "'");
    }
  }
  if (j.contains("refinement")) {
    c.grid.refinement = j.at("refinement").get<int>();
  }
  return c;
}

Eigen::MatrixXd branch_kernel_block(const StreamingTree& t1,
                                    const StreamingTree& t2,
                                    const MmdConfig& config) {
  const std::vector<Branch> b1 = enumerate_branches(t1);
  const bool self = (&t1 == &t2) || (t1 == t2);
  const std::vector<Branch> b2 = self ? b1 : enumerate_branches(t2);

  std::vector<PiecewiseLinearPath> p1, p2;
  p1.reserve(b1.size());
  for (const Branch& b : b1) p1.push_back(interpolate(b));
  if (!self) {
    p2.reserve(b2.size());
    for (const Branch& b : b2) p2.push_back(interpolate(b));
  }
  const std::vector<PiecewiseLinearPath>& q2 = self ? p1 : p2;

  Eigen::MatrixXd block(static_cast<Eigen::Index>(p1.size()),
                        static_cast<Eigen::Index>(q2.size()));
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    for (Eigen::Index j = self ? i : 0; j < block.cols(); ++j) {
      block(i, j) = signature_kernel(p1[static_cast<std::size_t>(i)],
                                     q2[static_cast<std::size_t>(j)],
                                     config.base, config.grid);
      if (self && j != i) block(j, i) = block(i, j);
    }
  }
  return block;
}

double mmd_squared_from_blocks(const Eigen::MatrixXd& k11,
                               const Eigen::MatrixXd& k22,
                               const Eigen::MatrixXd& k12,
                               const MmdConfig& config) {
  if (k11.rows() != k11.cols() || k22.rows() != k22.cols() ||
      k12.rows() != k11.rows() || k12.cols() != k22.rows()) {
    throw std::invalid_argument("mmd_squared_from_blocks: block shape mismatch");
  }
  const double m = static_cast<double>(k11.rows());
  const double n = static_cast<double>(k22.rows());
  const double t1 = within_term(k11, config.estimator);
  const double t2 = within_term(k22, config.estimator);
  const double cross = sum_all(k12) / (m * n);
  double d2 = (t1 + t2) - 2.0 * cross;
  if (config.clamp_negative && d2 < 0.0) d2 = 0.0;
  return d2;
}

double mmd_squared(const StreamingTree& t1, const StreamingTree& t2,
                   const MmdConfig& config) {
  const Eigen::MatrixXd k11 = branch_kernel_block(t1, t1, config);
  const Eigen::MatrixXd k22 = branch_kernel_block(t2, t2, config);
  const Eigen::MatrixXd k12 = branch_kernel_block(t1, t2, config);
  return mmd_squared_from_blocks(k11, k22, k12, config);
}

double tree_kernel_sigma(const StreamingTree& t1, const StreamingTree& t2,
                         double sigma, const MmdConfig& config) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("tree_kernel_sigma: sigma must be positive");
  }
  return tree_kernel_sigma_from_mmd(mmd_squared(t1, t2, config), sigma);
}

namespace {

// --- disk cache for branch-kernel blocks ------------------------------------
// One file per block, content-addressed by the two tree hashes plus the
// block-relevant config hash. Binary: magic, rows, cols, row-major doubles.
// Writers go through a temp file and rename, so concurrent producers of the
// same key are safe (last rename wins with identical content).

constexpr std::uint64_t kBlockMagic = 0x534b424c4f434b31ull;  // "SKBLOCK1"

fs::path block_path(const std::string& dir, std::uint64_t h1, std::uint64_t h2,
                    std::uint64_t cfg) {
  std::uint64_t key = fnv1a("block_key");
  key = hash_combine(key, h1);
  key = hash_combine(key, h2);
  key = hash_combine(key, cfg);
  char name[32];
  std::snprintf(name, sizeof(name), "%016llx.blk",
                static_cast<unsigned long long>(key));
  return fs::path(dir) / name;
}

bool read_block(const fs::path& p, Eigen::MatrixXd& out) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::uint64_t magic = 0;
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || magic != kBlockMagic || rows == 0 || cols == 0 ||
      rows > (1u << 20) || cols > (1u << 20)) {
    return false;
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows,
                                                                           cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) return false;
  out = m;
  return true;
}

void write_block(const fs::path& p, const Eigen::MatrixXd& block) {
  static std::atomic<unsigned> counter{0};
  std::ostringstream suffix;
  suffix << ".tmp" << ::getpid() << "." << counter.fetch_add(1);
  const fs::path tmp = p.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return;  // cache is best-effort; compute still succeeded
    const std::uint64_t magic = kBlockMagic;
    const std::uint32_t rows = static_cast<std::uint32_t>(block.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(block.cols());
    out.write(reinterpret_cast<const char*>(&magic), sizeof(magic));
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m =
        block;
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!out) return;
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) fs::remove(tmp, ec);
}

Eigen::MatrixXd cached_block(const StreamingTree& t1, const StreamingTree& t2,
                             std::uint64_t h1, std::uint64_t h2,
                             const MmdConfig& config,
                             const std::string& cache_dir) {
  if (cache_dir.empty()) return branch_kernel_block(t1, t2, config);
  const fs::path p = block_path(cache_dir, h1, h2, config.block_hash());
  Eigen::MatrixXd block;
  if (read_block(p, block)) return block;
  block = branch_kernel_block(t1, t2, config);
  write_block(p, block);
  return block;
}

}  // namespace

double psd_shift_for(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m,
                                                    Eigen::EigenvaluesOnly);
  const double lambda_min = es.eigenvalues().minCoeff();
  const double shift = -lambda_min + 1e-10;
  return shift > 0.0 ? shift : 0.0;
}

BlockProvider::BlockProvider(const std::vector<StreamingTree>& trees,
                             std::string cache_dir)
    : trees_(&trees), cache_dir_(std::move(cache_dir)) {
  hashes_.resize(trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) {
    hashes_[i] = tree_content_hash(trees[i]);
  }
  if (!cache_dir_.empty()) fs::create_directories(cache_dir_);
}

const Eigen::MatrixXd& BlockProvider::block(std::size_t i, std::size_t j,
                                            const MmdConfig& config) {
  if (i > j) std::swap(i, j);
  if (j >= trees_->size()) {
    throw std::out_of_range("BlockProvider: tree index out of range");
  }
  const std::tuple<std::uint64_t, std::size_t, std::size_t> key{
      config.block_hash(), i, j};
  {
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  Eigen::MatrixXd value = cached_block((*trees_)[i], (*trees_)[j], hashes_[i],
                                       hashes_[j], config, cache_dir_);
  std::lock_guard<std::mutex> lock(mu_);
  return memo_.emplace(key, std::move(value)).first->second;
}

double BlockProvider::mmd_entry(std::size_t i, std::size_t j,
                                const MmdConfig& config) {
  if (i > j) std::swap(i, j);
  const Eigen::MatrixXd& bii = block(i, i, config);
  if (i == j) return mmd_squared_from_blocks(bii, bii, bii, config);
  const Eigen::MatrixXd& bjj = block(j, j, config);
  const Eigen::MatrixXd& bij = block(i, j, config);
  return mmd_squared_from_blocks(bii, bjj, bij, config);
}

Eigen::MatrixXd mmd_matrix(const std::vector<StreamingTree>& trees,
                           const MmdConfig& config,
                           const GramOptions& options) {
  const Eigen::Index n = static_cast<Eigen::Index>(trees.size());
  BlockProvider blocks(trees, options.cache_dir);

  parallel_for(trees.size(), options.threads,
               [&](std::size_t i) { blocks.block(i, i, config); });

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    out(i, i) = blocks.mmd_entry(si, si, config);
  }

  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n > 0 ? n - 1 : 0) / 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  parallel_for(pairs.size(), options.threads, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    const double d2 = blocks.mmd_entry(static_cast<std::size_t>(i),
                                       static_cast<std::size_t>(j), config);
    out(i, j) = d2;
    out(j, i) = d2;
  });
  return out;
}

GramMatrix gram_from_mmd(const Eigen::MatrixXd& mmd, double sigma,
                         const MmdConfig& config,
                         std::vector<std::uint64_t> tree_ids) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("gram: sigma must be positive");
  }
  if (mmd.rows() != mmd.cols()) {
    throw std::invalid_argument("gram: mmd matrix must be square");
  }
  GramMatrix g;
  g.values = (-sigma * sigma * mmd.array()).exp().matrix();
  g.sigma = sigma;
  g.config = config;
  g.tree_ids = std::move(tree_ids);
  g.psd_shift = psd_shift_for(g.values);
  return g;
}

GramMatrix gram(const std::vector<StreamingTree>& trees, double sigma,
                const MmdConfig& config, const GramOptions& options) {
  const Eigen::MatrixXd mmd = mmd_matrix(trees, config, options);
  std::vector<std::uint64_t> ids(trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) {
    ids[i] = tree_content_hash(trees[i]);
  }
  GramMatrix g = gram_from_mmd(mmd, sigma, config, std::move(ids));
  if (config.estimator != MmdEstimator::biased) {
    std::size_t fallbacks = 0;
    std::vector<bool> single(trees.size());
    for (std::size_t i = 0; i < trees.size(); ++i) {
      single[i] = trees[i].branch_count() == 1;
    }
    for (std::size_t i = 0; i < trees.size(); ++i) {
      for (std::size_t j = i; j < trees.size(); ++j) {
        if (single[i] || single[j]) ++fallbacks;
      }
    }
    g.single_branch_fallbacks = fallbacks;
  }
  return g;
}

void GramMatrix::save(const std::string& prefix) const {
  {
    std::ofstream csv(prefix + ".csv", std::ios::trunc);
    if (!csv) {
      throw std::runtime_error("GramMatrix: cannot write " + prefix + ".csv");
    }
    char buf[40];
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", values(i, j));
        csv << buf;
        csv << (j + 1 == values.cols() ? '\n' : ',');
      }
    }
  }
  nlohmann::json side{{"sigma", sigma},
                      {"config", config.to_json()},
                      {"config_hash", config.hash()},
                      {"psd_shift", psd_shift},
                      {"tree_ids", tree_ids},
                      {"single_branch_fallbacks", single_branch_fallbacks},
                      {"size", values.rows()}};
  std::ofstream js(prefix + ".json", std::ios::trunc);
  if (!js) {
    throw std::runtime_error("GramMatrix: cannot write " + prefix + ".json");
  }
  js << side.dump(2) << '\n';
}

GramMatrix GramMatrix::load(const std::string& prefix) {
  std::ifstream js(prefix + ".json");
  if (!js) {
    throw std::runtime_error("GramMatrix: cannot read " + prefix + ".json");
  }
  nlohmann::json side = nlohmann::json::parse(js);

  GramMatrix g;
  g.sigma = side.at("sigma").get<double>();
  g.config = MmdConfig::from_json(side.at("config"));
  g.psd_shift = side.at("psd_shift").get<double>();
  g.tree_ids = side.at("tree_ids").get<std::vector<std::uint64_t>>();
  g.single_branch_fallbacks =
      side.value("single_branch_fallbacks", std::size_t{0});
  const Eigen::Index n = side.at("size").get<Eigen::Index>();

  std::ifstream csv(prefix + ".csv");
  if (!csv) {
    throw std::runtime_error("GramMatrix: cannot read " + prefix + ".csv");
  }
  g.values.resize(n, n);
  std::string line;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(csv, line)) {
      throw std::runtime_error("GramMatrix: truncated csv in " + prefix);
    }
    std::istringstream row(line);
    std::string cell;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::getline(row, cell, ',')) {
        throw std::runtime_error("GramMatrix: short csv row in " + prefix);
      }
      // strtod, not stod: subnormal entries (deep rbf tails) must round-trip.
      char* end = nullptr;
      g.values(i, j) = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw std::runtime_error("GramMatrix: bad csv cell in " + prefix);
      }
    }
  }
  return g;
}

}  // namespace sktree
