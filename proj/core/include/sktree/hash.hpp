#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

#include "sktree/tree.hpp"

namespace sktree {

// FNV-1a, used for content-addressed cache keys and fold assignment. Stable
// across runs and platforms; not cryptographic.
inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t seed = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s,
                           std::uint64_t seed = kFnvOffset) {
  return fnv1a(s.data(), s.size(), seed);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return fnv1a(&v, sizeof(v), h);
}

inline std::uint64_t hash_double(std::uint64_t h, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof(bits));
  return hash_combine(h, bits);
}

/// Hash of a tree's full numeric content (shape + every knot). Trees with
/// identical series and structure collide by construction; used as the
/// identity for disk-cache keys and fold assignment.
inline std::uint64_t tree_content_hash(const StreamingTree& tree) {
  std::uint64_t h = fnv1a("tree");
  const PointMatrix& k = tree.series().knots();
  h = hash_combine(h, static_cast<std::uint64_t>(k.rows()));
  h = hash_combine(h, static_cast<std::uint64_t>(k.cols()));
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) h = hash_double(h, k(i, j));
  }
  h = hash_combine(h, static_cast<std::uint64_t>(tree.children().size()));
  for (const StreamingTree& c : tree.children()) {
    h = hash_combine(h, tree_content_hash(c));
  }
  return h;
}

}  // namespace sktree
