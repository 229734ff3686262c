#pragma once

#include <string>
#include <vector>

#include "framecs/linop.hpp"

namespace framecs {

// boundaries 0 = M_0 < M_1 < ... < M_r; level k (1-based) is (M_{k-1}, M_k]
class LevelPartition {
 public:
  LevelPartition() = default;
  explicit LevelPartition(std::vector<std::size_t> boundaries) : b_(std::move(boundaries)) {
    require(!b_.empty(), ErrorKind::invalid_input, "level structure needs at least one level");
    for (std::size_t k = 0; k < b_.size(); ++k)
      require(b_[k] >= 1 && (k == 0 || b_[k] > b_[k - 1]), ErrorKind::invalid_input,
              "level boundaries must be positive and strictly increasing");
  }

  std::size_t r() const { return b_.size(); }
  const std::vector<std::size_t>& boundaries() const { return b_; }
  std::size_t total() const { return b_.back(); }
  std::size_t upper(std::size_t k) const { return b_.at(k - 1); }
  std::size_t lower(std::size_t k) const { return k <= 1 ? 0 : b_.at(k - 2); }
  std::size_t size(std::size_t k) const { return upper(k) - lower(k); }

  // zero-based half-open range of level k inside a vector of length `ambient`; the last level is
  // stretched to the ambient length when it is longer (unbounded final level)
  std::pair<Eigen::Index, Eigen::Index> span(std::size_t k, std::size_t ambient) const {
    std::size_t hi = k == r() ? std::max(ambient, upper(k)) : upper(k);
    hi = std::min(hi, ambient);
    std::size_t lo = std::min(lower(k), ambient);
    return {static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi)};
  }
  IndexSet level_set(std::size_t k, std::size_t ambient) const {
    auto [lo, hi] = span(k, ambient);
    return IndexSet::range(static_cast<std::size_t>(lo) + 1, static_cast<std::size_t>(hi), ambient);
  }
  // 1-based index -> 1-based level (indices beyond M_r belong to level r)
  std::size_t level_of(std::size_t j) const {
    for (std::size_t k = 1; k <= r(); ++k)
      if (j <= upper(k)) return k;
    return r();
  }
  bool truncated(std::size_t ambient) const { return ambient != total(); }

 private:
  std::vector<std::size_t> b_;
};

}  // namespace framecs
