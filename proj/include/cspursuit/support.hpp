#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "cspursuit/error.hpp"

namespace csp {

/// Ordered set of distinct coefficient indices in [0, n), with O(1)
/// membership. Induces the 0/1 diagonal weight mask used by the weighted
/// least-squares formulation.
class SupportSet {
 public:
  SupportSet() = default;
  explicit SupportSet(std::size_t n) : n_(n), member_(n, 0) {}
  SupportSet(std::size_t n, std::span<const std::size_t> indices) : SupportSet(n) {
    idx_.reserve(indices.size());
    for (std::size_t j : indices) insert(j);
  }
  SupportSet(std::size_t n, std::initializer_list<std::size_t> indices)
      : SupportSet(n, std::span<const std::size_t>(indices.begin(), indices.size())) {}

  static SupportSet all(std::size_t n) {
    SupportSet s(n);
    s.idx_.reserve(n);
    for (std::size_t j = 0; j < n; ++j) s.insert(j);
    return s;
  }

  void insert(std::size_t j) {
    if (j >= n_) {
      throw InvalidArgument("support index " + std::to_string(j) + " out of range for n=" + std::to_string(n_));
    }
    if (member_[j]) throw InvalidArgument("support index " + std::to_string(j) + " already present");
    member_[j] = 1;
    idx_.push_back(j);
  }

  bool contains(std::size_t j) const noexcept { return j < n_ && member_[j] != 0; }

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return idx_.size(); }
  bool empty() const noexcept { return idx_.empty(); }

  std::span<const std::size_t> indices() const noexcept { return idx_; }
  auto begin() const noexcept { return idx_.begin(); }
  auto end() const noexcept { return idx_.end(); }
  std::size_t operator[](std::size_t i) const noexcept { return idx_[i]; }

  std::vector<std::size_t> sorted() const {
    std::vector<std::size_t> s = idx_;
    std::sort(s.begin(), s.end());
    return s;
  }

  /// w[j] = 1 iff j is in the set.
  std::vector<double> mask() const {
    std::vector<double> w(n_, 0.0);
    for (std::size_t j : idx_) w[j] = 1.0;
    return w;
  }

  /// Zeroes every entry of x outside the set.
  void apply_mask(std::span<double> x) const {
    require_length(x.size(), n_, "SupportSet::apply_mask");
    for (std::size_t j = 0; j < n_; ++j) {
      if (!member_[j]) x[j] = 0.0;
    }
  }

  std::size_t storage_bytes() const noexcept { return idx_.size() * sizeof(std::size_t) + n_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> idx_;
  std::vector<std::uint8_t> member_;
};

/// Same elements, regardless of insertion order.
inline bool same_elements(const SupportSet& a, const SupportSet& b) { return a.n() == b.n() && a.sorted() == b.sorted(); }

}  // namespace csp
