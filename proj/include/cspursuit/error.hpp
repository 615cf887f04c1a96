#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace csp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector lengths or operator shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A dense materialization or enumeration would exceed its configured budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// Least-squares system whose column submatrix is not of full column rank.
class RankDeficientError : public Error {
 public:
  explicit RankDeficientError(std::vector<std::size_t> support,
                              const std::string& what = "rank-deficient column submatrix")
      : Error(what + describe(support)), support_(std::move(support)) {}

  const std::vector<std::size_t>& support() const noexcept { return support_; }

 private:
  static std::string describe(const std::vector<std::size_t>& support) {
    if (support.empty()) return {};
    std::string s = " (support {";
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(support[i]);
    }
    return s + "})";
  }

  std::vector<std::size_t> support_;
};

inline void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace csp
