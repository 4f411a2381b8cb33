#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace bvecchia {

// Violated precondition on a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data that cannot be processed (non-finite coordinates, malformed rows).
class InvalidData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A covariance matrix stayed indefinite after the full jitter schedule.
class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(const std::string& what,
                               std::optional<std::size_t> block = std::nullopt)
      : std::runtime_error(what), block_(block) {}

  // Permuted block position (likelihood) or prediction block id, when known.
  std::optional<std::size_t> block() const noexcept { return block_; }

 private:
  std::optional<std::size_t> block_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bvecchia
