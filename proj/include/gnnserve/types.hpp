#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnnserve {

using NodeId = std::uint64_t;
using Bytes = std::vector<std::uint8_t>;

/// Raised when an input violates an operation's preconditions (bad ids,
/// mismatched dimensions, out-of-range budgets).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by collectives when a peer fails, times out, or a call is unmatched.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed on-disk data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace gnnserve
