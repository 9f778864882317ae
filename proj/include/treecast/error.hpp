#pragma once

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace treecast {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument, out-of-domain parameter or violated precondition.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A request exceeds the declared desk-scale limits (vertex or support budget).
class BudgetError : public Error {
 public:
  using Error::Error;
};

// Size limits shared by the simulator and the exact engine.
struct Budget {
  std::uint64_t vertices_per_level = std::uint64_t{1} << 26;
  std::uint64_t support = 65537;

  // Default budget with TREECAST_BUDGET (support points) applied if set.
  static Budget from_env() {
    Budget b;
    if (const char* env = std::getenv("TREECAST_BUDGET"); env != nullptr && *env != '\0') {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (end == env || *end != '\0' || v < 2) {
        throw DomainError("TREECAST_BUDGET must be an integer >= 2, got '" + std::string(env) + "'");
      }
      b.support = v;
    }
    return b;
  }
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DomainError(what);
}

}  // namespace detail
}  // namespace treecast
