#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace transferkit {

inline constexpr std::size_t kDefaultBudgetMegabytes = 2048;

/// Memory budget for dense allocations in bytes. TRANSFERKIT_MEM_BUDGET_MB
/// overrides the default of 2048 MiB.
inline std::size_t memory_budget_bytes() {
  std::size_t mb = kDefaultBudgetMegabytes;
  if (const char* env = std::getenv("TRANSFERKIT_MEM_BUDGET_MB"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long parsed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0' || parsed == 0) {
      throw ArgumentError("TRANSFERKIT_MEM_BUDGET_MB must be a positive integer, got '" +
                          std::string(env) + "'");
    }
    mb = static_cast<std::size_t>(parsed);
  }
  return mb * std::size_t{1024} * std::size_t{1024};
}

/// base^exponent, throwing ResourceError on overflow of the index type.
inline std::size_t checked_pow(std::size_t base, int exponent) {
  std::size_t result = 1;
  for (int i = 0; i < exponent; ++i) {
    if (result > std::numeric_limits<std::int32_t>::max() / base) {
      throw ResourceError("dimension " + std::to_string(base) + "^" + std::to_string(exponent) +
                          " overflows the index range");
    }
    result *= base;
  }
  return result;
}

/// Throws ResourceError unless `count` dense complex dim x dim matrices fit
/// in the memory budget.
inline void require_dense_fits(std::size_t dim, std::string_view what, std::size_t count = 1) {
  constexpr std::size_t kBytesPerEntry = 16;
  const std::size_t budget = memory_budget_bytes();
  const long double bytes = static_cast<long double>(dim) * static_cast<long double>(dim) *
                            kBytesPerEntry * static_cast<long double>(count);
  if (bytes > static_cast<long double>(budget)) {
    throw ResourceError(std::string(what) + ": " + std::to_string(count) + " dense " +
                        std::to_string(dim) + "x" + std::to_string(dim) +
                        " complex matrices exceed the memory budget of " +
                        std::to_string(budget / (1024 * 1024)) + " MiB");
  }
}

}  // namespace transferkit
