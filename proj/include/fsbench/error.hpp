#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fsbench {

enum class Errc {
  io,
  unknown_format,
  no_valid_rows,
  duplicate_key,
  invalid_price,
  missing_column,
  parse,
  config,
  precondition,
  empty_split,
  empty_pool,
  unsatisfiable_constraint,
  temporal_violation,
  budget_exceeded,
  ticker_mismatch,
  auth,
  retries_exhausted,
  malformed_response,
  provider,
  network_forbidden,
  unmatched_id,
  zero_items,
  length_mismatch,
  empty_input,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Validation errors map to CLI exit code 1, everything else to 2.
bool is_validation_error(Errc code) noexcept;

}  // namespace fsbench
