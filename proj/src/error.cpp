#include "fsbench/error.hpp"

namespace fsbench {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "io";
    case Errc::unknown_format: return "unknown_format";
    case Errc::no_valid_rows: return "no_valid_rows";
    case Errc::duplicate_key: return "duplicate_key";
    case Errc::invalid_price: return "invalid_price";
    case Errc::missing_column: return "missing_column";
    case Errc::parse: return "parse";
    case Errc::config: return "config";
    case Errc::precondition: return "precondition";
    case Errc::empty_split: return "empty_split";
    case Errc::empty_pool: return "empty_pool";
    case Errc::unsatisfiable_constraint: return "unsatisfiable_constraint";
    case Errc::temporal_violation: return "temporal_violation";
    case Errc::budget_exceeded: return "budget_exceeded";
    case Errc::ticker_mismatch: return "ticker_mismatch";
    case Errc::auth: return "auth";
    case Errc::retries_exhausted: return "retries_exhausted";
    case Errc::malformed_response: return "malformed_response";
    case Errc::provider: return "provider";
    case Errc::network_forbidden: return "network_forbidden";
    case Errc::unmatched_id: return "unmatched_id";
    case Errc::zero_items: return "zero_items";
    case Errc::length_mismatch: return "length_mismatch";
    case Errc::empty_input: return "empty_input";
  }
  return "unknown";
}

bool is_validation_error(Errc code) noexcept {
  switch (code) {
    case Errc::unknown_format:
    case Errc::no_valid_rows:
    case Errc::duplicate_key:
    case Errc::invalid_price:
    case Errc::missing_column:
    case Errc::parse:
    case Errc::config:
    case Errc::precondition:
    case Errc::empty_split:
    case Errc::io:
      return true;
    default:
      return false;
  }
}

}  // namespace fsbench
