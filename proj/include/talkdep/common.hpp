#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace talkdep {

using Json = nlohmann::ordered_json;

enum class ErrorCode {
  invalid_argument,
  out_of_range,
  parse_error,
  validation_error,
  duplicate_id,
  not_found,
  precondition,
  conflict,
  io_error,
  transport,
  timeout,
  backend_rejected,
  malformed_payload,
  protocol_error,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports is an Error carrying a machine-readable
// code; the service maps it to {code, message}.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Round half away from zero at the given number of decimals. Nudged by a tiny
// epsilon so that values like 3.835 stored as 3.83499999 still round up.
double round_half_up(double value, int decimals);

// Integer round-half-up of a non-negative rational num/den.
std::int64_t round_half_up_div(std::int64_t num, std::int64_t den);

// Fixed-decimal rendering used by reports ("86.36").
std::string format_fixed(double value, int decimals);

std::string sha256_hex(std::string_view data);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

}  // namespace talkdep
