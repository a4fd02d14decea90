#include "talkdep/common.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace talkdep {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::validation_error: return "validation_error";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::transport: return "transport";
    case ErrorCode::timeout: return "timeout";
    case ErrorCode::backend_rejected: return "backend_rejected";
    case ErrorCode::malformed_payload: return "malformed_payload";
    case ErrorCode::protocol_error: return "protocol_error";
  }
  return "unknown";
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = value * scale;
  const double nudge = 1e-9 * std::max(1.0, std::abs(scaled));
  if (scaled >= 0) return std::floor(scaled + 0.5 + nudge) / scale;
  return -std::floor(-scaled + 0.5 + nudge) / scale;
}

std::int64_t round_half_up_div(std::int64_t num, std::int64_t den) {
  if (den <= 0 || num < 0) throw Error(ErrorCode::invalid_argument, "round_half_up_div expects num >= 0, den > 0");
  return (2 * num + den) / (2 * den);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, round_half_up(value, decimals));
  return buf;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::io_error, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace talkdep
