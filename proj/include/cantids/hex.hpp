#pragma once

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cantids/types.hpp"

namespace cantids {

inline std::string format_id(CanId id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%x", static_cast<unsigned>(id));
  return buf;
}

inline std::optional<CanId> parse_id(std::string_view text) {
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) text.remove_prefix(2);
  if (text.empty()) return std::nullopt;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 16);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value >= kIdLimit) return std::nullopt;
  return static_cast<CanId>(value);
}

inline std::string format_payload(const Payload& bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

inline std::optional<std::uint8_t> parse_hex_byte(std::string_view two) {
  if (two.size() != 2) return std::nullopt;
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(two.data(), two.data() + 2, value, 16);
  if (ec != std::errc{} || ptr != two.data() + 2) return std::nullopt;
  return static_cast<std::uint8_t>(value);
}

inline std::optional<Payload> parse_payload(std::string_view text) {
  if (text.size() % 2 != 0 || text.size() > 2 * Payload::kCapacity) return std::nullopt;
  Payload out;
  for (std::size_t i = 0; i < text.size(); i += 2) {
    auto b = parse_hex_byte(text.substr(i, 2));
    if (!b) return std::nullopt;
    out.push_back(*b);
  }
  return out;
}

/// Parses a non-negative decimal seconds value into microseconds without
/// going through floating point. Digits past the sixth decimal are rounded.
inline std::optional<Micros> parse_seconds(std::string_view text) {
  if (text.empty()) return std::nullopt;
  auto dot = text.find('.');
  std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() && frac.empty()) return std::nullopt;
  Micros seconds = 0;
  if (!whole.empty()) {
    auto [ptr, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), seconds);
    if (ec != std::errc{} || ptr != whole.data() + whole.size() || seconds < 0) return std::nullopt;
  }
  Micros micros = 0;
  int digits = 0;
  bool round_up = false;
  for (std::size_t i = 0; i < frac.size(); ++i) {
    char c = frac[i];
    if (c < '0' || c > '9') return std::nullopt;
    if (digits < 6) {
      micros = micros * 10 + (c - '0');
      ++digits;
    } else if (i == 6) {
      round_up = c >= '5';
    }
  }
  for (; digits < 6; ++digits) micros *= 10;
  return seconds * kMicrosPerSecond + micros + (round_up ? 1 : 0);
}

inline std::string format_seconds(Micros us) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(us / kMicrosPerSecond),
                static_cast<long long>(us % kMicrosPerSecond));
  return buf;
}

}  // namespace cantids
