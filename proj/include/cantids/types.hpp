#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cantids {

/// Timestamps and durations are integer microseconds throughout.
using Micros = std::int64_t;
using CanId = std::uint32_t;

inline constexpr Micros kMicrosPerMs = 1000;
inline constexpr Micros kMicrosPerSecond = 1000000;
inline constexpr CanId kMaxStandardId = 0x7FF;
inline constexpr CanId kIdLimit = CanId{1} << 29;
inline constexpr std::uint32_t kDefaultBitrate = 500000;

inline double to_ms(Micros us) { return static_cast<double>(us) / kMicrosPerMs; }
inline double to_seconds(Micros us) { return static_cast<double>(us) / kMicrosPerSecond; }

// Error taxonomy. The CLI maps ValidationError/ParseError to exit code 1 and
// IoError to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : ValidationError {
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OrderingError : ValidationError {
  using ValidationError::ValidationError;
};

enum class Label : std::uint8_t { clean, injected, removed_marker, attack_unknown };

inline std::string_view to_string(Label label) {
  switch (label) {
    case Label::clean: return "clean";
    case Label::injected: return "injected";
    case Label::removed_marker: return "removed";
    case Label::attack_unknown: return "attack-unknown";
  }
  return "clean";
}

inline std::optional<Label> parse_label(std::string_view text) {
  if (text.empty() || text == "clean") return Label::clean;
  if (text == "injected") return Label::injected;
  if (text == "removed") return Label::removed_marker;
  if (text == "attack-unknown") return Label::attack_unknown;
  return std::nullopt;
}

/// Up to eight data bytes, stored inline.
class Payload {
 public:
  static constexpr std::size_t kCapacity = 8;

  Payload() = default;
  Payload(std::initializer_list<std::uint8_t> bytes) {
    for (auto b : bytes) push_back(b);
  }
  Payload(std::size_t n, std::uint8_t value) { assign(n, value); }

  void push_back(std::uint8_t b) {
    if (size_ == kCapacity) throw ValidationError("payload exceeds 8 bytes");
    bytes_[size_++] = b;
  }
  void assign(std::size_t n, std::uint8_t value) {
    if (n > kCapacity) throw ValidationError("payload exceeds 8 bytes");
    size_ = static_cast<std::uint8_t>(n);
    std::fill(bytes_.begin(), bytes_.begin() + n, value);
  }
  void clear() { size_ = 0; }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::uint8_t& operator[](std::size_t i) { return bytes_[i]; }
  std::uint8_t operator[](std::size_t i) const { return bytes_[i]; }
  std::uint8_t* begin() { return bytes_.data(); }
  std::uint8_t* end() { return bytes_.data() + size_; }
  const std::uint8_t* begin() const { return bytes_.data(); }
  const std::uint8_t* end() const { return bytes_.data() + size_; }

  friend bool operator==(const Payload& a, const Payload& b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
  }

 private:
  std::array<std::uint8_t, kCapacity> bytes_{};
  std::uint8_t size_ = 0;
};

struct CanFrame {
  Micros timestamp = 0;
  CanId id = 0;
  std::uint8_t dlc = 0;
  Payload payload;
  Label label = Label::clean;
  // 29-bit format. Set by readers when the ID does not fit 11 bits.
  bool extended = false;

  void validate() const {
    if (dlc > 8) throw ValidationError("dlc " + std::to_string(dlc) + " exceeds 8");
    if (payload.size() != dlc)
      throw ValidationError("dlc " + std::to_string(dlc) + " does not match payload length " +
                            std::to_string(payload.size()));
    if (id >= kIdLimit) throw ValidationError("identifier exceeds 29 bits");
    if (!extended && id > kMaxStandardId)
      throw ValidationError("identifier exceeds 11 bits in standard format");
    if (timestamp < 0) throw ValidationError("negative timestamp");
  }

  friend bool operator==(const CanFrame&, const CanFrame&) = default;
};

enum class AttackKind : std::uint8_t { none, inject_replay, remove_inhibition, impersonation, dos_flood };

inline std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "clean";
    case AttackKind::inject_replay: return "inject-replay";
    case AttackKind::remove_inhibition: return "remove-inhibition";
    case AttackKind::impersonation: return "impersonation";
    case AttackKind::dos_flood: return "dos-flood";
  }
  return "clean";
}

inline std::optional<AttackKind> parse_attack_kind(std::string_view text) {
  if (text == "clean" || text == "none") return AttackKind::none;
  if (text == "inject-replay") return AttackKind::inject_replay;
  if (text == "remove-inhibition") return AttackKind::remove_inhibition;
  if (text == "impersonation") return AttackKind::impersonation;
  if (text == "dos-flood") return AttackKind::dos_flood;
  return std::nullopt;
}

/// Attack descriptor. Unset times mean "derive from the base trace".
struct AttackSpec {
  AttackKind kind = AttackKind::none;
  CanId target_id = 0;
  double frequency = 0.0;  // messages per second
  std::optional<Micros> start_time;
  std::optional<Micros> end_time;
  // Offset of the first injection inside each second, as a fraction of 1/f.
  double phase = 0.5;
  // Impersonation only: originals kept this long after the start.
  Micros overlap = 0;

  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

struct TraceMeta {
  std::string source;
  std::uint32_t bitrate = kDefaultBitrate;
  AttackSpec attack;
  std::size_t injected_count = 0;
  std::size_t removed_count = 0;
  // Removal span actually applied (for missing-id accounting).
  Micros removal_start = 0;
  Micros removal_end = 0;

  friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

struct Trace {
  std::vector<CanFrame> frames;
  TraceMeta meta;

  bool empty() const { return frames.empty(); }
  std::size_t size() const { return frames.size(); }
  Micros start_time() const { return frames.empty() ? 0 : frames.front().timestamp; }
  Micros end_time() const { return frames.empty() ? 0 : frames.back().timestamp; }

  void check_ordered() const {
    for (std::size_t i = 1; i < frames.size(); ++i)
      if (frames[i].timestamp < frames[i - 1].timestamp)
        throw OrderingError("trace timestamps decrease at frame " + std::to_string(i));
  }
};

}  // namespace cantids
