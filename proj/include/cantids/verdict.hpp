#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "cantids/hex.hpp"
#include "cantids/types.hpp"

namespace cantids {

enum class VerdictKind : std::uint8_t { per_message, per_window, missing_id, unknown_id };

inline std::string_view to_string(VerdictKind kind) {
  switch (kind) {
    case VerdictKind::per_message: return "per-message";
    case VerdictKind::per_window: return "per-window";
    case VerdictKind::missing_id: return "missing-id";
    case VerdictKind::unknown_id: return "unknown-id";
  }
  return "per-message";
}

inline std::optional<VerdictKind> parse_verdict_kind(std::string_view text) {
  if (text == "per-message") return VerdictKind::per_message;
  if (text == "per-window") return VerdictKind::per_window;
  if (text == "missing-id") return VerdictKind::missing_id;
  if (text == "unknown-id") return VerdictKind::unknown_id;
  return std::nullopt;
}

/// One detector decision.
///
/// `frames` holds trace positions. For per-message verdicts the last entry is
/// the frame being judged and any earlier entries are the frames that define
/// its inter-arrival time; grouped verdicts (held messages, consecutive alerts)
/// and per-window verdicts list every covered frame. Missing-id verdicts cover
/// no frame; their span is the expired deadline.
struct Verdict {
  VerdictKind kind = VerdictKind::per_message;
  CanId id = 0;
  Micros t_start = 0;
  Micros t_end = 0;
  bool anomalous = false;
  // Message arrived after the acceptance window. Informational only.
  bool late = false;
  std::uint64_t group_tag = 0;
  double score = 0.0;
  std::vector<std::uint32_t> frames;

  std::uint32_t subject() const { return frames.back(); }

  friend bool operator==(const Verdict&, const Verdict&) = default;
  friend bool operator<(const Verdict& a, const Verdict& b) {
    return std::tie(a.t_end, a.t_start, a.id, a.kind, a.frames, a.anomalous) <
           std::tie(b.t_end, b.t_start, b.id, b.kind, b.frames, b.anomalous);
  }
};

inline nlohmann::json to_json(const Verdict& v) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(v.kind));
  j["id"] = format_id(v.id);
  j["t_start"] = format_seconds(v.t_start);
  j["t_end"] = format_seconds(v.t_end);
  j["anomalous"] = v.anomalous;
  if (v.late) j["late"] = true;
  if (v.group_tag) j["group"] = v.group_tag;
  j["score"] = v.score;
  j["frames"] = v.frames;
  return j;
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
  Verdict v;
  auto kind = parse_verdict_kind(j.at("kind").get<std::string>());
  if (!kind) throw ValidationError("unknown verdict kind");
  v.kind = *kind;
  auto id = parse_id(j.at("id").get<std::string>());
  auto t0 = parse_seconds(j.at("t_start").get<std::string>());
  auto t1 = parse_seconds(j.at("t_end").get<std::string>());
  if (!id || !t0 || !t1) throw ValidationError("malformed verdict record");
  v.id = *id;
  v.t_start = *t0;
  v.t_end = *t1;
  v.anomalous = j.at("anomalous").get<bool>();
  v.late = j.value("late", false);
  v.group_tag = j.value("group", std::uint64_t{0});
  v.score = j.value("score", 0.0);
  v.frames = j.value("frames", std::vector<std::uint32_t>{});
  return v;
}

/// Verdict files are JSON Lines, one verdict per line.
inline void write_verdicts(std::ostream& out, const std::vector<Verdict>& verdicts) {
  for (const auto& v : verdicts) out << to_json(v).dump() << '\n';
}

inline std::vector<Verdict> read_verdicts(std::istream& in) {
  std::vector<Verdict> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(verdict_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

}  // namespace cantids
