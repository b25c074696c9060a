#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "cantids/hex.hpp"
#include "cantids/types.hpp"

namespace cantids {

enum class TraceFormat { native_csv, otids_text };

inline constexpr std::string_view kNativeHeader = "timestamp,id,dlc,payload,label";

inline std::optional<TraceFormat> parse_trace_format(std::string_view text) {
  if (text == "native" || text == "native-csv" || text == "csv") return TraceFormat::native_csv;
  if (text == "otids" || text == "otids-text") return TraceFormat::otids_text;
  return std::nullopt;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline CanFrame parse_native_line(std::string_view line, std::size_t line_no) {
  auto fields = split(line, ',');
  if (fields.size() != 4 && fields.size() != 5)
    throw ParseError(line_no, "expected 4 or 5 comma-separated fields, got " + std::to_string(fields.size()));
  CanFrame f;
  auto ts = parse_seconds(trim(fields[0]));
  if (!ts) throw ParseError(line_no, "bad timestamp '" + std::string(fields[0]) + "'");
  f.timestamp = *ts;
  auto id = parse_id(trim(fields[1]));
  if (!id) throw ParseError(line_no, "bad identifier '" + std::string(fields[1]) + "'");
  f.id = *id;
  f.extended = f.id > kMaxStandardId;
  auto dlc_text = trim(fields[2]);
  unsigned dlc = 0;
  auto [ptr, ec] = std::from_chars(dlc_text.data(), dlc_text.data() + dlc_text.size(), dlc);
  if (ec != std::errc{} || ptr != dlc_text.data() + dlc_text.size() || dlc > 15)
    throw ParseError(line_no, "bad dlc '" + std::string(dlc_text) + "'");
  f.dlc = static_cast<std::uint8_t>(dlc);
  auto payload = parse_payload(trim(fields[3]));
  if (!payload) throw ParseError(line_no, "bad payload '" + std::string(fields[3]) + "'");
  f.payload = std::move(*payload);
  if (fields.size() == 5) {
    auto label = parse_label(trim(fields[4]));
    if (!label) throw ParseError(line_no, "bad label '" + std::string(fields[4]) + "'");
    f.label = *label;
  }
  try {
    f.validate();
  } catch (const ValidationError& e) {
    throw ParseError(line_no, e.what());
  }
  return f;
}

// Returns nullopt for remote frames.
inline std::optional<CanFrame> parse_otids_line(std::string_view line, std::size_t line_no) {
  auto tok = tokens(line);
  if (tok.size() < 7 || tok[0] != "Timestamp:" || tok[2] != "ID:" || tok[5] != "DLC:")
    throw ParseError(line_no, "not an OTIDS record");
  CanFrame f;
  auto ts = parse_seconds(tok[1]);
  if (!ts) throw ParseError(line_no, "bad timestamp '" + std::string(tok[1]) + "'");
  f.timestamp = *ts;
  auto id = parse_id(tok[3]);
  if (!id) throw ParseError(line_no, "bad identifier '" + std::string(tok[3]) + "'");
  f.id = *id;
  f.extended = f.id > kMaxStandardId;
  bool remote = tok[4].find_first_not_of('0') != std::string_view::npos;
  unsigned dlc = 0;
  auto [ptr, ec] = std::from_chars(tok[6].data(), tok[6].data() + tok[6].size(), dlc);
  if (ec != std::errc{} || dlc > 15) throw ParseError(line_no, "bad dlc '" + std::string(tok[6]) + "'");
  if (remote) return std::nullopt;
  f.dlc = static_cast<std::uint8_t>(dlc);
  for (std::size_t i = 7; i < tok.size(); ++i) {
    auto b = parse_hex_byte(tok[i]);
    if (!b) throw ParseError(line_no, "bad payload byte '" + std::string(tok[i]) + "'");
    f.payload.push_back(*b);
  }
  try {
    f.validate();
  } catch (const ValidationError& e) {
    throw ParseError(line_no, e.what());
  }
  return f;
}

}  // namespace detail

/// Reads a whole trace. Frames are returned in timestamp order (stable for
/// ties); remote frames are dropped.
inline Trace parse_trace(std::istream& in, TraceFormat format) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = detail::trim(line);
    if (view.empty()) continue;
    if (format == TraceFormat::native_csv) {
      if (line_no == 1 && view == kNativeHeader) continue;
      trace.frames.push_back(detail::parse_native_line(view, line_no));
    } else {
      if (auto f = detail::parse_otids_line(view, line_no)) trace.frames.push_back(std::move(*f));
    }
  }
  std::stable_sort(trace.frames.begin(), trace.frames.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
  return trace;
}

inline Trace parse_trace(std::string_view text, TraceFormat format) {
  std::istringstream in{std::string(text)};
  return parse_trace(in, format);
}

inline void write_native_csv(std::ostream& out, const Trace& trace) {
  out << kNativeHeader << '\n';
  for (const auto& f : trace.frames) {
    out << format_seconds(f.timestamp) << ',' << format_id(f.id) << ',' << static_cast<unsigned>(f.dlc) << ','
        << format_payload(f.payload) << ',' << to_string(f.label) << '\n';
  }
}

inline std::string to_native_csv(const Trace& trace) {
  std::ostringstream out;
  write_native_csv(out, trace);
  return out.str();
}

// JSON mapping for attack descriptors and trace metadata.

inline nlohmann::json to_json(const AttackSpec& spec) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(spec.kind));
  j["target_id"] = format_id(spec.target_id);
  j["frequency"] = spec.frequency;
  if (spec.start_time) j["start_time"] = format_seconds(*spec.start_time);
  if (spec.end_time) j["end_time"] = format_seconds(*spec.end_time);
  j["phase"] = spec.phase;
  if (spec.overlap) j["overlap"] = format_seconds(spec.overlap);
  return j;
}

namespace detail {
inline Micros json_seconds(const nlohmann::json& v, const char* field) {
  std::optional<Micros> out;
  if (v.is_string()) out = parse_seconds(v.get<std::string>());
  else if (v.is_number()) out = static_cast<Micros>(std::llround(v.get<double>() * kMicrosPerSecond));
  if (!out) throw ValidationError(std::string("bad time value for '") + field + "'");
  return *out;
}

inline CanId json_id(const nlohmann::json& v) {
  if (v.is_number_unsigned()) return v.get<CanId>();
  auto id = v.is_string() ? parse_id(v.get<std::string>()) : std::nullopt;
  if (!id) throw ValidationError("bad CAN identifier in JSON");
  return *id;
}
}  // namespace detail

inline AttackSpec attack_spec_from_json(const nlohmann::json& j) {
  AttackSpec spec;
  auto kind = parse_attack_kind(j.value("kind", std::string("clean")));
  if (!kind) throw ValidationError("unknown attack kind '" + j.value("kind", std::string()) + "'");
  spec.kind = *kind;
  if (j.contains("target_id")) spec.target_id = detail::json_id(j["target_id"]);
  spec.frequency = j.value("frequency", 0.0);
  if (j.contains("start_time")) spec.start_time = detail::json_seconds(j["start_time"], "start_time");
  if (j.contains("end_time")) spec.end_time = detail::json_seconds(j["end_time"], "end_time");
  spec.phase = j.value("phase", 0.5);
  if (j.contains("overlap")) spec.overlap = detail::json_seconds(j["overlap"], "overlap");
  return spec;
}

inline nlohmann::json to_json(const TraceMeta& meta) {
  nlohmann::json j;
  j["source"] = meta.source;
  j["bitrate"] = meta.bitrate;
  j["attack"] = to_json(meta.attack);
  j["injected_count"] = meta.injected_count;
  j["removed_count"] = meta.removed_count;
  j["removal_start"] = format_seconds(meta.removal_start);
  j["removal_end"] = format_seconds(meta.removal_end);
  return j;
}

inline TraceMeta trace_meta_from_json(const nlohmann::json& j) {
  TraceMeta meta;
  meta.source = j.value("source", std::string());
  meta.bitrate = j.value("bitrate", kDefaultBitrate);
  if (j.contains("attack")) meta.attack = attack_spec_from_json(j["attack"]);
  meta.injected_count = j.value("injected_count", std::size_t{0});
  meta.removed_count = j.value("removed_count", std::size_t{0});
  if (j.contains("removal_start")) meta.removal_start = detail::json_seconds(j["removal_start"], "removal_start");
  if (j.contains("removal_end")) meta.removal_end = detail::json_seconds(j["removal_end"], "removal_end");
  return meta;
}

inline std::filesystem::path meta_sidecar_path(const std::filesystem::path& trace_path) {
  return trace_path.string() + ".meta.json";
}

/// Loads a trace file plus its optional `.meta.json` sidecar.
inline Trace read_trace_file(const std::filesystem::path& path, TraceFormat format = TraceFormat::native_csv) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace '" + path.string() + "'");
  Trace trace = parse_trace(in, format);
  auto sidecar = meta_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream meta_in(sidecar);
    if (!meta_in) throw IoError("cannot open '" + sidecar.string() + "'");
    nlohmann::json j;
    try {
      meta_in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(sidecar.string() + ": " + e.what());
    }
    trace.meta = trace_meta_from_json(j);
  }
  if (trace.meta.source.empty()) trace.meta.source = path.stem().string();
  return trace;
}

inline void write_trace_file(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trace '" + path.string() + "'");
  write_native_csv(out, trace);
  if (trace.meta.attack.kind != AttackKind::none) {
    std::ofstream meta_out(meta_sidecar_path(path));
    if (!meta_out) throw IoError("cannot write metadata for '" + path.string() + "'");
    meta_out << to_json(trace.meta).dump(2) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace cantids
