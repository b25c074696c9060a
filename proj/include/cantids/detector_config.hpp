#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cantids/hex.hpp"
#include "cantids/types.hpp"

namespace cantids {

enum class DetectorKind : std::uint8_t {
  otsuka14,
  taylor15,
  cho16,
  gmiden16,
  song16,
  song16_dos,
  moore17,
  stabili19,
  olufowobi20,
};

inline constexpr DetectorKind kAllDetectors[] = {
    DetectorKind::otsuka14,  DetectorKind::taylor15,   DetectorKind::cho16,
    DetectorKind::gmiden16,  DetectorKind::song16,     DetectorKind::song16_dos,
    DetectorKind::moore17,   DetectorKind::stabili19,  DetectorKind::olufowobi20,
};

inline std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::otsuka14: return "otsuka14";
    case DetectorKind::taylor15: return "taylor15";
    case DetectorKind::cho16: return "cho16";
    case DetectorKind::gmiden16: return "gmiden16";
    case DetectorKind::song16: return "song16";
    case DetectorKind::song16_dos: return "song16-dos";
    case DetectorKind::moore17: return "moore17";
    case DetectorKind::stabili19: return "stabili19";
    case DetectorKind::olufowobi20: return "olufowobi20";
  }
  return "";
}

inline std::optional<DetectorKind> parse_detector_kind(std::string_view name) {
  for (auto kind : kAllDetectors)
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

/// Clock-skew state learned on clean traffic, used to warm-start detection.
struct ChoLearned {
  double skew = 0.0;
  double p = 0.05;
  std::size_t err_n = 0;
  double err_mean = 0.0;
  double err_m2 = 0.0;

  friend bool operator==(const ChoLearned&, const ChoLearned&) = default;
};

/// Per-ID timing specification (all microseconds).
struct OlufowobiParams {
  double period_est = 0.0;      // estimated period, the minimum inter-arrival
  double jitter = 0.0;          // release jitter, max - min inter-arrival
  double tx_time = 0.0;         // worst-case transmission time
  double precise_period = 0.0;  // taken as the cycle time

  friend bool operator==(const OlufowobiParams&, const OlufowobiParams&) = default;
};

struct DetectorConfig {
  // otsuka14
  double otsuka_delta = 0.04;
  // taylor15
  int taylor_seq_len = 2;
  double taylor_threshold = 2.0;
  double taylor_applicability_ct_max_ms = 50.0;
  // cho16
  int cho_window = 10;
  double cho_p_init = 0.05;
  double cho_kappa = 0.1;
  double cho_forgetting = 0.9995;
  double cho_cusum_limit = 5.0;
  std::map<CanId, ChoLearned> cho_learned;
  // song16-dos
  double song_dos_dt_ms = 0.2;
  int song_dos_threshold = 3;
  // moore17
  double moore_margin_factor = 0.15;
  int moore_consecutive = 3;
  double moore_training_seconds = 5.0;
  std::map<CanId, Micros> moore_m;
  // stabili19
  std::map<CanId, int> stabili_k;
  // olufowobi20
  std::map<CanId, OlufowobiParams> olufowobi;
  bool olufowobi_update_protection = true;

  static DetectorConfig ventus() { return {}; }

  static DetectorConfig otids() {
    DetectorConfig c;
    c.otsuka_delta = 0.25;
    c.taylor_threshold = 1.0;
    c.cho_window = 5;
    c.cho_p_init = 0.001;
    c.cho_kappa = 2.5;
    return c;
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0)) throw ValidationError(std::string(name) + " must be positive");
    };
    if (otsuka_delta < 0 || otsuka_delta >= 1) throw ValidationError("otsuka_delta must be in [0, 1)");
    if (taylor_seq_len < 2) throw ValidationError("taylor_seq_len must be at least 2");
    positive(taylor_threshold, "taylor_threshold");
    positive(taylor_applicability_ct_max_ms, "taylor_applicability_ct_max_ms");
    if (cho_window < 2) throw ValidationError("cho_window must be at least 2");
    positive(cho_p_init, "cho_p_init");
    positive(cho_kappa, "cho_kappa");
    if (!(cho_forgetting > 0 && cho_forgetting <= 1)) throw ValidationError("cho_forgetting must be in (0, 1]");
    positive(cho_cusum_limit, "cho_cusum_limit");
    positive(song_dos_dt_ms, "song_dos_dt_ms");
    if (song_dos_threshold < 1) throw ValidationError("song_dos_threshold must be positive");
    positive(moore_margin_factor, "moore_margin_factor");
    if (moore_consecutive < 1) throw ValidationError("moore_consecutive must be positive");
    for (const auto& [id, k] : stabili_k)
      if (k < 1) throw ValidationError("stabili_k for " + format_id(id) + " must be at least 1");
  }

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

inline nlohmann::json to_json(const DetectorConfig& c) {
  nlohmann::json j;
  j["otsuka_delta"] = c.otsuka_delta;
  j["taylor_seq_len"] = c.taylor_seq_len;
  j["taylor_threshold"] = c.taylor_threshold;
  j["taylor_applicability_ct_max_ms"] = c.taylor_applicability_ct_max_ms;
  j["cho_window"] = c.cho_window;
  j["cho_p_init"] = c.cho_p_init;
  j["cho_kappa"] = c.cho_kappa;
  j["cho_forgetting"] = c.cho_forgetting;
  j["cho_cusum_limit"] = c.cho_cusum_limit;
  j["song_dos_dt_ms"] = c.song_dos_dt_ms;
  j["song_dos_threshold"] = c.song_dos_threshold;
  j["moore_margin_factor"] = c.moore_margin_factor;
  j["moore_consecutive"] = c.moore_consecutive;
  j["moore_training_seconds"] = c.moore_training_seconds;
  j["olufowobi_update_protection"] = c.olufowobi_update_protection;

  nlohmann::json cho = nlohmann::json::object();
  for (const auto& [id, s] : c.cho_learned)
    cho[format_id(id)] = {{"skew", s.skew}, {"p", s.p}, {"err_n", s.err_n}, {"err_mean", s.err_mean},
                          {"err_m2", s.err_m2}};
  j["cho_learned"] = cho;
  nlohmann::json moore = nlohmann::json::object();
  for (const auto& [id, m] : c.moore_m) moore[format_id(id)] = to_ms(m);
  j["moore_m_ms"] = moore;
  nlohmann::json stab = nlohmann::json::object();
  for (const auto& [id, k] : c.stabili_k) stab[format_id(id)] = k;
  j["stabili_k"] = stab;
  nlohmann::json olu = nlohmann::json::object();
  for (const auto& [id, p] : c.olufowobi)
    olu[format_id(id)] = {{"period_est_ms", p.period_est / kMicrosPerMs},
                          {"jitter_ms", p.jitter / kMicrosPerMs},
                          {"tx_time_ms", p.tx_time / kMicrosPerMs},
                          {"precise_period_ms", p.precise_period / kMicrosPerMs}};
  j["olufowobi"] = olu;
  return j;
}

/// Missing keys keep their defaults, so partial override files are accepted.
inline DetectorConfig detector_config_from_json(const nlohmann::json& j, DetectorConfig c = {}) {
  auto id_of = [](const std::string& key) {
    auto id = parse_id(key);
    if (!id) throw ValidationError("bad identifier key '" + key + "' in detector config");
    return *id;
  };
  try {
    c.otsuka_delta = j.value("otsuka_delta", c.otsuka_delta);
    c.taylor_seq_len = j.value("taylor_seq_len", c.taylor_seq_len);
    c.taylor_threshold = j.value("taylor_threshold", c.taylor_threshold);
    c.taylor_applicability_ct_max_ms = j.value("taylor_applicability_ct_max_ms", c.taylor_applicability_ct_max_ms);
    c.cho_window = j.value("cho_window", c.cho_window);
    c.cho_p_init = j.value("cho_p_init", c.cho_p_init);
    c.cho_kappa = j.value("cho_kappa", c.cho_kappa);
    c.cho_forgetting = j.value("cho_forgetting", c.cho_forgetting);
    c.cho_cusum_limit = j.value("cho_cusum_limit", c.cho_cusum_limit);
    c.song_dos_dt_ms = j.value("song_dos_dt_ms", c.song_dos_dt_ms);
    c.song_dos_threshold = j.value("song_dos_threshold", c.song_dos_threshold);
    c.moore_margin_factor = j.value("moore_margin_factor", c.moore_margin_factor);
    c.moore_consecutive = j.value("moore_consecutive", c.moore_consecutive);
    c.moore_training_seconds = j.value("moore_training_seconds", c.moore_training_seconds);
    c.olufowobi_update_protection = j.value("olufowobi_update_protection", c.olufowobi_update_protection);
    if (j.contains("cho_learned")) {
      c.cho_learned.clear();
      for (const auto& [key, s] : j["cho_learned"].items())
        c.cho_learned[id_of(key)] = {s.value("skew", 0.0), s.value("p", c.cho_p_init),
                                     s.value("err_n", std::size_t{0}), s.value("err_mean", 0.0),
                                     s.value("err_m2", 0.0)};
    }
    if (j.contains("moore_m_ms")) {
      c.moore_m.clear();
      for (const auto& [key, m] : j["moore_m_ms"].items())
        c.moore_m[id_of(key)] = static_cast<Micros>(std::llround(m.get<double>() * kMicrosPerMs));
    }
    if (j.contains("stabili_k")) {
      c.stabili_k.clear();
      for (const auto& [key, k] : j["stabili_k"].items()) c.stabili_k[id_of(key)] = k.get<int>();
    }
    if (j.contains("olufowobi")) {
      c.olufowobi.clear();
      for (const auto& [key, p] : j["olufowobi"].items())
        c.olufowobi[id_of(key)] = {p.value("period_est_ms", 0.0) * kMicrosPerMs,
                                   p.value("jitter_ms", 0.0) * kMicrosPerMs,
                                   p.value("tx_time_ms", 0.0) * kMicrosPerMs,
                                   p.value("precise_period_ms", 0.0) * kMicrosPerMs};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("detector config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace cantids
