#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "cantids/frame_bits.hpp"
#include "cantids/hex.hpp"
#include "cantids/types.hpp"

namespace cantids {

/// Baseline timing of one identifier, learned from clean traffic.
struct CycleRecord {
  CanId id = 0;
  Micros ct = 0;  // mean inter-arrival rounded to the nearest millisecond
  bool cyclic = false;
  double mean_dt = 0.0;  // microseconds
  double std_dt = 0.0;   // microseconds, population
  Micros min_dt = 0;
  Micros max_dt = 0;
  double max_deviation_pct = 0.0;  // 100 * max|dt - ct| / ct
  Micros max_abs_error = 0;        // max|dt - ct|
  double wctt = 0.0;               // worst-case transmission time, microseconds
  std::size_t samples = 0;         // number of inter-arrival samples

  friend bool operator==(const CycleRecord&, const CycleRecord&) = default;
};

struct CycleTimeModel {
  std::map<CanId, CycleRecord> records;
  // IDs seen fewer than twice; no record produced.
  std::vector<CanId> warnings;

  const CycleRecord* find(CanId id) const {
    auto it = records.find(id);
    return it == records.end() ? nullptr : &it->second;
  }

  friend bool operator==(const CycleTimeModel&, const CycleTimeModel&) = default;
};

struct CycleOptions {
  double cyclicity_threshold = 0.5;  // max coefficient of variation for a cyclic ID
  BitSizeOptions bits{};
};

struct DtStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t samples = 0;
};

/// Cyclic iff the coefficient of variation of the inter-arrival times is at
/// most `threshold`.
inline bool classify_cyclic(const DtStats& stats, double threshold = 0.5) {
  if (stats.samples == 0 || stats.mean <= 0.0) return false;
  return stats.std / stats.mean <= threshold;
}

inline Micros round_to_ms(double us) {
  return static_cast<Micros>(std::llround(us / kMicrosPerMs)) * kMicrosPerMs;
}

/// Profiles clean traces. Inter-arrival times never span two traces. Sums are
/// exact integers so the result does not depend on trace order.
inline CycleTimeModel estimate_cycle_times(std::span<const Trace> traces, const CycleOptions& opts = {}) {
  struct Acc {
    std::size_t occurrences = 0;
    std::size_t n = 0;
    __int128 sum = 0;
    unsigned __int128 sum_sq = 0;
    Micros min_dt = 0;
    Micros max_dt = 0;
    std::vector<Micros> dts;
    int max_bits = 0;
    double wctt = 0.0;
  };
  std::map<CanId, Acc> acc;
  for (const auto& trace : traces) {
    trace.check_ordered();
    std::unordered_map<CanId, Micros> last;
    const std::uint32_t bitrate = trace.meta.bitrate ? trace.meta.bitrate : kDefaultBitrate;
    for (const auto& f : trace.frames) {
      auto& a = acc[f.id];
      ++a.occurrences;
      const int bits = frame_bit_size(f, opts.bits);
      a.max_bits = std::max(a.max_bits, bits);
      a.wctt = std::max(a.wctt, 1e6 * bits / static_cast<double>(bitrate));
      auto [it, first] = last.try_emplace(f.id, f.timestamp);
      if (!first) {
        const Micros dt = f.timestamp - it->second;
        it->second = f.timestamp;
        if (a.n == 0) a.min_dt = a.max_dt = dt;
        a.min_dt = std::min(a.min_dt, dt);
        a.max_dt = std::max(a.max_dt, dt);
        a.sum += dt;
        a.sum_sq += static_cast<unsigned __int128>(dt) * static_cast<unsigned __int128>(dt);
        a.dts.push_back(dt);
        ++a.n;
      }
    }
  }

  CycleTimeModel model;
  for (auto& [id, a] : acc) {
    if (a.n == 0) {
      model.warnings.push_back(id);
      continue;
    }
    CycleRecord r;
    r.id = id;
    r.samples = a.n;
    r.mean_dt = static_cast<double>(a.sum) / static_cast<double>(a.n);
    const double mean_sq = static_cast<double>(a.sum_sq) / static_cast<double>(a.n);
    r.std_dt = std::sqrt(std::max(0.0, mean_sq - r.mean_dt * r.mean_dt));
    r.min_dt = a.min_dt;
    r.max_dt = a.max_dt;
    r.ct = std::max<Micros>(kMicrosPerMs, round_to_ms(r.mean_dt));
    r.cyclic = classify_cyclic({r.mean_dt, r.std_dt, r.samples}, opts.cyclicity_threshold);
    Micros err = 0;
    for (Micros dt : a.dts) err = std::max(err, dt > r.ct ? dt - r.ct : r.ct - dt);
    r.max_abs_error = err;
    r.max_deviation_pct = 100.0 * static_cast<double>(err) / static_cast<double>(r.ct);
    r.wctt = a.wctt;
    model.records.emplace(id, r);
  }
  return model;
}

inline CycleTimeModel estimate_cycle_times(const Trace& trace, const CycleOptions& opts = {}) {
  return estimate_cycle_times(std::span<const Trace>(&trace, 1), opts);
}

// JSON: {"0x10": {...}, ...}; times in milliseconds.

inline nlohmann::json to_json(const CycleTimeModel& model) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, r] : model.records) {
    j[format_id(id)] = {
        {"ct_ms", to_ms(r.ct)},
        {"cyclic", r.cyclic},
        {"mean_dt_ms", r.mean_dt / kMicrosPerMs},
        {"std_dt_ms", r.std_dt / kMicrosPerMs},
        {"min_dt_ms", to_ms(r.min_dt)},
        {"max_dt_ms", to_ms(r.max_dt)},
        {"max_deviation_pct", r.max_deviation_pct},
        {"max_abs_error_ms", to_ms(r.max_abs_error)},
        {"wctt_ms", r.wctt / kMicrosPerMs},
        {"samples", r.samples},
    };
  }
  return j;
}

inline CycleTimeModel cycle_model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("cycle-time model must be a JSON object");
  auto ms = [](const nlohmann::json& r, const char* key) {
    if (!r.contains(key)) throw ValidationError(std::string("cycle record missing '") + key + "'");
    return static_cast<Micros>(std::llround(r.at(key).get<double>() * kMicrosPerMs));
  };
  CycleTimeModel model;
  for (const auto& [key, r] : j.items()) {
    auto id = parse_id(key);
    if (!id) throw ValidationError("bad identifier key '" + key + "' in cycle-time model");
    CycleRecord rec;
    rec.id = *id;
    rec.ct = ms(r, "ct_ms");
    rec.cyclic = r.value("cyclic", true);
    rec.mean_dt = r.value("mean_dt_ms", to_ms(rec.ct)) * kMicrosPerMs;
    rec.std_dt = r.value("std_dt_ms", 0.0) * kMicrosPerMs;
    rec.min_dt = r.contains("min_dt_ms") ? ms(r, "min_dt_ms") : rec.ct;
    rec.max_dt = r.contains("max_dt_ms") ? ms(r, "max_dt_ms") : rec.ct;
    rec.max_deviation_pct = r.value("max_deviation_pct", 0.0);
    rec.max_abs_error = r.contains("max_abs_error_ms") ? ms(r, "max_abs_error_ms") : 0;
    rec.wctt = r.value("wctt_ms", 0.0) * kMicrosPerMs;
    rec.samples = r.value("samples", std::size_t{0});
    if (rec.cyclic && rec.ct <= 0) throw ValidationError("cyclic ID " + key + " has non-positive cycle time");
    model.records.emplace(*id, rec);
  }
  return model;
}

}  // namespace cantids
