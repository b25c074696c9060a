#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include "cantids/cantids.hpp"

namespace fixtures {

using namespace cantids;

inline Micros ms(double v) { return static_cast<Micros>(std::llround(v * 1000.0)); }

inline CanFrame frame(Micros t, CanId id, Label label = Label::clean, std::uint8_t dlc = 8) {
  CanFrame f;
  f.timestamp = t;
  f.id = id;
  f.dlc = dlc;
  f.payload = Payload(dlc, 0);
  f.label = label;
  f.extended = id > kMaxStandardId;
  return f;
}

/// One ID at the given absolute times (milliseconds).
inline Trace times_ms(CanId id, std::initializer_list<double> ts, Label label = Label::clean) {
  Trace t;
  for (double v : ts) t.frames.push_back(frame(ms(v), id, label));
  return t;
}

inline Trace periodic(CanId id, Micros ct, std::size_t n, Micros start = 0) {
  Trace t;
  for (std::size_t i = 0; i < n; ++i) t.frames.push_back(frame(start + static_cast<Micros>(i) * ct, id));
  return t;
}

/// Stable merge by timestamp.
inline Trace merged(std::vector<Trace> parts) {
  Trace out;
  for (auto& p : parts) out.frames.insert(out.frames.end(), p.frames.begin(), p.frames.end());
  std::stable_sort(out.frames.begin(), out.frames.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
  return out;
}

inline CycleRecord record(CanId id, Micros ct, Micros min_dt = 0, Micros max_dt = 0) {
  CycleRecord r;
  r.id = id;
  r.ct = ct;
  r.cyclic = true;
  r.mean_dt = static_cast<double>(ct);
  r.min_dt = min_dt ? min_dt : ct;
  r.max_dt = max_dt ? max_dt : ct;
  r.max_abs_error = std::max(ct - r.min_dt, r.max_dt - ct);
  r.wctt = 250;
  r.samples = 100;
  return r;
}

inline CycleTimeModel model_of(std::initializer_list<CycleRecord> recs) {
  CycleTimeModel m;
  for (const auto& r : recs) m.records[r.id] = r;
  return m;
}

inline std::vector<Verdict> run(DetectorKind kind, const Trace& trace, const CycleTimeModel& model,
                                const DetectorConfig& config = {}) {
  auto det = make_detector(kind, config, model);
  return run_detector(*det, trace);
}

inline std::vector<Verdict> anomalies(const std::vector<Verdict>& vs) {
  std::vector<Verdict> out;
  for (const auto& v : vs)
    if (v.anomalous) out.push_back(v);
  return out;
}

}  // namespace fixtures
