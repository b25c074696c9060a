#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "cantids/detectors.hpp"

namespace cantids {

struct FitOptions {
  std::vector<double> otsuka_deltas;  // ascending; empty means 0.01 .. 0.25
  double taylor_threshold_step = 0.5;
  // Cho grid. Empty candidate lists fall back to the value in the base config.
  std::vector<int> cho_windows;
  std::vector<double> cho_p_inits;
  std::vector<double> cho_kappas;
  std::vector<double> cho_limits{5.0, 50.0, 500.0, 5000.0};
  int stabili_k_cap = 64;
};

inline std::size_t count_anomalies(const std::vector<Verdict>& verdicts) {
  return static_cast<std::size_t>(
      std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.anomalous; }));
}

inline std::size_t clean_false_positives(DetectorKind kind, const DetectorConfig& config, const CycleTimeModel& model,
                                         std::span<const Trace> clean) {
  auto det = make_detector(kind, config, model);
  std::size_t fp = 0;
  for (const auto& t : clean) fp += count_anomalies(run_detector(*det, t));
  return fp;
}

/// Smallest delta on the grid with no anomaly on the clean set; the largest
/// grid value otherwise.
inline double tune_otsuka_delta(std::span<const Trace> clean, const CycleTimeModel& model, DetectorConfig config,
                                const FitOptions& opts = {}) {
  std::vector<double> grid = opts.otsuka_deltas;
  if (grid.empty())
    for (int i = 1; i <= 25; ++i) grid.push_back(i / 100.0);
  for (double d : grid) {
    config.otsuka_delta = d;
    if (clean_false_positives(DetectorKind::otsuka14, config, model, clean) == 0) return d;
  }
  return grid.back();
}

/// Keeps the configured threshold unless a clean window reaches it, in which
/// case the threshold moves to the next step above the highest clean score.
inline double tune_taylor_threshold(std::span<const Trace> clean, const CycleTimeModel& model,
                                    const DetectorConfig& config, const FitOptions& opts = {}) {
  TaylorDetector det(config, model);
  double worst = -1;
  for (const auto& t : clean)
    for (const auto& v : run_detector(det, t)) worst = std::max(worst, v.score);
  if (worst < config.taylor_threshold) return config.taylor_threshold;
  return (std::floor(worst / opts.taylor_threshold_step) + 1) * opts.taylor_threshold_step;
}

/// Learns per-ID skew and error statistics over the clean traces in order.
inline std::map<CanId, ChoLearned> learn_cho_state(std::span<const Trace> clean, const CycleTimeModel& model,
                                                   DetectorConfig config) {
  config.cho_learned.clear();
  for (const auto& t : clean) {
    ChoDetector det(config, model);
    det.set_learning(true);
    run_detector(det, t);
    for (const auto& [id, l] : det.learned()) config.cho_learned[id] = l;
  }
  return config.cho_learned;
}

/// Exhaustive grid over (N, P, kappa, limit) minimising clean false
/// positives; ties keep the earliest grid point.
inline DetectorConfig tune_cho(std::span<const Trace> clean, const CycleTimeModel& model, DetectorConfig config,
                               const FitOptions& opts = {}) {
  auto or_default = [](auto list, auto fallback) {
    if (list.empty()) list.push_back(fallback);
    return list;
  };
  auto windows = or_default(opts.cho_windows, config.cho_window);
  auto ps = or_default(opts.cho_p_inits, config.cho_p_init);
  auto kappas = or_default(opts.cho_kappas, config.cho_kappa);
  auto limits = or_default(opts.cho_limits, config.cho_cusum_limit);

  DetectorConfig best = config;
  std::size_t best_fp = std::numeric_limits<std::size_t>::max();
  for (int n : windows)
    for (double p : ps) {
      DetectorConfig c = config;
      c.cho_window = n;
      c.cho_p_init = p;
      c.cho_learned = learn_cho_state(clean, model, c);
      for (double k : kappas)
        for (double g : limits) {
          c.cho_kappa = k;
          c.cho_cusum_limit = g;
          std::size_t fp = clean_false_positives(DetectorKind::cho16, c, model, clean);
          if (fp < best_fp) {
            best_fp = fp;
            best = c;
          }
        }
    }
  return best;
}

/// Largest |dt - ct| per ID within the first `seconds` of each clean trace.
inline std::map<CanId, Micros> fit_moore_m(std::span<const Trace> clean, const CycleTimeModel& model,
                                           double seconds) {
  std::map<CanId, Micros> m;
  const auto span = static_cast<Micros>(std::llround(seconds * kMicrosPerSecond));
  for (const auto& t : clean) {
    std::unordered_map<CanId, Micros> last;
    const Micros stop = t.start_time() + span;
    for (const auto& f : t.frames) {
      if (f.timestamp >= stop) break;
      auto [it, fresh] = last.try_emplace(f.id, f.timestamp);
      if (fresh) continue;
      Micros dt = f.timestamp - it->second;
      it->second = f.timestamp;
      const auto* rec = model.find(f.id);
      if (!rec) continue;
      Micros err = std::abs(dt - rec->ct);
      auto [mit, added] = m.try_emplace(f.id, err);
      if (!added) mit->second = std::max(mit->second, err);
    }
  }
  return m;
}

/// Smallest k per ID such that replaying the clean traces raises no
/// missing-id alarm. Throws when an ID needs more than the cap.
inline std::map<CanId, int> tune_stabili_k(std::span<const Trace> clean, const CycleTimeModel& model,
                                           DetectorConfig config, const FitOptions& opts = {}) {
  std::map<CanId, Micros> gap;
  for (const auto& t : clean) {
    std::unordered_map<CanId, Micros> last;
    for (const auto& f : t.frames) {
      auto [it, fresh] = last.try_emplace(f.id, t.start_time());
      Micros g = f.timestamp - it->second;
      it->second = f.timestamp;
      gap[f.id] = std::max(gap[f.id], g);
    }
  }
  config.stabili_k.clear();
  for (const auto& [id, rec] : model.records) {
    if (!rec.cyclic) continue;
    auto g = gap.find(id);
    Micros worst = g == gap.end() ? 0 : g->second;
    Micros k = std::max<Micros>(1, (worst + rec.ct - 1) / rec.ct);
    if (k > opts.stabili_k_cap)
      throw ValidationError("stabili k for " + format_id(id) + " exceeds " + std::to_string(opts.stabili_k_cap));
    config.stabili_k[id] = static_cast<int>(k);
  }
  while (true) {
    StabiliDetector det(config, model);
    std::set<CanId> alarmed;
    for (const auto& t : clean)
      for (const auto& v : run_detector(det, t)) alarmed.insert(v.id);
    if (alarmed.empty()) break;
    for (CanId id : alarmed) {
      if (++config.stabili_k[id] > opts.stabili_k_cap)
        throw ValidationError("stabili k for " + format_id(id) + " exceeds " + std::to_string(opts.stabili_k_cap));
    }
  }
  return config.stabili_k;
}

inline std::map<CanId, OlufowobiParams> fit_olufowobi(std::span<const Trace> clean, const CycleTimeModel& model) {
  struct Range {
    Micros lo = std::numeric_limits<Micros>::max();
    Micros hi = 0;
  };
  std::map<CanId, Range> range;
  for (const auto& t : clean) {
    std::unordered_map<CanId, Micros> last;
    for (const auto& f : t.frames) {
      auto [it, fresh] = last.try_emplace(f.id, f.timestamp);
      if (fresh) continue;
      Micros dt = f.timestamp - it->second;
      it->second = f.timestamp;
      auto& r = range[f.id];
      r.lo = std::min(r.lo, dt);
      r.hi = std::max(r.hi, dt);
    }
  }
  std::map<CanId, OlufowobiParams> out;
  for (const auto& [id, r] : range) {
    const auto* rec = model.find(id);
    if (!rec || !rec->cyclic) continue;
    out[id] = {static_cast<double>(r.lo), static_cast<double>(r.hi - r.lo), rec->wctt, static_cast<double>(rec->ct)};
  }
  return out;
}

/// Tunes a detector on clean traffic and returns the resulting configuration.
inline DetectorConfig fit(DetectorKind kind, std::span<const Trace> clean, const CycleTimeModel& model,
                          DetectorConfig config = {}, const FitOptions& opts = {}) {
  config.validate();
  for (const auto& t : clean)
    for (const auto& f : t.frames)
      if (!model.find(f.id)) throw ValidationError("identifier " + format_id(f.id) + " is not in the model");
  switch (kind) {
    case DetectorKind::otsuka14: config.otsuka_delta = tune_otsuka_delta(clean, model, config, opts); break;
    case DetectorKind::taylor15: config.taylor_threshold = tune_taylor_threshold(clean, model, config, opts); break;
    case DetectorKind::cho16: config = tune_cho(clean, model, config, opts); break;
    case DetectorKind::moore17:
      config.moore_m = fit_moore_m(clean, model, config.moore_training_seconds);
      break;
    case DetectorKind::stabili19: config.stabili_k = tune_stabili_k(clean, model, config, opts); break;
    case DetectorKind::olufowobi20: config.olufowobi = fit_olufowobi(clean, model); break;
    case DetectorKind::gmiden16:
    case DetectorKind::song16:
    case DetectorKind::song16_dos: break;
  }
  return config;
}

}  // namespace cantids
