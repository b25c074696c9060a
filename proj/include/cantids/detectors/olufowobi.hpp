#pragma once

#include <cmath>
#include <unordered_map>

#include "cantids/detector.hpp"

namespace cantids {

/// Response-time schedulability check: the k-th arrival after the reference
/// must fall in [t_ref + k*P - J - C, t_ref + k*P + J + C].
class OlufowobiDetector : public Detector {
 public:
  struct IdState {
    Micros t_ref = 0;
    long long k = 1;
    std::uint32_t ref_index = 0;
  };

  OlufowobiDetector(DetectorConfig config, CycleTimeModel model) : Detector(std::move(config), std::move(model)) {}

  DetectorKind kind() const override { return DetectorKind::olufowobi20; }

  OlufowobiParams params_for(const CycleRecord& rec) const {
    auto it = config_.olufowobi.find(rec.id);
    if (it != config_.olufowobi.end()) return it->second;
    return {static_cast<double>(rec.min_dt), static_cast<double>(rec.max_dt - rec.min_dt), rec.wctt,
            static_cast<double>(rec.ct)};
  }

  const IdState* state(CanId id) const {
    auto it = state_.find(id);
    return it == state_.end() ? nullptr : &it->second.s;
  }

 protected:
  void on_frame(const CanFrame& f, std::uint32_t index, const CycleRecord* rec, std::vector<Verdict>& out) override {
    auto [it, fresh] = state_.try_emplace(f.id);
    Entry& e = it->second;
    if (fresh) {
      e.p = params_for(*rec);
      e.s = {f.timestamp, 1, index};
      return;
    }
    if (!(e.p.period_est > 0)) return;
    const double slack = e.p.jitter + e.p.tx_time;
    const double t = static_cast<double>(f.timestamp);
    const double base = static_cast<double>(e.s.t_ref);
    long long kk = e.s.k;
    double need = std::ceil((t - base - slack) / e.p.period_est);
    if (need > static_cast<double>(kk)) kk = static_cast<long long>(need);
    while (base + kk * e.p.period_est + slack < t) ++kk;
    double lower = base + kk * e.p.period_est - slack;
    if (t >= lower) {
      e.s = {f.timestamp, 1, index};
      return;
    }
    Verdict v;
    v.id = f.id;
    v.t_start = e.s.t_ref;
    v.t_end = f.timestamp;
    v.anomalous = true;
    v.score = (lower - t) / kMicrosPerMs;
    v.frames = {e.s.ref_index, index};
    out.push_back(std::move(v));
    if (!config_.olufowobi_update_protection) e.s.k = kk + 1;
  }

  void on_reset() override { state_.clear(); }

 private:
  struct Entry {
    OlufowobiParams p;
    IdState s;
  };
  std::unordered_map<CanId, Entry> state_;
};

}  // namespace cantids
