#pragma once

#include <cmath>
#include <unordered_map>

#include "cantids/detector.hpp"

namespace cantids {

/// Alerts when |dt - ct| exceeds ct * margin + m and reports an anomaly on
/// every run of `moore_consecutive` alerts. m comes from the fitted config,
/// falling back to the model's max absolute error.
class MooreDetector : public Detector {
 public:
  MooreDetector(DetectorConfig config, CycleTimeModel model) : Detector(std::move(config), std::move(model)) {}

  DetectorKind kind() const override { return DetectorKind::moore17; }

  Micros error_bound(const CycleRecord& rec) const {
    auto it = config_.moore_m.find(rec.id);
    return it != config_.moore_m.end() ? it->second : rec.max_abs_error;
  }

  std::size_t pending_alerts(CanId id) const {
    auto it = state_.find(id);
    return it == state_.end() ? 0 : it->second.alerts.size();
  }

 protected:
  void on_frame(const CanFrame& f, std::uint32_t index, const CycleRecord* rec, std::vector<Verdict>& out) override {
    auto [it, fresh] = state_.try_emplace(f.id);
    State& s = it->second;
    if (fresh) {
      s.last = f.timestamp;
      return;
    }
    Micros dt = f.timestamp - s.last;
    s.last = f.timestamp;
    double limit = config_.moore_margin_factor * static_cast<double>(rec->ct) + static_cast<double>(error_bound(*rec));
    if (std::abs(static_cast<double>(dt - rec->ct)) <= limit) {
      s.alerts.clear();
      return;
    }
    if (s.alerts.empty()) s.first_alert = f.timestamp;
    s.alerts.push_back(index);
    if (static_cast<int>(s.alerts.size()) < config_.moore_consecutive) return;
    Verdict v;
    v.id = f.id;
    v.t_start = s.first_alert;
    v.t_end = f.timestamp;
    v.anomalous = true;
    v.group_tag = next_group();
    v.score = to_ms(dt);
    v.frames = std::move(s.alerts);
    s.alerts.clear();
    out.push_back(std::move(v));
  }

  void on_reset() override { state_.clear(); }

 private:
  struct State {
    Micros last = 0;
    Micros first_alert = 0;
    std::vector<std::uint32_t> alerts;
  };
  std::unordered_map<CanId, State> state_;
};

}  // namespace cantids
