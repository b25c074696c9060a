#pragma once

#include <unordered_map>

#include "cantids/detector.hpp"

namespace cantids {

/// Raises a missing-id alarm whenever a cyclic ID stays silent for k cycles.
/// Every cyclic ID in the model is armed at the first frame of the trace;
/// after an alarm the deadline moves forward by one cycle.
class StabiliDetector : public Detector {
 public:
  StabiliDetector(DetectorConfig config, CycleTimeModel model) : Detector(std::move(config), std::move(model)) {
    for (const auto& [id, rec] : model_.records) {
      if (!rec.cyclic) continue;
      auto k = config_.stabili_k.find(id);
      slot_of_[id] = slots_.size();
      slots_.push_back({id, rec.ct, k == config_.stabili_k.end() ? 1 : k->second, 0, 0});
    }
  }

  DetectorKind kind() const override { return DetectorKind::stabili19; }

  int k_for(CanId id) const {
    auto it = slot_of_.find(id);
    return it == slot_of_.end() ? 0 : slots_[it->second].k;
  }

 protected:
  void on_start(Micros t0) override {
    for (auto& s : slots_) {
      s.last = t0;
      s.deadline = t0 + s.k * s.ct;
    }
  }

  void on_frame(const CanFrame& f, std::uint32_t, const CycleRecord*, std::vector<Verdict>&) override {
    Slot& s = slots_[slot_of_.at(f.id)];
    s.last = f.timestamp;
    s.deadline = f.timestamp + s.k * s.ct;
  }

  void on_advance(Micros now, std::vector<Verdict>& out) override {
    for (auto& s : slots_) {
      while (s.deadline <= now) {
        Verdict v;
        v.kind = VerdictKind::missing_id;
        v.id = s.id;
        v.t_start = s.last;
        v.t_end = s.deadline;
        v.anomalous = true;
        v.score = to_ms(s.deadline - s.last);
        out.push_back(std::move(v));
        s.deadline += s.ct;
      }
    }
  }

  void on_reset() override {}

 private:
  struct Slot {
    CanId id;
    Micros ct;
    int k;
    Micros last;
    Micros deadline;
  };
  std::vector<Slot> slots_;
  std::unordered_map<CanId, std::size_t> slot_of_;
};

}  // namespace cantids
