#pragma once

#include <unordered_map>

#include "cantids/detector.hpp"

namespace cantids {

/// Flags a frame arriving less than half a cycle after its predecessor.
/// Also serves as the song16 injection detector.
class GmidenDetector : public Detector {
 public:
  GmidenDetector(DetectorConfig config, CycleTimeModel model, DetectorKind kind = DetectorKind::gmiden16)
      : Detector(std::move(config), std::move(model)), kind_(kind) {}

  DetectorKind kind() const override { return kind_; }

 protected:
  void on_frame(const CanFrame& f, std::uint32_t index, const CycleRecord* rec, std::vector<Verdict>& out) override {
    auto [it, fresh] = last_.try_emplace(f.id, Last{f.timestamp, index});
    if (fresh) return;
    Last prev = it->second;
    it->second = {f.timestamp, index};
    Micros dt = f.timestamp - prev.t;
    if (2 * dt < rec->ct) {
      Verdict v;
      v.id = f.id;
      v.t_start = prev.t;
      v.t_end = f.timestamp;
      v.anomalous = true;
      v.score = to_ms(dt);
      v.frames = {prev.index, index};
      out.push_back(std::move(v));
    }
  }

  void on_reset() override { last_.clear(); }

 private:
  struct Last {
    Micros t;
    std::uint32_t index;
  };
  DetectorKind kind_;
  std::unordered_map<CanId, Last> last_;
};

}  // namespace cantids
