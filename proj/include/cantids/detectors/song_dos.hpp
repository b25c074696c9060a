#pragma once

#include <cmath>
#include <unordered_map>

#include "cantids/detector.hpp"

namespace cantids {

/// Counts consecutive very short inter-arrival times per ID. Needs no model,
/// so a flood of a never-seen ID is judged on timing alone.
class SongDosDetector : public Detector {
 public:
  SongDosDetector(DetectorConfig config, CycleTimeModel model) : Detector(std::move(config), std::move(model)) {
    limit_ = static_cast<Micros>(std::llround(config_.song_dos_dt_ms * kMicrosPerMs));
  }

  DetectorKind kind() const override { return DetectorKind::song16_dos; }

  int counter(CanId id) const {
    auto it = state_.find(id);
    return it == state_.end() ? 0 : it->second.counter;
  }

 protected:
  void on_frame(const CanFrame& f, std::uint32_t index, const CycleRecord*, std::vector<Verdict>& out) override {
    auto [it, fresh] = state_.try_emplace(f.id, State{f.timestamp, index, 0});
    if (fresh) return;
    State& s = it->second;
    Micros dt = f.timestamp - s.t;
    s.counter = dt < limit_ ? s.counter + 1 : 0;
    if (s.counter > config_.song_dos_threshold) {
      Verdict v;
      v.id = f.id;
      v.t_start = s.t;
      v.t_end = f.timestamp;
      v.anomalous = true;
      v.score = s.counter;
      v.frames = {s.index, index};
      out.push_back(std::move(v));
    }
    s.t = f.timestamp;
    s.index = index;
  }

  void on_reset() override { state_.clear(); }
  bool model_free() const override { return true; }

 private:
  struct State {
    Micros t;
    std::uint32_t index;
    int counter;
  };
  Micros limit_ = 0;
  std::unordered_map<CanId, State> state_;
};

}  // namespace cantids
