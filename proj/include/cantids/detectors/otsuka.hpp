#pragma once

#include <algorithm>
#include <unordered_map>

#include "cantids/detector.hpp"

namespace cantids {

/// Delayed-decision cycle check. A frame that arrives before ct*(1-delta) is
/// held together with everything else received before the window closes at
/// ct*(1+delta); the whole group is then reported once. Late frames are
/// reported as non-anomalous `late` verdicts.
class OtsukaDetector : public Detector {
 public:
  OtsukaDetector(DetectorConfig config, CycleTimeModel model) : Detector(std::move(config), std::move(model)) {}

  DetectorKind kind() const override { return DetectorKind::otsuka14; }

  std::size_t held(CanId id) const {
    auto it = state_.find(id);
    return it == state_.end() ? 0 : it->second.group.size();
  }

 protected:
  void on_frame(const CanFrame& f, std::uint32_t index, const CycleRecord* rec, std::vector<Verdict>& out) override {
    auto [it, fresh] = state_.try_emplace(f.id);
    State& s = it->second;
    if (fresh) {
      s.ct = static_cast<double>(rec->ct);
      s.ref = f.timestamp;
      return;
    }
    if (!s.group.empty() && f.timestamp > upper(s)) flush(f.id, s, out);

    const auto t = static_cast<double>(f.timestamp);
    if (t < lower(s) || !s.group.empty()) {
      if (s.group.empty()) pending_.push_back(f.id);
      s.group.push_back({f.timestamp, index, t >= lower(s)});
      return;
    }
    if (t > upper(s)) {
      Verdict v;
      v.id = f.id;
      v.t_start = s.ref;
      v.t_end = f.timestamp;
      v.late = true;
      v.score = to_ms(f.timestamp - s.ref);
      v.frames = {index};
      out.push_back(std::move(v));
    }
    s.ref = f.timestamp;
  }

  void on_advance(Micros now, std::vector<Verdict>& out) override {
    if (pending_.empty()) return;
    auto due = [&](CanId id) {
      State& s = state_.at(id);
      return static_cast<double>(now) > upper(s);
    };
    std::vector<CanId> keep;
    for (CanId id : pending_) {
      if (due(id))
        emit(id, state_.at(id), out);
      else
        keep.push_back(id);
    }
    pending_ = std::move(keep);
  }

  void on_finish(std::vector<Verdict>& out) override {
    for (CanId id : pending_) emit(id, state_.at(id), out);
    pending_.clear();
  }

  void on_reset() override {
    state_.clear();
    pending_.clear();
  }

 private:
  struct Held {
    Micros t;
    std::uint32_t index;
    bool in_window;
  };
  struct State {
    double ct = 0;
    Micros ref = 0;
    std::vector<Held> group;
  };

  double lower(const State& s) const { return static_cast<double>(s.ref) + s.ct * (1.0 - config_.otsuka_delta); }
  double upper(const State& s) const { return static_cast<double>(s.ref) + s.ct * (1.0 + config_.otsuka_delta); }

  void flush(CanId id, State& s, std::vector<Verdict>& out) {
    emit(id, s, out);
    pending_.erase(std::find(pending_.begin(), pending_.end(), id));
  }

  void emit(CanId id, State& s, std::vector<Verdict>& out) {
    Verdict v;
    v.id = id;
    v.t_start = s.group.front().t;
    v.t_end = s.group.back().t;
    v.anomalous = true;
    v.group_tag = next_group();
    v.score = static_cast<double>(s.group.size());
    for (const auto& h : s.group) v.frames.push_back(h.index);
    auto anchor = std::find_if(s.group.begin(), s.group.end(), [](const Held& h) { return h.in_window; });
    s.ref = anchor != s.group.end() ? anchor->t : s.group.back().t;
    s.group.clear();
    out.push_back(std::move(v));
  }

  std::unordered_map<CanId, State> state_;
  std::vector<CanId> pending_;
};

}  // namespace cantids
