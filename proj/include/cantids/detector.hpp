#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cantids/cycle_model.hpp"
#include "cantids/detector_config.hpp"
#include "cantids/hex.hpp"
#include "cantids/types.hpp"
#include "cantids/verdict.hpp"

namespace cantids {

/// Streaming detector. Drive it with process() for every frame in order,
/// advance_time() after each frame (or on idle ticks) and finish() at the end
/// of the trace.
///
/// Frames of IDs missing from the model yield an unknown-id verdict; frames of
/// non-cyclic IDs are ignored. Both checks are skipped for model-free
/// detectors.
class Detector {
 public:
  Detector(DetectorConfig config, CycleTimeModel model) : config_(std::move(config)), model_(std::move(model)) {
    config_.validate();
  }
  virtual ~Detector() = default;

  virtual DetectorKind kind() const = 0;
  const DetectorConfig& config() const { return config_; }
  const CycleTimeModel& model() const { return model_; }

  void process(const CanFrame& frame, std::uint32_t index, std::vector<Verdict>& out) {
    check_time(frame.timestamp);
    last_time_ = frame.timestamp;
    if (!started_) {
      started_ = true;
      on_start(frame.timestamp);
    }
    const CycleRecord* rec = model_.find(frame.id);
    if (!model_free()) {
      if (!rec) {
        Verdict v;
        v.kind = VerdictKind::unknown_id;
        v.id = frame.id;
        v.t_start = v.t_end = frame.timestamp;
        v.anomalous = true;
        v.frames = {index};
        out.push_back(std::move(v));
        return;
      }
      if (!rec->cyclic) return;
    }
    on_frame(frame, index, rec, out);
  }

  void advance_time(Micros now, std::vector<Verdict>& out) {
    check_time(now);
    last_time_ = now;
    if (started_) on_advance(now, out);
  }

  void finish(std::vector<Verdict>& out) {
    if (started_) on_finish(out);
  }

  /// Back to the post-fit state, ready for a new trace.
  void reset() {
    started_ = false;
    last_time_ = std::numeric_limits<Micros>::min();
    group_counter_ = 0;
    on_reset();
  }

 protected:
  virtual void on_start(Micros /*t0*/) {}
  virtual void on_frame(const CanFrame& frame, std::uint32_t index, const CycleRecord* rec,
                        std::vector<Verdict>& out) = 0;
  virtual void on_advance(Micros /*now*/, std::vector<Verdict>& /*out*/) {}
  virtual void on_finish(std::vector<Verdict>& /*out*/) {}
  virtual void on_reset() = 0;
  virtual bool model_free() const { return false; }

  std::uint64_t next_group() { return ++group_counter_; }

  DetectorConfig config_;
  CycleTimeModel model_;

 private:
  void check_time(Micros t) const {
    if (t < last_time_)
      throw OrderingError("time went backwards: " + format_seconds(t) + " after " + format_seconds(last_time_));
  }

  bool started_ = false;
  Micros last_time_ = std::numeric_limits<Micros>::min();
  std::uint64_t group_counter_ = 0;
};

/// Runs a detector over a whole trace, starting from its post-fit state.
inline std::vector<Verdict> run_detector(Detector& detector, const Trace& trace) {
  detector.reset();
  std::vector<Verdict> out;
  for (std::size_t i = 0; i < trace.frames.size(); ++i) {
    const auto& f = trace.frames[i];
    detector.process(f, static_cast<std::uint32_t>(i), out);
    detector.advance_time(f.timestamp, out);
  }
  detector.finish(out);
  return out;
}

}  // namespace cantids
