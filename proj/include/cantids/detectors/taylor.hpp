#pragma once

#include <cmath>
#include <map>
#include <unordered_map>

#include "cantids/detector.hpp"

namespace cantids {

/// Per-second one-sample t-test of the mean inter-arrival time against ct.
/// Blocks of `taylor_seq_len` scored windows are combined into
/// A = (1/q) * sum ln(1 + |t_i|) and reported as one per-window verdict.
/// IDs with ct at or above the applicability limit are ignored.
class TaylorDetector : public Detector {
 public:
  TaylorDetector(DetectorConfig config, CycleTimeModel model) : Detector(std::move(config), std::move(model)) {}

  DetectorKind kind() const override { return DetectorKind::taylor15; }

  bool applicable(const CycleRecord& rec) const {
    return rec.cyclic && to_ms(rec.ct) < config_.taylor_applicability_ct_max_ms;
  }

  std::vector<CanId> applicable_ids() const {
    std::vector<CanId> out;
    for (const auto& [id, rec] : model_.records)
      if (applicable(rec)) out.push_back(id);
    return out;
  }

  /// One-sample t statistic of a window; s is the sample standard deviation,
  /// floored at 1 microsecond.
  static double t_statistic(double sum, double sum_sq, std::size_t n, double ct) {
    double mean = sum / static_cast<double>(n);
    double var = (sum_sq - sum * mean) / static_cast<double>(n - 1);
    double s = std::max(1.0, std::sqrt(std::max(0.0, var)));
    return (mean - ct) / (s / std::sqrt(static_cast<double>(n)));
  }

 protected:
  void on_frame(const CanFrame& f, std::uint32_t index, const CycleRecord* rec, std::vector<Verdict>& out) override {
    if (!applicable(*rec)) return;
    roll(f.timestamp / kMicrosPerSecond, out);
    auto [it, fresh] = state_.try_emplace(f.id);
    State& s = it->second;
    if (fresh) s.ct = static_cast<double>(rec->ct);
    if (s.frames.empty()) s.window_start = f.timestamp;
    s.frames.push_back(index);
    s.window_end = f.timestamp;
    if (s.seen) {
      auto dt = static_cast<double>(f.timestamp - s.last);
      s.sum += dt;
      s.sum_sq += dt * dt;
      ++s.n;
    }
    s.seen = true;
    s.last = f.timestamp;
  }

  void on_advance(Micros now, std::vector<Verdict>& out) override { roll(now / kMicrosPerSecond, out); }

  void on_finish(std::vector<Verdict>& out) override {
    for (auto& [id, s] : state_) {
      close_window(s);
      if (s.q > 0) emit_block(id, s, out);
    }
  }

  void on_reset() override {
    state_.clear();
    window_ = -1;
  }

 private:
  struct State {
    double ct = 0;
    bool seen = false;
    Micros last = 0;
    // current window
    double sum = 0, sum_sq = 0;
    std::size_t n = 0;
    std::vector<std::uint32_t> frames;
    Micros window_start = 0, window_end = 0;
    // current block of scored windows
    int q = 0;
    double score_sum = 0;
    std::vector<std::uint32_t> block_frames;
    Micros block_start = 0, block_end = 0;
  };

  void roll(Micros window, std::vector<Verdict>& out) {
    if (window == window_) return;
    window_ = window;
    for (auto& [id, s] : state_) {
      if (s.frames.empty()) continue;
      close_window(s);
      if (s.q == config_.taylor_seq_len) emit_block(id, s, out);
    }
  }

  void close_window(State& s) {
    if (s.frames.empty()) return;
    if (s.n >= 2) {
      double t = t_statistic(s.sum, s.sum_sq, s.n, s.ct);
      if (s.q == 0) s.block_start = s.window_start;
      s.block_end = s.window_end;
      s.score_sum += std::log1p(std::abs(t));
      ++s.q;
      s.block_frames.insert(s.block_frames.end(), s.frames.begin(), s.frames.end());
    }
    s.sum = s.sum_sq = 0;
    s.n = 0;
    s.frames.clear();
  }

  void emit_block(CanId id, State& s, std::vector<Verdict>& out) {
    Verdict v;
    v.kind = VerdictKind::per_window;
    v.id = id;
    v.t_start = s.block_start;
    v.t_end = s.block_end;
    v.score = s.score_sum / s.q;
    v.anomalous = v.score >= config_.taylor_threshold;
    v.frames = std::move(s.block_frames);
    s.block_frames.clear();
    s.q = 0;
    s.score_sum = 0;
    out.push_back(std::move(v));
  }

  std::map<CanId, State> state_;
  Micros window_ = -1;
};

}  // namespace cantids
