#pragma once

#include <cmath>
#include <map>

#include "cantids/detector.hpp"

namespace cantids {

/// Clock-skew tracking. Every N arrivals of an ID give an average offset
/// against the nominal schedule (ms). The accumulated offset is regressed on
/// elapsed time by recursive least squares and the identification error is
/// fed, normalised, to a two-sided CUSUM. An alarm resets the CUSUM sums.
///
/// Error statistics are only updated with batches whose normalised error is
/// below 3, so an attack does not inflate its own baseline.
class ChoDetector : public Detector {
 public:
  struct IdState {
    ChoLearned learned;
    double o_acc = 0;
    Micros first = 0;
    double l_plus = 0, l_minus = 0;
    std::vector<Micros> batch;
    std::vector<std::uint32_t> frames;
  };

  ChoDetector(DetectorConfig config, CycleTimeModel model) : Detector(std::move(config), std::move(model)) {}

  DetectorKind kind() const override { return DetectorKind::cho16; }

  const IdState* state(CanId id) const {
    auto it = state_.find(id);
    return it == state_.end() ? nullptr : &it->second;
  }

  /// Training mode: no CUSUM, every error updates the statistics. Used by fit
  /// to warm-start the learned state across clean traces.
  void set_learning(bool on) { learning_ = on; }

  std::map<CanId, ChoLearned> learned() const {
    std::map<CanId, ChoLearned> out;
    for (const auto& [id, s] : state_) out[id] = s.learned;
    return out;
  }

 protected:
  void on_frame(const CanFrame& f, std::uint32_t index, const CycleRecord* rec, std::vector<Verdict>& out) override {
    auto [it, fresh] = state_.try_emplace(f.id);
    IdState& s = it->second;
    if (fresh) {
      auto l = config_.cho_learned.find(f.id);
      s.learned = l != config_.cho_learned.end() ? l->second : ChoLearned{0.0, config_.cho_p_init, 0, 0.0, 0.0};
      s.first = f.timestamp;
    }
    s.batch.push_back(f.timestamp);
    s.frames.push_back(index);
    if (static_cast<int>(s.batch.size()) == config_.cho_window) close_batch(f.id, s, *rec, out);
  }

  void on_reset() override { state_.clear(); }

 private:
  void close_batch(CanId id, IdState& s, const CycleRecord& rec, std::vector<Verdict>& out) {
    const auto n = s.batch.size();
    double offset = 0;
    for (std::size_t i = 1; i < n; ++i)
      offset += static_cast<double>(s.batch[i] - s.batch[0] - static_cast<Micros>(i) * rec.ct);
    offset /= static_cast<double>(n - 1) * kMicrosPerMs;
    s.o_acc += std::abs(offset);
    const double t = to_seconds(s.batch.back() - s.first);
    ChoLearned& L = s.learned;
    const double lambda = config_.cho_forgetting;
    const double e = s.o_acc - L.skew * t;
    const double g = L.p * t / (lambda + t * t * L.p);
    L.p = (L.p - g * t * L.p) / lambda;
    L.skew += g * e;

    bool have_z = false;
    double z = 0;
    if (L.err_n >= 2 && L.err_m2 > 0) {
      have_z = true;
      z = (e - L.err_mean) / std::sqrt(L.err_m2 / static_cast<double>(L.err_n - 1));
    }
    if (learning_ || !have_z || std::abs(z) < 3.0) {
      ++L.err_n;
      double d = e - L.err_mean;
      L.err_mean += d / static_cast<double>(L.err_n);
      L.err_m2 += d * (e - L.err_mean);
    }

    if (!learning_ && have_z) {
      s.l_plus = std::max(0.0, s.l_plus + z - config_.cho_kappa);
      s.l_minus = std::max(0.0, s.l_minus - z - config_.cho_kappa);
      Verdict v;
      v.kind = VerdictKind::per_window;
      v.id = id;
      v.t_start = s.batch.front();
      v.t_end = s.batch.back();
      v.score = std::max(s.l_plus, s.l_minus);
      v.anomalous = v.score > config_.cho_cusum_limit;
      v.frames = s.frames;
      if (v.anomalous) s.l_plus = s.l_minus = 0;
      out.push_back(std::move(v));
    }
    s.batch.clear();
    s.frames.clear();
  }

  std::map<CanId, IdState> state_;
  bool learning_ = false;
};

}  // namespace cantids
