#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cantids/types.hpp"

namespace cantids {

/// mt19937_64 with a fixed double mapping, so generated traffic is the same
/// on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t next() { return gen_(); }
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint8_t byte() { return static_cast<std::uint8_t>(gen_() >> 56); }

 private:
  std::mt19937_64 gen_;
};

struct SynthId {
  CanId id;
  Micros ct;
  std::uint8_t dlc = 8;
};

/// The ten monitored identifiers of the Ventus capture with their cycle times.
inline std::vector<SynthId> ventus_ids() {
  auto ms = [](Micros v) { return v * kMicrosPerMs; };
  return {{0x10, ms(10)},   {0x120, ms(20)},  {0x290, ms(30)},  {0x2B5, ms(40)},  {0x2C5, ms(60)},
          {0x330, ms(80)},  {0x350, ms(100)}, {0x3D0, ms(200)}, {0x3E0, ms(300)}, {0x581, ms(1000)}};
}

enum class SynthTiming {
  // Timer driven: the n-th frame is released at phase + n * ct * (1 + skew)
  // plus a uniform release jitter, so every gap stays within ct * (1 +- jitter).
  anchored,
  // Every gap is drawn independently as ct * (1 + u); arrival times drift.
  random_walk,
};

struct SynthOptions {
  std::vector<SynthId> ids = ventus_ids();
  double duration_s = 600.0;
  double jitter = 0.04;  // bound on |dt / ct - 1|
  double max_skew = 0.0;  // per-ID clock skew drawn from [-max_skew, max_skew]
  SynthTiming timing = SynthTiming::anchored;
  std::uint64_t seed = 1;
  std::string source = "synthetic";
};

/// Periodic traffic with a random initial phase and clock skew per ID. Byte 0
/// of the payload is a rolling counter.
inline Trace synthesize(const SynthOptions& opts) {
  Rng rng(opts.seed);
  const auto end = static_cast<Micros>(std::llround(opts.duration_s * kMicrosPerSecond));
  Trace trace;
  trace.meta.source = opts.source;
  for (const auto& spec : opts.ids) {
    if (spec.ct <= 0) throw ValidationError("synthetic cycle time must be positive");
    if (spec.dlc > 8) throw ValidationError("synthetic dlc exceeds 8");
    Payload payload(spec.dlc, 0);
    for (auto& b : payload) b = rng.byte();
    const auto ct = static_cast<double>(spec.ct);
    const double phase = rng.uniform(0.0, ct);
    const double skew = rng.uniform(-opts.max_skew, opts.max_skew);
    const double release = std::max(0.0, opts.jitter - std::abs(skew)) / 2;
    double t = phase;
    std::uint8_t counter = 0;
    for (long long n = 1; std::llround(t) < end; ++n) {
      CanFrame f;
      f.timestamp = std::llround(t);
      f.id = spec.id;
      f.extended = spec.id > kMaxStandardId;
      f.dlc = spec.dlc;
      f.payload = payload;
      if (!f.payload.empty()) f.payload[0] = counter++;
      trace.frames.push_back(std::move(f));
      if (opts.timing == SynthTiming::anchored)
        t = std::max(t, phase + static_cast<double>(n) * ct * (1.0 + skew) + ct * rng.uniform(-release, release));
      else
        t += ct * (1.0 + rng.uniform(-opts.jitter, opts.jitter));
    }
  }
  std::stable_sort(trace.frames.begin(), trace.frames.end(), [](const CanFrame& a, const CanFrame& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.id < b.id;
  });
  return trace;
}

/// A set of independent traces, seeds derived from `opts.seed`.
inline std::vector<Trace> synthesize_set(SynthOptions opts, std::size_t count) {
  std::vector<Trace> out;
  const std::uint64_t base = opts.seed;
  const std::string name = opts.source;
  for (std::size_t i = 0; i < count; ++i) {
    opts.seed = base * 1000003ULL + i;
    opts.source = name + "-" + std::to_string(i + 1);
    out.push_back(synthesize(opts));
  }
  return out;
}

}  // namespace cantids
