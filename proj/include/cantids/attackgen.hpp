#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "cantids/cycle_model.hpp"
#include "cantids/hex.hpp"
#include "cantids/types.hpp"

namespace cantids {

inline constexpr Micros kImpersonationStart = 250 * kMicrosPerSecond;
inline constexpr Micros kOpenEnd = std::numeric_limits<Micros>::max();

namespace detail {

inline std::string available_ids(const Trace& base) {
  std::set<CanId> ids;
  for (const auto& f : base.frames) ids.insert(f.id);
  std::string out;
  for (CanId id : ids) out += (out.empty() ? "" : " ") + format_id(id);
  return out;
}

inline void require_target(const Trace& base, CanId id) {
  for (const auto& f : base.frames)
    if (f.id == id) return;
  throw ValidationError("target " + format_id(id) + " not in trace; available: " + available_ids(base));
}

// Stable merge; on equal timestamps the base frame comes first.
inline std::vector<CanFrame> merge(std::vector<CanFrame> base, std::vector<CanFrame> extra) {
  std::vector<CanFrame> out;
  out.reserve(base.size() + extra.size());
  std::merge(std::make_move_iterator(base.begin()), std::make_move_iterator(base.end()),
             std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()), std::back_inserter(out),
             [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
  return out;
}

}  // namespace detail

/// Instants of an evenly spread injection schedule over [start, end): in each
/// second counted from `start`, floor(f) frames at offsets (phase + j) / f.
/// A trailing partial second of length x gets floor(f * x) frames.
inline std::vector<Micros> injection_times(Micros start, Micros end, double frequency, double phase) {
  if (!(frequency > 0)) throw ValidationError("injection frequency must be positive");
  std::vector<Micros> out;
  for (Micros sec = start; sec < end; sec += kMicrosPerSecond) {
    double fraction = std::min(1.0, static_cast<double>(end - sec) / kMicrosPerSecond);
    auto count = static_cast<long long>(std::floor(frequency * fraction + 1e-9));
    for (long long j = 0; j < count; ++j) {
      auto t = sec + static_cast<Micros>(std::llround((phase + static_cast<double>(j)) / frequency * kMicrosPerSecond));
      if (t < end) out.push_back(t);
    }
  }
  return out;
}

namespace detail {
inline std::pair<Micros, Micros> active_span(const Trace& base, const AttackSpec& spec) {
  Micros start = spec.start_time.value_or(base.start_time());
  Micros end = spec.end_time.value_or(base.end_time());
  if (spec.start_time && spec.end_time && *spec.start_time > *spec.end_time)
    throw ValidationError("attack start is after its end");
  return {start, end};
}
}  // namespace detail

/// Number of frames inject_replay / dos_flood will add to `base`.
inline std::size_t predicted_injections(const Trace& base, const AttackSpec& spec) {
  if (base.empty()) return 0;
  auto [start, end] = detail::active_span(base, spec);
  return injection_times(start, end, spec.frequency, spec.phase).size();
}

/// Replays the target at `frequency` messages per second. Each injected frame
/// copies the latest payload of the target seen before it (the first one if
/// none was seen yet).
inline Trace inject_replay(const Trace& base, const AttackSpec& spec) {
  if (spec.kind != AttackKind::inject_replay) throw ValidationError("inject_replay needs an inject-replay spec");
  detail::require_target(base, spec.target_id);
  auto [start, end] = detail::active_span(base, spec);
  auto times = injection_times(start, end, spec.frequency, spec.phase);

  std::vector<CanFrame> extra;
  extra.reserve(times.size());
  const CanFrame* latest = nullptr;
  std::size_t cursor = 0;
  for (Micros t : times) {
    for (; cursor < base.frames.size() && base.frames[cursor].timestamp <= t; ++cursor)
      if (base.frames[cursor].id == spec.target_id) latest = &base.frames[cursor];
    if (!latest)
      latest = &*std::find_if(base.frames.begin(), base.frames.end(),
                              [&](const CanFrame& f) { return f.id == spec.target_id; });
    CanFrame f = *latest;
    f.timestamp = t;
    f.label = Label::injected;
    extra.push_back(std::move(f));
  }
  Trace out;
  out.meta = base.meta;
  out.meta.attack = spec;
  out.meta.injected_count = extra.size();
  out.frames = detail::merge(base.frames, std::move(extra));
  return out;
}

/// Drops every frame of the target in [start, end). An unset end removes
/// through the end of the trace.
inline Trace remove_id(const Trace& base, const AttackSpec& spec) {
  if (spec.kind != AttackKind::remove_inhibition) throw ValidationError("remove_id needs a remove-inhibition spec");
  detail::require_target(base, spec.target_id);
  Micros start = spec.start_time.value_or(base.start_time());
  Micros end = spec.end_time.value_or(kOpenEnd);
  Trace out;
  out.meta = base.meta;
  out.meta.attack = spec;
  out.meta.removal_start = start;
  out.meta.removal_end = std::min(end, base.end_time());
  for (const auto& f : base.frames) {
    if (f.id == spec.target_id && f.timestamp >= start && f.timestamp < end)
      ++out.meta.removed_count;
    else
      out.frames.push_back(f);
  }
  return out;
}

/// Replaces the target's traffic from `start` on with frames at exactly ct
/// spacing, anchored at the first original arrival at or after `start`.
/// Originals inside [start, start + overlap) are kept as well.
inline Trace impersonate(const Trace& base, const AttackSpec& spec, const CycleTimeModel& model) {
  if (spec.kind != AttackKind::impersonation) throw ValidationError("impersonate needs an impersonation spec");
  const auto* rec = model.find(spec.target_id);
  if (!rec || !rec->cyclic) throw ValidationError("impersonation target " + format_id(spec.target_id) + " is not cyclic");
  detail::require_target(base, spec.target_id);
  Micros start = spec.start_time.value_or(base.start_time() + kImpersonationStart);
  Micros end = std::min(spec.end_time.value_or(kOpenEnd), base.end_time() + 1);

  Trace out;
  out.meta = base.meta;
  out.meta.attack = spec;
  auto anchor = std::find_if(base.frames.begin(), base.frames.end(),
                             [&](const CanFrame& f) { return f.id == spec.target_id && f.timestamp >= start; });
  if (anchor == base.frames.end() || anchor->timestamp >= end) {
    out.frames = base.frames;
    return out;
  }
  const CanFrame* latest = &*anchor;
  std::vector<CanFrame> kept;
  kept.reserve(base.frames.size());
  out.meta.removal_start = start;
  out.meta.removal_end = end;
  for (const auto& f : base.frames) {
    bool target = f.id == spec.target_id;
    if (target && f.timestamp < start) latest = &f;
    if (target && f.timestamp >= start + spec.overlap && f.timestamp < end)
      ++out.meta.removed_count;
    else
      kept.push_back(f);
  }
  std::vector<CanFrame> extra;
  for (Micros t = anchor->timestamp; t < end; t += rec->ct) {
    CanFrame f = *latest;
    f.timestamp = t;
    f.label = Label::injected;
    extra.push_back(std::move(f));
  }
  out.meta.injected_count = extra.size();
  out.frames = detail::merge(std::move(kept), std::move(extra));
  return out;
}

/// Floods `target_id` (typically 0x0) with zero payload frames at
/// `frequency` per second over the active span.
inline Trace dos_flood(const Trace& base, const AttackSpec& spec) {
  if (spec.kind != AttackKind::dos_flood) throw ValidationError("dos_flood needs a dos-flood spec");
  if (spec.target_id >= kIdLimit) throw ValidationError("flood identifier exceeds 29 bits");
  Trace out;
  out.meta = base.meta;
  out.meta.attack = spec;
  if (base.empty()) return out;
  auto [start, end] = detail::active_span(base, spec);
  std::vector<CanFrame> extra;
  for (Micros t : injection_times(start, end, spec.frequency, spec.phase)) {
    CanFrame f;
    f.timestamp = t;
    f.id = spec.target_id;
    f.extended = spec.target_id > kMaxStandardId;
    f.dlc = 8;
    f.payload.assign(8, 0);
    f.label = Label::injected;
    extra.push_back(std::move(f));
  }
  out.meta.injected_count = extra.size();
  out.frames = detail::merge(base.frames, std::move(extra));
  return out;
}

inline Trace apply_attack(const Trace& base, const AttackSpec& spec, const CycleTimeModel& model) {
  switch (spec.kind) {
    case AttackKind::none: return base;
    case AttackKind::inject_replay: return inject_replay(base, spec);
    case AttackKind::remove_inhibition: return remove_id(base, spec);
    case AttackKind::impersonation: return impersonate(base, spec, model);
    case AttackKind::dos_flood: return dos_flood(base, spec);
  }
  return base;
}

}  // namespace cantids
