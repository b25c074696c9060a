#pragma once

// Offline reference implementations of the detectors. Every rule is evaluated
// from the complete per-ID history instead of incremental state, so they are
// slow (quadratic in places) but share no code with the streaming versions.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cantids/cantids.hpp"

namespace reference {

using namespace cantids;

struct Ctx {
  const Trace& trace;
  const CycleTimeModel& model;
  const DetectorConfig& config;
  bool model_free = false;

  // Indices of frames each detector sees, per ID, plus unknown-ID verdicts.
  std::map<CanId, std::vector<std::uint32_t>> by_id;
  std::vector<Verdict> out;

  Ctx(const Trace& t, const CycleTimeModel& m, const DetectorConfig& c, bool free) :
      trace(t), model(m), config(c), model_free(free) {
    for (std::uint32_t i = 0; i < t.size(); ++i) {
      const auto& f = t.frames[i];
      if (!free) {
        const auto* rec = m.find(f.id);
        if (!rec) {
          Verdict v;
          v.kind = VerdictKind::unknown_id;
          v.id = f.id;
          v.t_start = v.t_end = f.timestamp;
          v.anomalous = true;
          v.frames = {i};
          out.push_back(v);
          continue;
        }
        if (!rec->cyclic) continue;
      }
      by_id[f.id].push_back(i);
    }
  }

  Micros t(std::uint32_t i) const { return trace.frames[i].timestamp; }
  Micros ct(CanId id) const { return model.find(id)->ct; }
};

inline Verdict message(CanId id, Micros a, Micros b, bool anomalous, double score, std::vector<std::uint32_t> frames) {
  Verdict v;
  v.id = id;
  v.t_start = a;
  v.t_end = b;
  v.anomalous = anomalous;
  v.score = score;
  v.frames = std::move(frames);
  return v;
}

inline double ms(Micros us) { return static_cast<double>(us) / 1000.0; }

inline void gmiden(Ctx& c) {
  for (const auto& [id, idx] : c.by_id)
    for (std::size_t n = 1; n < idx.size(); ++n) {
      Micros dt = c.t(idx[n]) - c.t(idx[n - 1]);
      if (static_cast<double>(dt) < static_cast<double>(c.ct(id)) / 2.0)
        c.out.push_back(message(id, c.t(idx[n - 1]), c.t(idx[n]), true, ms(dt), {idx[n - 1], idx[n]}));
    }
}

inline void song_dos(Ctx& c) {
  const double limit = c.config.song_dos_dt_ms * 1000.0;
  for (const auto& [id, idx] : c.by_id)
    for (std::size_t n = 1; n < idx.size(); ++n) {
      // length of the run of short gaps ending here
      int run = 0;
      for (std::size_t m = n; m >= 1 && static_cast<double>(c.t(idx[m]) - c.t(idx[m - 1])) < std::round(limit); --m)
        ++run;
      if (run > c.config.song_dos_threshold)
        c.out.push_back(message(id, c.t(idx[n - 1]), c.t(idx[n]), true, run, {idx[n - 1], idx[n]}));
    }
}

inline void moore(Ctx& c) {
  const int need = c.config.moore_consecutive;
  for (const auto& [id, idx] : c.by_id) {
    const auto* rec = c.model.find(id);
    auto mit = c.config.moore_m.find(id);
    double m = static_cast<double>(mit != c.config.moore_m.end() ? mit->second : rec->max_abs_error);
    double bound = c.config.moore_margin_factor * static_cast<double>(rec->ct) + m;
    auto alert = [&](std::size_t n) {
      return std::abs(static_cast<double>(c.t(idx[n]) - c.t(idx[n - 1]) - rec->ct)) > bound;
    };
    for (std::size_t n = 1; n < idx.size(); ++n) {
      std::size_t run = 0;
      for (std::size_t k = n; k >= 1 && alert(k); --k) ++run;
      if (run == 0 || run % need != 0) continue;
      Verdict v = message(id, c.t(idx[n + 1 - need]), c.t(idx[n]), true, ms(c.t(idx[n]) - c.t(idx[n - 1])), {});
      for (std::size_t k = n + 1 - need; k <= n; ++k) v.frames.push_back(idx[k]);
      v.group_tag = 1;
      c.out.push_back(v);
    }
  }
}

inline void stabili(Ctx& c) {
  if (c.trace.empty()) return;
  const Micros t0 = c.trace.frames.front().timestamp;
  for (const auto& [id, rec] : c.model.records) {
    if (!rec.cyclic) continue;
    auto kit = c.config.stabili_k.find(id);
    const Micros k = kit == c.config.stabili_k.end() ? 1 : kit->second;
    auto it = c.by_id.find(id);
    std::vector<std::uint32_t> arrivals = it == c.by_id.end() ? std::vector<std::uint32_t>{} : it->second;
    // silence intervals: (last seen, time of the last advance before the next arrival)
    std::vector<std::pair<Micros, Micros>> spans;
    Micros last = t0;
    for (auto i : arrivals) {
      if (i > 0) spans.push_back({last, c.t(i - 1)});
      last = c.t(i);
    }
    spans.push_back({last, c.trace.frames.back().timestamp});
    for (auto [from, until] : spans)
      for (Micros d = from + k * rec.ct; d <= until; d += rec.ct) {
        Verdict v = message(id, from, d, true, ms(d - from), {});
        v.kind = VerdictKind::missing_id;
        c.out.push_back(v);
      }
  }
}

inline void otsuka(Ctx& c) {
  const double delta = c.config.otsuka_delta;
  for (const auto& [id, idx] : c.by_id) {
    const double ct = static_cast<double>(c.ct(id));
    Micros ref = c.t(idx[0]);
    std::size_t n = 1;
    while (n < idx.size()) {
      const double lo = static_cast<double>(ref) + ct * (1.0 - delta);
      const double hi = static_cast<double>(ref) + ct * (1.0 + delta);
      const double tn = static_cast<double>(c.t(idx[n]));
      if (tn < lo) {
        std::size_t end = n;
        while (end < idx.size() && static_cast<double>(c.t(idx[end])) <= hi) ++end;
        Verdict v = message(id, c.t(idx[n]), c.t(idx[end - 1]), true, static_cast<double>(end - n), {});
        v.group_tag = 1;
        Micros anchor = c.t(idx[end - 1]);
        bool found = false;
        for (std::size_t k = n; k < end; ++k) {
          v.frames.push_back(idx[k]);
          if (!found && static_cast<double>(c.t(idx[k])) >= lo) {
            anchor = c.t(idx[k]);
            found = true;
          }
        }
        c.out.push_back(v);
        ref = anchor;
        n = end;
        continue;
      }
      if (tn > hi) {
        Verdict v = message(id, ref, c.t(idx[n]), false, ms(c.t(idx[n]) - ref), {idx[n]});
        v.late = true;
        c.out.push_back(v);
      }
      ref = c.t(idx[n]);
      ++n;
    }
  }
}

inline double t_test(const std::vector<double>& x, double ct) {
  const double n = static_cast<double>(x.size());
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  double s = std::max(1.0, std::sqrt(ss / (n - 1)));
  return (mean - ct) / (s / std::sqrt(n));
}

inline void taylor(Ctx& c) {
  for (const auto& [id, idx] : c.by_id) {
    const auto* rec = c.model.find(id);
    if (!(ms(rec->ct) < c.config.taylor_applicability_ct_max_ms)) continue;
    struct Window {
      std::vector<std::uint32_t> frames;
      std::vector<double> dts;
    };
    std::map<Micros, Window> windows;
    for (std::size_t n = 0; n < idx.size(); ++n) {
      auto& w = windows[c.t(idx[n]) / kMicrosPerSecond];
      w.frames.push_back(idx[n]);
      if (n > 0) w.dts.push_back(static_cast<double>(c.t(idx[n]) - c.t(idx[n - 1])));
    }
    std::vector<const Window*> scored;
    for (const auto& [sec, w] : windows)
      if (w.dts.size() >= 2) scored.push_back(&w);
    const std::size_t q = static_cast<std::size_t>(c.config.taylor_seq_len);
    for (std::size_t b = 0; b < scored.size(); b += q) {
      std::size_t e = std::min(scored.size(), b + q);
      Verdict v;
      v.kind = VerdictKind::per_window;
      v.id = id;
      double sum = 0;
      for (std::size_t k = b; k < e; ++k) {
        sum += std::log1p(std::abs(t_test(scored[k]->dts, static_cast<double>(rec->ct))));
        v.frames.insert(v.frames.end(), scored[k]->frames.begin(), scored[k]->frames.end());
      }
      v.score = sum / static_cast<double>(e - b);
      v.anomalous = v.score >= c.config.taylor_threshold;
      v.t_start = c.t(v.frames.front());
      v.t_end = c.t(v.frames.back());
      c.out.push_back(v);
    }
  }
}

inline void cho(Ctx& c) {
  const std::size_t N = static_cast<std::size_t>(c.config.cho_window);
  const double lambda = c.config.cho_forgetting;
  for (const auto& [id, idx] : c.by_id) {
    const Micros ct = c.ct(id);
    double skew = 0, p = c.config.cho_p_init, acc = 0, lp = 0, lm = 0;
    std::vector<double> accepted;  // errors admitted to the baseline
    for (std::size_t b = 0; b + N <= idx.size(); b += N) {
      double offset = 0;
      for (std::size_t i = 1; i < N; ++i)
        offset += static_cast<double>(c.t(idx[b + i]) - c.t(idx[b]) - static_cast<Micros>(i) * ct);
      offset = offset / static_cast<double>(N - 1) / 1000.0;
      acc += std::abs(offset);
      const double t = static_cast<double>(c.t(idx[b + N - 1]) - c.t(idx[0])) / 1e6;
      const double e = acc - skew * t;
      const double g = p * t / (lambda + t * t * p);
      p = (p - g * t * p) / lambda;
      skew += g * e;

      bool have_z = false;
      double z = 0;
      if (accepted.size() >= 2) {
        double mean = 0;
        for (double a : accepted) mean += a;
        mean /= static_cast<double>(accepted.size());
        double ss = 0;
        for (double a : accepted) ss += (a - mean) * (a - mean);
        if (ss > 0) {
          have_z = true;
          z = (e - mean) / std::sqrt(ss / static_cast<double>(accepted.size() - 1));
        }
      }
      if (!have_z || std::abs(z) < 3.0) accepted.push_back(e);
      if (!have_z) continue;
      lp = std::max(0.0, lp + z - c.config.cho_kappa);
      lm = std::max(0.0, lm - z - c.config.cho_kappa);
      Verdict v;
      v.kind = VerdictKind::per_window;
      v.id = id;
      v.t_start = c.t(idx[b]);
      v.t_end = c.t(idx[b + N - 1]);
      v.score = std::max(lp, lm);
      v.anomalous = v.score > c.config.cho_cusum_limit;
      for (std::size_t i = 0; i < N; ++i) v.frames.push_back(idx[b + i]);
      if (v.anomalous) lp = lm = 0;
      c.out.push_back(v);
    }
  }
}

inline void olufowobi(Ctx& c) {
  const bool protect = c.config.olufowobi_update_protection;
  for (const auto& [id, idx] : c.by_id) {
    const auto* rec = c.model.find(id);
    auto pit = c.config.olufowobi.find(id);
    OlufowobiParams prm = pit != c.config.olufowobi.end()
                              ? pit->second
                              : OlufowobiParams{static_cast<double>(rec->min_dt),
                                                static_cast<double>(rec->max_dt - rec->min_dt), rec->wctt,
                                                static_cast<double>(rec->ct)};
    if (!(prm.period_est > 0)) continue;
    const double slack = prm.jitter + prm.tx_time;
    std::vector<char> bad(idx.size(), 0);
    long long k_min = 1;  // only moves when protection is off
    for (std::size_t n = 1; n < idx.size(); ++n) {
      // reference: the latest clean frame before n
      std::size_t r = n - 1;
      while (r > 0 && bad[r]) --r;
      const double base = static_cast<double>(c.t(idx[r]));
      const double t = static_cast<double>(c.t(idx[n]));
      long long k = k_min;
      while (base + static_cast<double>(k) * prm.period_est + slack < t) ++k;
      const double lower = base + static_cast<double>(k) * prm.period_est - slack;
      if (t >= lower) {
        k_min = 1;
        continue;
      }
      bad[n] = 1;
      c.out.push_back(message(id, c.t(idx[r]), c.t(idx[n]), true, (lower - t) / 1000.0, {idx[r], idx[n]}));
      if (!protect) k_min = k + 1;
    }
  }
}

inline std::vector<Verdict> run(DetectorKind kind, const Trace& trace, const CycleTimeModel& model,
                                const DetectorConfig& config) {
  Ctx c(trace, model, config, kind == DetectorKind::song16_dos);
  switch (kind) {
    case DetectorKind::otsuka14: otsuka(c); break;
    case DetectorKind::taylor15: taylor(c); break;
    case DetectorKind::cho16: cho(c); break;
    case DetectorKind::gmiden16:
    case DetectorKind::song16: gmiden(c); break;
    case DetectorKind::song16_dos: song_dos(c); break;
    case DetectorKind::moore17: moore(c); break;
    case DetectorKind::stabili19: stabili(c); break;
    case DetectorKind::olufowobi20: olufowobi(c); break;
  }
  return c.out;
}

// ---------------------------------------------------------------------------
// Comparison

inline std::vector<Verdict> normalised(std::vector<Verdict> vs) {
  for (auto& v : vs) v.group_tag = v.group_tag != 0;
  std::sort(vs.begin(), vs.end());
  return vs;
}

/// Empty when both verdict sets agree; otherwise a description of the first
/// difference.
inline std::string compare(const std::vector<Verdict>& streaming, const std::vector<Verdict>& offline,
                           double rel_tol = 1e-6) {
  auto a = normalised(streaming), b = normalised(offline);
  std::ostringstream msg;
  if (a.size() != b.size()) {
    msg << "verdict count " << a.size() << " vs " << b.size();
    return msg.str();
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    bool same = x.kind == y.kind && x.id == y.id && x.t_start == y.t_start && x.t_end == y.t_end &&
                x.anomalous == y.anomalous && x.late == y.late && x.group_tag == y.group_tag && x.frames == y.frames &&
                std::abs(x.score - y.score) <= rel_tol * std::max(1.0, std::abs(y.score));
    if (!same) {
      msg << "verdict " << i << ": " << to_json(x).dump() << " vs " << to_json(y).dump();
      return msg.str();
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Random workloads

struct Case {
  Trace trace;
  CycleTimeModel model;
  DetectorConfig config;
};

/// A random trace of at most `max_frames` frames over a handful of IDs with
/// injections, bursts, dropouts, one non-cyclic ID and occasionally an ID the
/// model has never seen, plus a model learned from a clean run of the same
/// IDs and a randomised configuration.
inline Case random_case(std::uint64_t seed, std::size_t max_frames = 1000) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto pick = [&](auto... v) {
    std::vector<std::common_type_t<decltype(v)...>> xs{v...};
    return xs[rng() % xs.size()];
  };

  const Micros cts[] = {5000, 10000, 20000, 40000, 100000, 500000};
  const std::size_t n_ids = 2 + rng() % 4;
  struct Src {
    CanId id;
    Micros ct;
    double jitter;
  };
  std::vector<Src> srcs;
  for (std::size_t i = 0; i < n_ids; ++i)
    srcs.push_back({static_cast<CanId>(0x100 + 0x10 * i), cts[rng() % 6], uni(0.0, 0.08)});
  const double seconds = uni(3.0, 12.0);
  const auto horizon = static_cast<Micros>(seconds * 1e6);

  auto periodic = [&](double scale_jitter) {
    std::vector<CanFrame> fs;
    for (const auto& s : srcs) {
      double t = uni(0, static_cast<double>(s.ct));
      for (long long n = 0; t < static_cast<double>(horizon); ++n) {
        CanFrame f;
        f.timestamp = static_cast<Micros>(t);
        f.id = s.id;
        f.dlc = static_cast<std::uint8_t>(rng() % 9);
        f.payload = Payload(f.dlc, 0x5a);
        fs.push_back(f);
        t += static_cast<double>(s.ct) * (1.0 + scale_jitter * s.jitter * uni(-1, 1));
      }
    }
    // non-cyclic chatter
    for (int i = 0, n = 3 + static_cast<int>(rng() % 6); i < n; ++i) {
      Micros b = static_cast<Micros>(uni(0, static_cast<double>(horizon)));
      for (int j = 0; j < 6; ++j) {
        CanFrame f;
        f.timestamp = b + j * 300;
        f.id = 0x7ff;
        f.dlc = 1;
        f.payload = Payload(1, 1);
        fs.push_back(f);
      }
    }
    return fs;
  };

  Case out;
  Trace clean;
  clean.frames = periodic(1.0);
  std::stable_sort(clean.frames.begin(), clean.frames.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
  out.model = estimate_cycle_times(clean);

  std::vector<CanFrame> fs = periodic(rng() % 3 == 0 ? 2.0 : 1.0);
  // dropouts
  for (int d = 0, n = static_cast<int>(rng() % 3); d < n; ++d) {
    CanId victim = srcs[rng() % srcs.size()].id;
    Micros a = static_cast<Micros>(uni(0, static_cast<double>(horizon)));
    Micros b = a + static_cast<Micros>(uni(5e4, 1.5e6));
    std::erase_if(fs, [&](const CanFrame& f) { return f.id == victim && f.timestamp >= a && f.timestamp < b; });
  }
  // injections and bursts
  for (int k = 0, n = static_cast<int>(rng() % 4); k < n; ++k) {
    const auto& s = srcs[rng() % srcs.size()];
    double f = pick(1.0, 10.0, 25.0, 50.0, 100.0);
    Micros a = static_cast<Micros>(uni(0, static_cast<double>(horizon) / 2));
    for (Micros t : injection_times(a, a + static_cast<Micros>(uni(5e5, 4e6)), f, uni(0, 1))) {
      CanFrame x;
      x.timestamp = t;
      x.id = s.id;
      x.dlc = 8;
      x.payload = Payload(8, 0xee);
      x.label = Label::injected;
      fs.push_back(x);
    }
  }
  if (rng() % 2) {
    CanId id = rng() % 2 ? srcs[0].id : 0x0;
    Micros a = static_cast<Micros>(uni(0, static_cast<double>(horizon)));
    for (int j = 0; j < 12; ++j) {
      CanFrame x;
      x.timestamp = a + j * static_cast<Micros>(pick(50, 100, 150, 250));
      x.id = id;
      x.dlc = 8;
      x.payload = Payload(8, 0);
      x.label = Label::injected;
      fs.push_back(x);
    }
  }
  if (rng() % 4 == 0) {
    CanFrame x;
    x.timestamp = static_cast<Micros>(uni(0, static_cast<double>(horizon)));
    x.id = 0x6aa;
    x.label = Label::attack_unknown;
    fs.push_back(x);
  }
  std::stable_sort(fs.begin(), fs.end(), [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
  if (fs.size() > max_frames) fs.resize(max_frames);
  out.trace.frames = std::move(fs);

  DetectorConfig& c = out.config;
  c.otsuka_delta = pick(0.0, 0.02, 0.04, 0.1, 0.25);
  c.taylor_seq_len = pick(2, 3);
  c.taylor_threshold = pick(0.5, 1.0, 2.0, 4.0);
  c.cho_window = pick(3, 5, 10);
  c.cho_p_init = pick(0.001, 0.05);
  c.cho_kappa = pick(0.1, 2.5);
  c.cho_cusum_limit = pick(1.0, 5.0, 50.0);
  c.song_dos_threshold = pick(1, 3);
  c.moore_consecutive = pick(2, 3);
  for (const auto& s : srcs) {
    if (rng() % 2) c.moore_m[s.id] = static_cast<Micros>(uni(0, 0.1) * static_cast<double>(s.ct));
    c.stabili_k[s.id] = static_cast<int>(1 + rng() % 3);
  }
  c.olufowobi_update_protection = rng() % 2;
  return out;
}

}  // namespace reference
