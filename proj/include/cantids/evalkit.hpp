#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "cantids/detector_config.hpp"
#include "cantids/hex.hpp"
#include "cantids/trace_io.hpp"
#include "cantids/types.hpp"
#include "cantids/verdict.hpp"

namespace cantids {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

enum class ScoringPolicy : std::uint8_t { per_message, otsuka_group, moore_group, missing_id };

inline std::string_view to_string(ScoringPolicy p) {
  switch (p) {
    case ScoringPolicy::per_message: return "per-message";
    case ScoringPolicy::otsuka_group: return "otsuka-group";
    case ScoringPolicy::moore_group: return "moore-group";
    case ScoringPolicy::missing_id: return "missing-id";
  }
  return "per-message";
}

inline ScoringPolicy policy_for(DetectorKind detector, AttackKind attack) {
  if (attack == AttackKind::remove_inhibition) return ScoringPolicy::missing_id;
  if (detector == DetectorKind::otsuka14) return ScoringPolicy::otsuka_group;
  if (detector == DetectorKind::moore17) return ScoringPolicy::moore_group;
  return ScoringPolicy::per_message;
}

inline bool is_attack(Label l) { return l == Label::injected || l == Label::attack_unknown; }

namespace detail {

inline void check_frames(const std::vector<Verdict>& verdicts, const Trace& truth) {
  for (const auto& v : verdicts)
    for (auto i : v.frames)
      if (i >= truth.frames.size())
        throw ValidationError("verdict references frame " + std::to_string(i) + " beyond trace of " +
                              std::to_string(truth.frames.size()));
}

inline bool touches_attack(const Verdict& v, const Trace& truth) {
  return std::any_of(v.frames.begin(), v.frames.end(), [&](auto i) { return is_attack(truth.frames[i].label); });
}

// Frame-level marking shared by the per-message and grouped policies.
// flagged: judged anomalous as a subject; excused: legit subject whose
// verdict also covers an attack frame.
struct Marks {
  std::vector<char> flagged, excused;
};

inline void mark_subjects(const Verdict& v, const Trace& truth, Marks& m) {
  if (v.frames.empty()) return;
  bool attack_ctx = touches_attack(v, truth);
  auto mark = [&](std::uint32_t i) {
    if (!is_attack(truth.frames[i].label) && attack_ctx)
      m.excused[i] = 1;
    else
      m.flagged[i] = 1;
  };
  if (v.kind == VerdictKind::per_window) {
    for (auto i : v.frames) m.flagged[i] = 1;
  } else {
    mark(v.subject());
  }
}

inline ConfusionCounts tally(const Marks& m, const Trace& truth, std::vector<char> covered_attack = {}) {
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.frames.size(); ++i) {
    bool attack = is_attack(truth.frames[i].label);
    bool hit = m.flagged[i] || (!covered_attack.empty() && covered_attack[i]);
    if (attack) {
      hit ? ++c.tp : ++c.fn;
    } else if (m.flagged[i]) {
      ++c.fp;
    } else if (!m.excused[i]) {
      ++c.tn;
    }
  }
  return c;
}

}  // namespace detail

/// Confusion counts for one detector run.
///
/// per-message: attack frames judged anomalous are tp, the rest fn. A legit
/// frame judged anomalous is fp unless the same verdict covers an attack
/// frame (its interval was distorted by the attack), in which case it counts
/// neither way. Per-window verdicts label every frame they cover.
///
/// otsuka-group / moore-group: a grouped verdict with attack frames gives one
/// tp per attack frame; an all-legit group gives exactly one fp.
///
/// missing-id: missing-id verdicts for the removed ID inside the removal span
/// are tp, any other alarm is fp, fn = removed_count - tp.
inline ConfusionCounts score_run(const std::vector<Verdict>& verdicts, const Trace& truth, ScoringPolicy policy) {
  detail::check_frames(verdicts, truth);
  const auto n = truth.frames.size();

  if (policy == ScoringPolicy::missing_id) {
    ConfusionCounts c;
    const auto& meta = truth.meta;
    for (const auto& v : verdicts) {
      if (!v.anomalous) continue;
      bool hit = v.kind == VerdictKind::missing_id && v.id == meta.attack.target_id &&
                 v.t_end >= meta.removal_start && v.t_end <= meta.removal_end && c.tp < meta.removed_count;
      hit ? ++c.tp : ++c.fp;
    }
    c.fn = meta.removed_count - c.tp;
    return c;
  }

  detail::Marks m{std::vector<char>(n, 0), std::vector<char>(n, 0)};
  ConfusionCounts extra;
  std::vector<char> covered;
  for (const auto& v : verdicts) {
    if (!v.anomalous) continue;
    if (v.kind == VerdictKind::missing_id) {
      ++extra.fp;
      continue;
    }
    bool grouped = policy != ScoringPolicy::per_message && v.group_tag != 0;
    if (!grouped) {
      detail::mark_subjects(v, truth, m);
      continue;
    }
    if (covered.empty()) covered.assign(n, 0);
    if (detail::touches_attack(v, truth)) {
      for (auto i : v.frames) {
        if (is_attack(truth.frames[i].label))
          covered[i] = 1;
        else
          m.excused[i] = 1;
      }
    } else {
      ++extra.fp;
      for (auto i : v.frames) m.excused[i] = 1;
    }
  }
  auto c = detail::tally(m, truth, std::move(covered));
  c += extra;
  return c;
}

inline std::optional<double> precision(const ConfusionCounts& c) {
  if (c.tp + c.fp == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

inline std::optional<double> recall(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

/// Harmonic mean of precision and recall; nullopt when tp + fp + fn == 0.
inline std::optional<double> fmeasure(const ConfusionCounts& c) {
  if (c.tp + c.fp + c.fn == 0) return std::nullopt;
  double p = precision(c).value_or(0.0);
  double r = recall(c).value_or(0.0);
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

struct DetectionRate {
  double percent = 0;
  bool capped = false;  // more alarms than removed frames
};

/// 100 * alarms / removed frames.
inline DetectionRate detection_rate(const std::vector<Verdict>& verdicts, const Trace& truth) {
  if (truth.meta.removed_count == 0) throw ValidationError("detection rate needs removed frames");
  std::size_t alarms = 0;
  for (const auto& v : verdicts) alarms += v.anomalous ? 1 : 0;
  double pct = 100.0 * static_cast<double>(alarms) / static_cast<double>(truth.meta.removed_count);
  if (pct > 100.0) return {100.0, true};
  return {pct, false};
}

struct Percentiles {
  double p10 = 0, p25 = 0, p50 = 0, p75 = 0, p90 = 0;
  friend bool operator==(const Percentiles&, const Percentiles&) = default;
};

/// Nearest-rank percentiles.
inline Percentiles aggregate(std::vector<double> values) {
  if (values.empty()) throw ValidationError("cannot aggregate an empty list");
  std::sort(values.begin(), values.end());
  auto rank = [&](double p) {
    auto r = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(r, 1) - 1];
  };
  return {rank(10), rank(25), rank(50), rank(75), rank(90)};
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr std::string_view kReportHeader =
    "detector,attack,target_id,frequency,trace,tp,fp,fn,tn,precision,recall,fmeasure,detection_rate";

struct EvalRow {
  std::string detector;
  std::string attack;
  CanId target_id = 0;
  double frequency = 0;
  std::string trace;
  ConfusionCounts counts;
  std::optional<double> precision, recall, fmeasure, detection_rate;

  auto key() const { return std::tie(detector, attack, target_id, frequency, trace); }
  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

/// Percentiles of the F-measure over the traces of one scenario.
struct EvalAggregate {
  std::string detector;
  std::string attack;
  CanId target_id = 0;
  double frequency = 0;
  std::size_t traces = 0;
  Percentiles fmeasure;
  std::optional<Percentiles> detection_rate;

  friend bool operator==(const EvalAggregate&, const EvalAggregate&) = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalAggregate> aggregates;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline EvalRow make_row(std::string detector, const Trace& truth, const ConfusionCounts& c,
                        std::optional<double> rate = std::nullopt) {
  EvalRow r;
  r.detector = std::move(detector);
  r.attack = std::string(to_string(truth.meta.attack.kind));
  r.target_id = truth.meta.attack.target_id;
  r.frequency = truth.meta.attack.frequency;
  r.trace = truth.meta.source;
  r.counts = c;
  r.precision = precision(c);
  r.recall = recall(c);
  r.fmeasure = fmeasure(c);
  r.detection_rate = rate;
  return r;
}

/// Sorts rows and recomputes the per-scenario aggregates. Rows without an
/// F-measure are left out of the F-measure percentiles.
inline void finalize(EvalReport& report) {
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const EvalRow& a, const EvalRow& b) { return a.key() < b.key(); });
  report.aggregates.clear();
  std::map<std::tuple<std::string, std::string, CanId, double>, std::pair<std::vector<double>, std::vector<double>>>
      groups;
  std::map<std::tuple<std::string, std::string, CanId, double>, std::size_t> sizes;
  for (const auto& r : report.rows) {
    auto key = std::make_tuple(r.detector, r.attack, r.target_id, r.frequency);
    auto& g = groups[key];
    ++sizes[key];
    if (r.fmeasure) g.first.push_back(*r.fmeasure);
    if (r.detection_rate) g.second.push_back(*r.detection_rate);
  }
  for (const auto& [key, g] : groups) {
    EvalAggregate a;
    std::tie(a.detector, a.attack, a.target_id, a.frequency) = key;
    a.traces = sizes[key];
    if (!g.first.empty()) a.fmeasure = aggregate(g.first);
    if (!g.second.empty()) a.detection_rate = aggregate(g.second);
    report.aggregates.push_back(std::move(a));
  }
}

namespace detail {

inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_real(*v) : "NA"; }

inline std::string fmt_freq(double f) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", f);
  return buf;
}

inline std::optional<double> parse_opt(std::string_view s) {
  if (s == "NA" || s.empty()) return std::nullopt;
  try {
    return std::stod(std::string(s));
  } catch (const std::exception&) {
    throw ValidationError("bad number '" + std::string(s) + "'");
  }
}

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline std::optional<double> json_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

inline nlohmann::json percentiles_json(const Percentiles& p) {
  return {{"p10", p.p10}, {"p25", p.p25}, {"p50", p.p50}, {"p75", p.p75}, {"p90", p.p90}};
}

inline Percentiles percentiles_from_json(const nlohmann::json& j) {
  return {j.at("p10").get<double>(), j.at("p25").get<double>(), j.at("p50").get<double>(),
          j.at("p75").get<double>(), j.at("p90").get<double>()};
}

}  // namespace detail

/// CSV: one row per run, then five rows per scenario whose trace column is
/// "@p10" .. "@p90" and whose fmeasure / detection_rate columns hold that
/// percentile (counts left empty).
inline void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.detector << ',' << r.attack << ',' << format_id(r.target_id) << ',' << detail::fmt_freq(r.frequency)
        << ',' << r.trace << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ',' << r.counts.tn
        << ',' << detail::fmt_opt(r.precision) << ',' << detail::fmt_opt(r.recall) << ','
        << detail::fmt_opt(r.fmeasure) << ',' << detail::fmt_opt(r.detection_rate) << '\n';
  }
  for (const auto& a : report.aggregates) {
    const double Percentiles::*fields[] = {&Percentiles::p10, &Percentiles::p25, &Percentiles::p50,
                                           &Percentiles::p75, &Percentiles::p90};
    const char* names[] = {"@p10", "@p25", "@p50", "@p75", "@p90"};
    for (int i = 0; i < 5; ++i) {
      std::optional<double> dr;
      if (a.detection_rate) dr = (*a.detection_rate).*fields[i];
      out << a.detector << ',' << a.attack << ',' << format_id(a.target_id) << ',' << detail::fmt_freq(a.frequency)
          << ',' << names[i] << ",,,,,,," << detail::fmt_real(a.fmeasure.*fields[i]) << ',' << detail::fmt_opt(dr)
          << '\n';
    }
  }
}

/// Reads the per-run rows of a CSV report; aggregates are recomputed.
inline EvalReport read_report_csv(std::istream& in) {
  EvalReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = detail::trim(line);
    if (view.empty()) continue;
    if (line_no == 1) {
      if (view != kReportHeader) throw ParseError(line_no, "unexpected report header");
      continue;
    }
    auto f = detail::split(view, ',');
    if (f.size() != 13) throw ParseError(line_no, "expected 13 fields");
    if (!f[4].empty() && f[4][0] == '@') continue;
    try {
      EvalRow r;
      r.detector = f[0];
      r.attack = f[1];
      auto id = parse_id(f[2]);
      if (!id) throw ValidationError("bad target_id");
      r.target_id = *id;
      r.frequency = std::stod(std::string(f[3]));
      r.trace = f[4];
      r.counts = {std::stoull(std::string(f[5])), std::stoull(std::string(f[6])), std::stoull(std::string(f[7])),
                  std::stoull(std::string(f[8]))};
      r.precision = detail::parse_opt(f[9]);
      r.recall = detail::parse_opt(f[10]);
      r.fmeasure = detail::parse_opt(f[11]);
      r.detection_rate = detail::parse_opt(f[12]);
      report.rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  finalize(report);
  return report;
}

inline nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"detector", r.detector},
                    {"attack", r.attack},
                    {"target_id", format_id(r.target_id)},
                    {"frequency", r.frequency},
                    {"trace", r.trace},
                    {"tp", r.counts.tp},
                    {"fp", r.counts.fp},
                    {"fn", r.counts.fn},
                    {"tn", r.counts.tn},
                    {"precision", detail::opt_json(r.precision)},
                    {"recall", detail::opt_json(r.recall)},
                    {"fmeasure", detail::opt_json(r.fmeasure)},
                    {"detection_rate", detail::opt_json(r.detection_rate)}});
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    nlohmann::json j = {{"detector", a.detector},
                        {"attack", a.attack},
                        {"target_id", format_id(a.target_id)},
                        {"frequency", a.frequency},
                        {"traces", a.traces},
                        {"fmeasure", detail::percentiles_json(a.fmeasure)}};
    j["detection_rate"] = a.detection_rate ? detail::percentiles_json(*a.detection_rate) : nlohmann::json();
    aggs.push_back(std::move(j));
  }
  return {{"rows", rows}, {"aggregates", aggs}};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport report;
  try {
    for (const auto& r : j.at("rows")) {
      EvalRow row;
      row.detector = r.at("detector").get<std::string>();
      row.attack = r.at("attack").get<std::string>();
      row.target_id = detail::json_id(r.at("target_id"));
      row.frequency = r.at("frequency").get<double>();
      row.trace = r.at("trace").get<std::string>();
      row.counts = {r.at("tp").get<std::size_t>(), r.at("fp").get<std::size_t>(), r.at("fn").get<std::size_t>(),
                    r.at("tn").get<std::size_t>()};
      row.precision = detail::json_opt(r, "precision");
      row.recall = detail::json_opt(r, "recall");
      row.fmeasure = detail::json_opt(r, "fmeasure");
      row.detection_rate = detail::json_opt(r, "detection_rate");
      report.rows.push_back(std::move(row));
    }
    for (const auto& a : j.value("aggregates", nlohmann::json::array())) {
      EvalAggregate agg;
      agg.detector = a.at("detector").get<std::string>();
      agg.attack = a.at("attack").get<std::string>();
      agg.target_id = detail::json_id(a.at("target_id"));
      agg.frequency = a.at("frequency").get<double>();
      agg.traces = a.at("traces").get<std::size_t>();
      agg.fmeasure = detail::percentiles_from_json(a.at("fmeasure"));
      if (a.contains("detection_rate") && !a["detection_rate"].is_null())
        agg.detection_rate = detail::percentiles_from_json(a["detection_rate"]);
      report.aggregates.push_back(std::move(agg));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
  return report;
}

}  // namespace cantids
