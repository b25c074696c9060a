#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "cantids/attackgen.hpp"
#include "cantids/cycle_model.hpp"
#include "cantids/detectors.hpp"
#include "cantids/evalkit.hpp"
#include "cantids/synth.hpp"
#include "cantids/trace_io.hpp"
#include "cantids/tuning.hpp"

namespace cantids {

/// One manifest entry: every target crossed with every frequency.
struct AttackTemplate {
  AttackKind kind = AttackKind::inject_replay;
  std::vector<CanId> targets;  // empty: every cyclic ID of the model
  std::vector<double> frequencies;
  std::optional<Micros> start_time;
  std::optional<Micros> end_time;
  double phase = 0.5;
  Micros overlap = 0;
};

struct SynthCampaign {
  std::size_t traces = 7;
  double duration_s = 600.0;
  double jitter = 0.04;
};

struct CampaignConfig {
  std::vector<std::filesystem::path> clean;
  std::optional<SynthCampaign> synthetic;
  std::vector<DetectorKind> detectors;
  DetectorConfig detector_config;
  FitOptions fit;
  std::vector<AttackTemplate> attacks;
  std::filesystem::path out;
  std::uint64_t seed = 1;
  unsigned workers = 0;  // 0: hardware concurrency
};

/// The Ventus campaign: replay injection of the ten monitored IDs at
/// 1/10/25/50/100 msg/s plus removal of each of them.
inline std::vector<AttackTemplate> ventus_manifest() {
  std::vector<CanId> ids;
  for (const auto& s : ventus_ids()) ids.push_back(s.id);
  AttackTemplate inject;
  inject.kind = AttackKind::inject_replay;
  inject.targets = ids;
  inject.frequencies = {1, 10, 25, 50, 100};
  AttackTemplate remove;
  remove.kind = AttackKind::remove_inhibition;
  remove.targets = ids;
  return {inject, remove};
}

inline std::vector<AttackSpec> expand(const AttackTemplate& tpl, const CycleTimeModel& model) {
  std::vector<CanId> targets = tpl.targets;
  if (targets.empty())
    for (const auto& [id, rec] : model.records)
      if (rec.cyclic) targets.push_back(id);
  std::vector<double> freqs = tpl.frequencies;
  bool uses_frequency = tpl.kind == AttackKind::inject_replay || tpl.kind == AttackKind::dos_flood;
  if (!uses_frequency)
    freqs = {0.0};
  else if (freqs.empty())
    throw ValidationError("attack '" + std::string(to_string(tpl.kind)) + "' needs frequencies");
  std::vector<AttackSpec> out;
  for (CanId id : targets)
    for (double f : freqs) {
      AttackSpec s;
      s.kind = tpl.kind;
      s.target_id = id;
      s.frequency = f;
      s.start_time = tpl.start_time;
      s.end_time = tpl.end_time;
      s.phase = tpl.phase;
      s.overlap = tpl.overlap;
      out.push_back(s);
    }
  return out;
}

inline std::string infected_name(const std::string& base, const AttackSpec& spec) {
  std::string name = base + "__" + std::string(to_string(spec.kind)) + "__" + format_id(spec.target_id);
  if (spec.frequency > 0) name += "__" + detail::fmt_freq(spec.frequency);
  return name;
}

/// Runs fn(i) for i in [0, n) on a pool of workers. Results must be written
/// to per-index slots so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct CampaignJob {
  std::size_t clean_index;
  AttackSpec spec;
};

/// Every template expanded against every clean trace, in manifest order.
inline std::vector<CampaignJob> campaign_jobs(std::size_t clean_count, const CycleTimeModel& model,
                                              const std::vector<AttackTemplate>& manifest) {
  std::vector<CampaignJob> jobs;
  for (const auto& tpl : manifest)
    for (const auto& spec : expand(tpl, model))
      for (std::size_t i = 0; i < clean_count; ++i) jobs.push_back({i, spec});
  return jobs;
}

inline Trace make_infected(const std::vector<Trace>& clean, const CycleTimeModel& model, const CampaignJob& job) {
  Trace t = apply_attack(clean[job.clean_index], job.spec, model);
  t.meta.source = infected_name(clean[job.clean_index].meta.source, job.spec);
  return t;
}

/// Builds each infected trace on a worker and hands it to fn(job index,
/// trace). Traces are not kept, so memory stays bounded by the pool size.
inline void for_each_infected(const std::vector<Trace>& clean, const CycleTimeModel& model,
                              const std::vector<AttackTemplate>& manifest, unsigned workers,
                              const std::function<void(std::size_t, const Trace&)>& fn) {
  auto jobs = campaign_jobs(clean.size(), model, manifest);
  parallel_for(jobs.size(), workers, [&](std::size_t j) { fn(j, make_infected(clean, model, jobs[j])); });
}

inline std::vector<Trace> generate_campaign(const std::vector<Trace>& clean, const CycleTimeModel& model,
                                            const std::vector<AttackTemplate>& manifest, unsigned workers = 0) {
  std::vector<Trace> out(campaign_jobs(clean.size(), model, manifest).size());
  for_each_infected(clean, model, manifest, workers, [&](std::size_t j, const Trace& t) { out[j] = t; });
  return out;
}

struct FittedDetector {
  DetectorKind kind;
  DetectorConfig config;
};

inline std::vector<FittedDetector> fit_all(const std::vector<DetectorKind>& kinds, const std::vector<Trace>& clean,
                                           const CycleTimeModel& model, const DetectorConfig& base,
                                           const FitOptions& opts, unsigned workers = 0) {
  std::vector<FittedDetector> out(kinds.size());
  parallel_for(kinds.size(), workers,
               [&](std::size_t i) { out[i] = {kinds[i], fit(kinds[i], clean, model, base, opts)}; });
  return out;
}

inline EvalRow evaluate_run(const FittedDetector& fd, const CycleTimeModel& model, const Trace& truth) {
  auto det = make_detector(fd.kind, fd.config, model);
  auto verdicts = run_detector(*det, truth);
  auto counts = score_run(verdicts, truth, policy_for(fd.kind, truth.meta.attack.kind));
  std::optional<double> rate;
  if (truth.meta.attack.kind == AttackKind::remove_inhibition && truth.meta.removed_count > 0)
    rate = detection_rate(verdicts, truth).percent;
  return make_row(std::string(to_string(fd.kind)), truth, counts, rate);
}

/// Scores every fitted detector on every infected trace.
inline EvalReport evaluate(const std::vector<FittedDetector>& fitted, const CycleTimeModel& model,
                           const std::vector<Trace>& infected, unsigned workers = 0) {
  EvalReport report;
  report.rows.resize(fitted.size() * infected.size());
  parallel_for(report.rows.size(), workers, [&](std::size_t j) {
    report.rows[j] = evaluate_run(fitted[j % fitted.size()], model, infected[j / fitted.size()]);
  });
  finalize(report);
  return report;
}

/// Generates and scores the campaign one infected trace at a time.
inline EvalReport evaluate_campaign(const std::vector<FittedDetector>& fitted, const CycleTimeModel& model,
                                    const std::vector<Trace>& clean, const std::vector<AttackTemplate>& manifest,
                                    unsigned workers = 0) {
  EvalReport report;
  report.rows.resize(campaign_jobs(clean.size(), model, manifest).size() * fitted.size());
  for_each_infected(clean, model, manifest, workers, [&](std::size_t j, const Trace& truth) {
    for (std::size_t d = 0; d < fitted.size(); ++d) report.rows[j * fitted.size() + d] = evaluate_run(fitted[d], model, truth);
  });
  finalize(report);
  return report;
}

inline std::vector<Trace> load_clean(const CampaignConfig& cfg) {
  std::vector<Trace> out;
  for (const auto& p : cfg.clean) out.push_back(read_trace_file(p));
  if (cfg.synthetic) {
    SynthOptions opts;
    opts.duration_s = cfg.synthetic->duration_s;
    opts.jitter = cfg.synthetic->jitter;
    opts.seed = cfg.seed;
    for (auto& t : synthesize_set(opts, cfg.synthetic->traces)) out.push_back(std::move(t));
  }
  if (out.empty()) throw ValidationError("campaign has no clean traces");
  return out;
}

struct BenchResult {
  CycleTimeModel model;
  std::vector<FittedDetector> fitted;
  std::size_t infected_traces = 0;
  EvalReport report;
};

/// gen -> fit -> detect -> eval in memory.
inline BenchResult run_bench(const CampaignConfig& cfg) {
  BenchResult r;
  auto clean = load_clean(cfg);
  r.model = estimate_cycle_times(clean);
  r.fitted = fit_all(cfg.detectors, clean, r.model, cfg.detector_config, cfg.fit, cfg.workers);
  r.report = evaluate_campaign(r.fitted, r.model, clean, cfg.attacks, cfg.workers);
  r.infected_traces = r.fitted.empty() ? 0 : r.report.rows.size() / r.fitted.size();
  return r;
}

// ---------------------------------------------------------------------------
// Campaign file

inline AttackTemplate attack_template_from_json(const nlohmann::json& j) {
  AttackSpec base = attack_spec_from_json(j);
  AttackTemplate t;
  t.kind = base.kind;
  t.start_time = base.start_time;
  t.end_time = base.end_time;
  t.phase = base.phase;
  t.overlap = base.overlap;
  if (j.contains("targets")) {
    const auto& targets = j["targets"];
    if (targets.is_string() && targets.get<std::string>() == "ventus") {
      for (const auto& s : ventus_ids()) t.targets.push_back(s.id);
    } else if (!(targets.is_string() && targets.get<std::string>() == "all")) {
      for (const auto& id : targets) t.targets.push_back(detail::json_id(id));
    }
  } else if (j.contains("target_id")) {
    t.targets.push_back(base.target_id);
  }
  if (j.contains("frequencies"))
    t.frequencies = j["frequencies"].get<std::vector<double>>();
  else if (base.frequency > 0)
    t.frequencies = {base.frequency};
  return t;
}

inline CampaignConfig campaign_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  CampaignConfig c;
  try {
    for (const auto& p : j.value("clean", std::vector<std::string>{})) {
      std::filesystem::path path(p);
      c.clean.push_back(path.is_relative() ? base_dir / path : path);
    }
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      SynthCampaign sc;
      sc.traces = s.value("traces", sc.traces);
      sc.duration_s = s.value("duration_s", sc.duration_s);
      sc.jitter = s.value("jitter", sc.jitter);
      c.synthetic = sc;
    }
    for (const auto& name : j.value("detectors", std::vector<std::string>{})) {
      auto kind = parse_detector_kind(name);
      if (!kind) throw ValidationError("unknown detector '" + name + "'");
      c.detectors.push_back(*kind);
    }
    std::string preset = j.value("preset", std::string("ventus"));
    if (preset == "ventus")
      c.detector_config = DetectorConfig::ventus();
    else if (preset == "otids")
      c.detector_config = DetectorConfig::otids();
    else
      throw ValidationError("unknown preset '" + preset + "'");
    if (j.contains("detector_config"))
      c.detector_config = detector_config_from_json(j["detector_config"], c.detector_config);
    if (j.contains("fit")) {
      const auto& f = j["fit"];
      c.fit.otsuka_deltas = f.value("otsuka_deltas", c.fit.otsuka_deltas);
      c.fit.taylor_threshold_step = f.value("taylor_threshold_step", c.fit.taylor_threshold_step);
      c.fit.cho_windows = f.value("cho_windows", c.fit.cho_windows);
      c.fit.cho_p_inits = f.value("cho_p_inits", c.fit.cho_p_inits);
      c.fit.cho_kappas = f.value("cho_kappas", c.fit.cho_kappas);
      c.fit.cho_limits = f.value("cho_limits", c.fit.cho_limits);
      c.fit.stabili_k_cap = f.value("stabili_k_cap", c.fit.stabili_k_cap);
    }
    if (j.contains("attacks")) {
      const auto& a = j["attacks"];
      if (a.is_string()) {
        if (a.get<std::string>() != "ventus") throw ValidationError("unknown attack manifest '" + a.get<std::string>() + "'");
        c.attacks = ventus_manifest();
      } else {
        for (const auto& t : a) c.attacks.push_back(attack_template_from_json(t));
      }
    }
    if (j.contains("out")) {
      std::filesystem::path out(j["out"].get<std::string>());
      c.out = out.is_relative() ? base_dir / out : out;
    }
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("campaign: ") + e.what());
  }
  return c;
}

inline CampaignConfig read_campaign_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open campaign '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  auto cfg = campaign_from_json(j, path.parent_path());
  for (const auto& p : cfg.clean)
    if (!std::filesystem::exists(p)) throw IoError("clean trace '" + p.string() + "' does not exist");
  return cfg;
}

}  // namespace cantids
