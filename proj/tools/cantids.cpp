// cantids: profile CAN traces, synthesize attacks, run and score detectors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "cantids/cantids.hpp"

namespace fs = std::filesystem;
using namespace cantids;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("cantids");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CANTIDS_LOG")) {
    auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("CANTIDS_LOG='{}' is not a log level", env);
    else
      spdlog::set_level(level);
  }
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Writes to `path`, or to stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text(path, text);
}

TraceFormat trace_format(const std::string& name) {
  auto f = parse_trace_format(name);
  if (!f) throw ValidationError("unknown trace format '" + name + "'");
  return *f;
}

DetectorKind detector_kind(const std::string& name) {
  auto k = parse_detector_kind(name);
  if (!k) throw ValidationError("unknown detector '" + name + "'");
  return *k;
}

std::vector<Trace> read_traces(const std::vector<std::string>& paths, TraceFormat fmt) {
  std::vector<Trace> out;
  for (const auto& p : paths) {
    out.push_back(read_trace_file(p, fmt));
    spdlog::info("read {} frames from {}", out.back().size(), p);
  }
  return out;
}

CycleTimeModel read_model(const std::string& path) { return cycle_model_from_json(read_json(path)); }

DetectorConfig preset_config(const std::string& preset) {
  if (preset == "ventus") return DetectorConfig::ventus();
  if (preset == "otids") return DetectorConfig::otids();
  throw ValidationError("unknown preset '" + preset + "'");
}

std::string report_text(const EvalReport& report, const std::string& format) {
  if (format == "json") return to_json(report).dump(2) + "\n";
  std::ostringstream out;
  write_report_csv(out, report);
  return out.str();
}

std::string deviation_table(const CycleTimeModel& model, const std::string& format) {
  if (format == "json") return to_json(model).dump(2) + "\n";
  std::ostringstream out;
  out << "id,ct_ms,cyclic,samples,min_dt_ms,max_dt_ms,max_deviation_pct\n";
  for (const auto& [id, r] : model.records)
    out << format_id(id) << ',' << to_ms(r.ct) << ',' << (r.cyclic ? "yes" : "no") << ',' << r.samples << ','
        << to_ms(r.min_dt) << ',' << to_ms(r.max_dt) << ',' << r.max_deviation_pct << '\n';
  return out.str();
}

nlohmann::json fitted_json(DetectorKind kind, const DetectorConfig& config) {
  auto j = to_json(config);
  j["detector"] = std::string(to_string(kind));
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Timing-based CAN intrusion detectors: profiling, attack synthesis, detection and scoring"};
  app.require_subcommand(1);

  std::string input_format = "native";
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = 1;

  // cycles
  auto* cycles = app.add_subcommand("cycles", "Estimate per-ID cycle times from clean traces");
  std::vector<std::string> cycle_traces;
  double cyclicity = 0.5;
  std::uint32_t bitrate = kDefaultBitrate;
  cycles->add_option("--trace,traces", cycle_traces, "Clean trace files")->required();
  cycles->add_option("--out", out, "Model JSON to write");
  cycles->add_option("--input-format", input_format, "Trace format: native or otids");
  cycles->add_option("--format", format, "Deviation table on stdout: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cycles->add_option("--cyclicity", cyclicity, "Max coefficient of variation for a cyclic ID");
  cycles->add_option("--bitrate", bitrate, "Bus bitrate in bit/s");

  // synth
  auto* synth = app.add_subcommand("synth", "Write synthetic Ventus-shaped clean traces");
  std::size_t synth_count = 7;
  double synth_duration = 600, synth_jitter = 0.04;
  std::string synth_timing = "anchored";
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--traces", synth_count, "Number of traces");
  synth->add_option("--duration", synth_duration, "Trace length in seconds");
  synth->add_option("--jitter", synth_jitter, "Bound on |dt/ct - 1|");
  synth->add_option("--timing", synth_timing, "anchored or random-walk")
      ->check(CLI::IsMember({"anchored", "random-walk"}));

  // gen
  auto* gen = app.add_subcommand("gen", "Generate infected traces");
  std::string campaign_path, gen_trace, attack_path, model_path;
  gen->add_option("--campaign", campaign_path, "Campaign file (batch mode)");
  gen->add_option("--trace", gen_trace, "Base trace (single mode)");
  gen->add_option("--attack", attack_path, "AttackSpec JSON (single mode)");
  gen->add_option("--model", model_path, "Cycle-time model (needed for impersonation)");
  gen->add_option("--out", out, "Output trace (single) or directory (batch)");
  gen->add_option("--seed", seed, "Seed for synthetic clean traces");
  gen->add_option("--input-format", input_format, "Trace format: native or otids");

  // fit
  auto* fitc = app.add_subcommand("fit", "Tune a detector on clean traces");
  std::string detector_name, base_config, preset = "ventus";
  std::vector<std::string> fit_traces;
  fitc->add_option("--detector", detector_name, "Detector name")->required();
  fitc->add_option("--trace", fit_traces, "Clean trace files")->required();
  fitc->add_option("--model", model_path, "Cycle-time model")->required();
  fitc->add_option("--out", out, "Fitted config JSON");
  fitc->add_option("--config", base_config, "Base detector config JSON");
  fitc->add_option("--preset", preset, "ventus or otids defaults");
  fitc->add_option("--input-format", input_format, "Trace format: native or otids");

  // detect
  auto* detect = app.add_subcommand("detect", "Run a detector over a trace");
  std::string config_path, detect_trace;
  detect->add_option("--detector", detector_name, "Detector name (defaults to the one in --config)");
  detect->add_option("--config", config_path, "Detector config JSON");
  detect->add_option("--model", model_path, "Cycle-time model")->required();
  detect->add_option("--trace", detect_trace, "Trace to analyse")->required();
  detect->add_option("--out", out, "Verdict file (JSON Lines)");
  detect->add_option("--input-format", input_format, "Trace format: native or otids");

  // eval
  auto* eval = app.add_subcommand("eval", "Score verdict files against labelled traces");
  std::vector<std::string> eval_traces, eval_verdicts;
  eval->add_option("--detector", detector_name, "Detector that produced the verdicts")->required();
  eval->add_option("--trace", eval_traces, "Labelled traces")->required();
  eval->add_option("--verdicts", eval_verdicts, "Verdict files, one per trace")->required();
  eval->add_option("--out", out, "Report file");
  eval->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  eval->add_option("--input-format", input_format, "Trace format: native or otids");

  // bench
  auto* bench = app.add_subcommand("bench", "Run the whole gen, fit, detect, eval pipeline");
  unsigned workers = 0;
  bench->add_option("--campaign", campaign_path, "Campaign file")->required();
  bench->add_option("--out", out, "Output directory (overrides the campaign)");
  bench->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  auto* seed_opt = bench->add_option("--seed", seed, "Seed override");
  bench->add_option("--workers", workers, "Worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*cycles) {
      CycleOptions opts;
      opts.cyclicity_threshold = cyclicity;
      if (bitrate == 0) throw ValidationError("bitrate must be positive");
      auto traces = read_traces(cycle_traces, trace_format(input_format));
      for (auto& t : traces) t.meta.bitrate = bitrate;
      auto model = estimate_cycle_times(traces, opts);
      for (CanId id : model.warnings) spdlog::warn("{} seen fewer than twice, no record", format_id(id));
      if (!out.empty()) write_text(out, to_json(model).dump(2) + "\n");
      std::cout << deviation_table(model, format);
    } else if (*synth) {
      SynthOptions opts;
      opts.seed = seed;
      opts.duration_s = synth_duration;
      opts.jitter = synth_jitter;
      opts.timing = synth_timing == "anchored" ? SynthTiming::anchored : SynthTiming::random_walk;
      fs::create_directories(out);
      for (const auto& t : synthesize_set(opts, synth_count)) write_trace_file(fs::path(out) / (t.meta.source + ".csv"), t);
    } else if (*gen) {
      if (!campaign_path.empty()) {
        auto cfg = read_campaign_file(campaign_path);
        if (gen->count("--seed")) cfg.seed = seed;
        if (!out.empty()) cfg.out = out;
        if (cfg.out.empty()) throw ValidationError("gen needs --out or an 'out' entry in the campaign");
        auto clean = load_clean(cfg);
        auto model = model_path.empty() ? estimate_cycle_times(clean) : read_model(model_path);
        fs::create_directories(cfg.out);
        nlohmann::json manifest = nlohmann::json::array();
        auto jobs = campaign_jobs(clean.size(), model, cfg.attacks);
        std::vector<std::string> names(jobs.size());
        for_each_infected(clean, model, cfg.attacks, cfg.workers, [&](std::size_t j, const Trace& t) {
          names[j] = t.meta.source + ".csv";
          write_trace_file(cfg.out / names[j], t);
        });
        for (std::size_t j = 0; j < jobs.size(); ++j)
          manifest.push_back({{"trace", names[j]}, {"attack", to_json(jobs[j].spec)}});
        write_text(cfg.out / "manifest.json", manifest.dump(2) + "\n");
        spdlog::info("wrote {} infected traces to {}", jobs.size(), cfg.out.string());
      } else {
        if (gen_trace.empty() || attack_path.empty() || out.empty())
          throw ValidationError("gen needs --campaign, or --trace, --attack and --out");
        auto base = read_trace_file(gen_trace, trace_format(input_format));
        auto spec = attack_spec_from_json(read_json(attack_path));
        CycleTimeModel model = model_path.empty() ? estimate_cycle_times(base) : read_model(model_path);
        write_trace_file(out, apply_attack(base, spec, model));
      }
    } else if (*fitc) {
      auto kind = detector_kind(detector_name);
      auto config = preset_config(preset);
      if (!base_config.empty()) config = detector_config_from_json(read_json(base_config), config);
      auto traces = read_traces(fit_traces, trace_format(input_format));
      auto fitted = fit(kind, traces, read_model(model_path), config);
      emit(out, fitted_json(kind, fitted).dump(2) + "\n");
    } else if (*detect) {
      nlohmann::json cj = config_path.empty() ? nlohmann::json::object() : read_json(config_path);
      if (detector_name.empty()) detector_name = cj.value("detector", std::string());
      if (detector_name.empty()) throw ValidationError("detect needs --detector or a config naming one");
      auto kind = detector_kind(detector_name);
      auto det = make_detector(kind, detector_config_from_json(cj), read_model(model_path));
      auto trace = read_trace_file(detect_trace, trace_format(input_format));
      auto verdicts = run_detector(*det, trace);
      spdlog::info("{} verdicts, {} anomalous", verdicts.size(), count_anomalies(verdicts));
      std::ostringstream text;
      write_verdicts(text, verdicts);
      emit(out, text.str());
    } else if (*eval) {
      auto kind = detector_kind(detector_name);
      if (eval_traces.size() != eval_verdicts.size())
        throw ValidationError("--trace and --verdicts must be given the same number of times");
      EvalReport report;
      for (std::size_t i = 0; i < eval_traces.size(); ++i) {
        auto truth = read_trace_file(eval_traces[i], trace_format(input_format));
        std::ifstream vin(eval_verdicts[i]);
        if (!vin) throw IoError("cannot open '" + eval_verdicts[i] + "'");
        auto verdicts = read_verdicts(vin);
        auto counts = score_run(verdicts, truth, policy_for(kind, truth.meta.attack.kind));
        std::optional<double> rate;
        if (truth.meta.attack.kind == AttackKind::remove_inhibition && truth.meta.removed_count > 0) {
          auto dr = detection_rate(verdicts, truth);
          if (dr.capped) spdlog::warn("{}: more alarms than removed frames, rate capped", eval_traces[i]);
          rate = dr.percent;
        }
        report.rows.push_back(make_row(std::string(to_string(kind)), truth, counts, rate));
      }
      finalize(report);
      emit(out, report_text(report, format));
    } else if (*bench) {
      auto cfg = read_campaign_file(campaign_path);
      if (seed_opt->count()) cfg.seed = seed;
      if (!out.empty()) cfg.out = out;
      if (workers) cfg.workers = workers;
      if (cfg.detectors.empty()) throw ValidationError("campaign lists no detectors");
      auto result = run_bench(cfg);
      if (!cfg.out.empty()) {
        write_text(cfg.out / "model.json", to_json(result.model).dump(2) + "\n");
        for (const auto& f : result.fitted)
          write_text(cfg.out / "configs" / (std::string(to_string(f.kind)) + ".json"),
                     fitted_json(f.kind, f.config).dump(2) + "\n");
        write_text(cfg.out / (format == "json" ? "report.json" : "report.csv"), report_text(result.report, format));
        spdlog::info("{} infected traces scored, report in {}", result.infected_traces, cfg.out.string());
      } else {
        std::cout << report_text(result.report, format);
      }
    }
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  }
  return kExitOk;
}
