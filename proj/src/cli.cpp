#include "eegprompt/cli.hpp"

#include "eegprompt/audio.hpp"
#include "eegprompt/error.hpp"
#include "eegprompt/harness.hpp"
#include "eegprompt/log.hpp"
#include "eegprompt/signal.hpp"
#include "eegprompt/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace eegprompt {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

TimeWindow parse_window(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const double a = std::stod(s.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(s);
    const std::string rest = s.substr(colon + 1);
    const double b = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(s);
    if (!(a >= 0.0 && b > a)) throw ConfigError("window '" + s + "' must satisfy 0 <= start < end");
    return {a, b};
  } catch (const std::logic_error&) {
    throw ConfigError("window '" + s + "' is not of the form start:end (seconds)");
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

struct FilterArgs {
  double f_low = 0.1;
  double f_high = 45.0;
  std::size_t taps = 0;

  void add(CLI::App* app) {
    app->add_option("--f-low", f_low, "Low cutoff in Hz")->capture_default_str();
    app->add_option("--f-high", f_high, "High cutoff in Hz")->capture_default_str();
    app->add_option("--taps", taps, "Odd FIR length; 0 derives it from the cutoffs")->capture_default_str();
  }
  FilterSpec spec() const { return {f_low, f_high, taps}; }
};

// ---------------------------------------------------------------------------
// preprocess / topomap / features

struct PreprocessArgs {
  std::string eeg, out, window;
  double sfreq = 0.0;
  FilterArgs filter;
};

int cmd_preprocess(const PreprocessArgs& a) {
  const EegRecording rec = read_eeg_csv(a.eeg, a.sfreq);
  const auto taps = design_bandpass_fir(a.filter.spec(), rec.sfreq);
  EegRecording clean = average_reference(apply_fir(rec, taps));
  if (!a.window.empty()) {
    const TimeWindow w = parse_window(a.window);
    const auto first = static_cast<std::size_t>(std::llround(w.start_s * rec.sfreq));
    const auto last = std::min(clean.n_samples(), static_cast<std::size_t>(std::llround(w.end_s * rec.sfreq)));
    if (first >= last) throw ConfigError("window " + a.window + " selects no samples");
    Matrix cropped(last - first, clean.n_channels());
    for (std::size_t i = first; i < last; ++i)
      std::copy(clean.data.row(i).begin(), clean.data.row(i).end(), cropped.row(i - first).begin());
    clean.data = std::move(cropped);
  }
  write_eeg_csv(a.out, clean);
  return 0;
}

struct TopomapArgs {
  std::string eeg, out, window;
  double sfreq = 0.0;
  std::size_t snapshots = 10;
  std::size_t grid = 64;
  bool per_timestamp = false;
  FilterArgs filter;
};

int cmd_topomap(const TopomapArgs& a, std::ostream& out) {
  const EegRecording rec = read_eeg_csv(a.eeg, a.sfreq);
  PipelineOptions options;
  options.filter = a.filter.spec();
  options.snapshots = a.snapshots;
  options.grid = a.grid;
  options.per_timestamp_images = a.per_timestamp;
  const EegPayload payload = build_eeg_payload(rec, parse_window(a.window), options);
  if (payload.pngs.size() == 1) {
    write_file(a.out, payload.pngs.front());
    out << a.out << '\n';
    return 0;
  }
  const fs::path base(a.out);
  for (std::size_t i = 0; i < payload.pngs.size(); ++i) {
    fs::path p = base;
    p.replace_filename(base.stem().string() + "_" + std::to_string(i) + base.extension().string());
    write_file(p, payload.pngs[i]);
    out << p.string() << '\n';
  }
  return 0;
}

struct FeaturesArgs {
  std::string audio, out, format;
};

int cmd_features(const FeaturesArgs& a) {
  const FeatureSummary f = extract_features(read_wav(a.audio));
  std::string format = a.format;
  if (format.empty()) format = fs::path(a.out).extension() == ".json" ? "json" : "txt";
  if (format == "txt") {
    write_file(a.out, textualize(f) + "\n");
    return 0;
  }
  if (format != "json") throw ConfigError("unknown features format '" + format + "' (expected json or txt)");
  json chroma = json::object();
  for (std::size_t i = 0; i < 12; ++i) chroma[kPitchNames[i]] = f.chroma_mean[i];
  const json j = {{"mfcc_mean", f.mfcc_mean}, {"mfcc_std", f.mfcc_std}, {"mel_mean", f.mel_mean},
                  {"mel_std", f.mel_std},     {"chroma_mean", chroma},  {"text", textualize(f)}};
  write_file(a.out, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::size_t classes = 3;
  std::size_t samples = 30;
  std::uint64_t seed = 0;
  std::string out;
  bool no_transcripts = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthOptions o;
  o.classes = a.classes;
  o.samples = a.samples;
  o.seed = a.seed;
  o.transcripts = !a.no_transcripts;
  out << write_synth_dataset(a.out, o).string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// run settings, shared by `run` and `prompt`

struct RunSettings {
  std::string manifest;
  std::string out;
  std::vector<std::string> strategies;  // empty: both
  std::size_t shots = 1;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  std::string modalities;  // csv; empty: every manifest modality
  bool ablation = false;
  std::string gateway = "oracle";
  std::string script;
  std::size_t workers = 4;
  bool strict = false;
  bool verbatim = false;
  std::size_t snapshots = 10;
  std::size_t grid = 64;
  bool per_timestamp = false;
  FilterArgs filter;
  GatewayConfig llm;
};

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::string join_list(const json& v, const char* key) {
  if (v.is_string()) return v.get<std::string>();
  if (!v.is_array()) throw ConfigError(std::string("config key '") + key + "' must be a string or a list");
  std::string out;
  for (const auto& item : v) {
    if (!item.is_string()) throw ConfigError(std::string("config key '") + key + "' must list strings");
    out += (out.empty() ? "" : ",") + item.get<std::string>();
  }
  return out;
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "api_key")
      throw ConfigError(where + ": literal API keys are not accepted; set api_key_env to the name of an "
                                "environment variable holding the key");
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

// Values in the file take precedence over command-line flags.
void apply_config_file(const fs::path& path, RunSettings& s) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": expected a JSON object");
  check_keys(j,
             {"manifest", "out", "strategy", "shots", "repeats", "seed", "modalities", "ablation", "gateway", "script",
              "workers", "strict", "verbatim_paper_prompt", "snapshots", "grid", "per_timestamp_images", "f_low",
              "f_high", "n_taps", "llm"},
             path.string());
  const fs::path dir = path.parent_path();
  auto relative = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative() && !dir.empty()) p = (dir / p).string();
  };
  if (j.contains("manifest")) {
    take(j, "manifest", s.manifest);
    relative(s.manifest);
  }
  if (j.contains("out")) {
    take(j, "out", s.out);
    relative(s.out);
  }
  if (j.contains("script")) {
    take(j, "script", s.script);
    relative(s.script);
  }
  if (j.contains("strategy")) {
    std::stringstream ss(join_list(j.at("strategy"), "strategy"));
    s.strategies.clear();
    for (std::string item; std::getline(ss, item, ',');) s.strategies.push_back(item);
  }
  if (j.contains("modalities")) s.modalities = join_list(j.at("modalities"), "modalities");
  take(j, "shots", s.shots);
  take(j, "repeats", s.repeats);
  take(j, "seed", s.seed);
  take(j, "ablation", s.ablation);
  take(j, "gateway", s.gateway);
  take(j, "workers", s.workers);
  take(j, "strict", s.strict);
  take(j, "verbatim_paper_prompt", s.verbatim);
  take(j, "snapshots", s.snapshots);
  take(j, "grid", s.grid);
  take(j, "per_timestamp_images", s.per_timestamp);
  take(j, "f_low", s.filter.f_low);
  take(j, "f_high", s.filter.f_high);
  take(j, "n_taps", s.filter.taps);
  if (j.contains("llm")) {
    const json& l = j.at("llm");
    if (!l.is_object()) throw ConfigError(path.string() + ": 'llm' must be an object");
    check_keys(l,
               {"endpoint", "model", "api_key_env", "temperature", "max_tokens", "timeout_s", "max_in_flight",
                "max_attempts", "backoff_base_s", "system_message"},
               path.string() + " llm");
    take(l, "endpoint", s.llm.endpoint);
    take(l, "model", s.llm.model);
    take(l, "api_key_env", s.llm.api_key_env);
    take(l, "temperature", s.llm.temperature);
    take(l, "max_tokens", s.llm.max_tokens);
    take(l, "timeout_s", s.llm.timeout_s);
    take(l, "max_in_flight", s.llm.max_in_flight);
    take(l, "max_attempts", s.llm.max_attempts);
    take(l, "backoff_base_s", s.llm.backoff_base_s);
    take(l, "system_message", s.llm.system_message);
  }
}

json settings_json(const RunSettings& s) {
  return {{"manifest", s.manifest},
          {"out", s.out},
          {"strategy", s.strategies},
          {"shots", s.shots},
          {"repeats", s.repeats},
          {"seed", s.seed},
          {"modalities", s.modalities},
          {"ablation", s.ablation},
          {"gateway", s.gateway},
          {"script", s.script},
          {"workers", s.workers},
          {"strict", s.strict},
          {"verbatim_paper_prompt", s.verbatim},
          {"snapshots", s.snapshots},
          {"grid", s.grid},
          {"per_timestamp_images", s.per_timestamp},
          {"f_low", s.filter.f_low},
          {"f_high", s.filter.f_high},
          {"n_taps", s.filter.taps},
          {"llm",
           {{"endpoint", s.llm.endpoint},
            {"model", s.llm.model},
            {"api_key_env", s.llm.api_key_env},
            {"temperature", s.llm.temperature},
            {"max_tokens", s.llm.max_tokens},
            {"timeout_s", s.llm.timeout_s},
            {"max_in_flight", s.llm.max_in_flight},
            {"max_attempts", s.llm.max_attempts},
            {"backoff_base_s", s.llm.backoff_base_s},
            {"system_message", s.llm.system_message}}}};
}

void add_run_options(CLI::App* app, RunSettings& s) {
  app->add_option("--manifest", s.manifest, "Dataset manifest (JSON lines)");
  app->add_option("--shots", s.shots, "Examples per few-shot prompt (M)")->capture_default_str();
  app->add_option("--seed", s.seed, "Base seed; trial i uses seed + i")->capture_default_str();
  app->add_option("--modalities", s.modalities, "Comma-separated subset of eeg,face,audio");
  app->add_flag("--verbatim-paper-prompt", s.verbatim, "Use the original template wording unchanged");
  app->add_option("--snapshots", s.snapshots, "EEG snapshots per sample")->capture_default_str();
  app->add_option("--grid", s.grid, "Interpolation grid size")->capture_default_str();
  app->add_flag("--per-timestamp-images", s.per_timestamp, "One EEG image per snapshot instead of a montage");
  s.filter.add(app);
}

TrialConfig trial_config(const RunSettings& s) {
  TrialConfig c;
  c.shots = s.shots;
  c.repeats = s.repeats;
  c.seed = s.seed;
  c.strict = s.strict;
  c.workers = s.workers;
  c.prompt.verbatim_paper_prompt = s.verbatim;
  c.pipeline.filter = s.filter.spec();
  c.pipeline.snapshots = s.snapshots;
  c.pipeline.grid = s.grid;
  c.pipeline.per_timestamp_images = s.per_timestamp;
  return c;
}

std::vector<std::string> load_script(const fs::path& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      return json::parse(text).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  std::vector<std::string> replies;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    replies.push_back(line);
  }
  return replies;
}

std::unique_ptr<Gateway> make_gateway(const RunSettings& s, const CliContext& ctx, const fs::path& run_dir) {
  if (s.gateway == "oracle") return std::make_unique<OracleGateway>();
  if (s.gateway == "uniform") return std::make_unique<UniformGateway>(s.seed);
  if (s.gateway == "scripted") {
    if (s.script.empty()) throw ConfigError("--gateway scripted needs --script <file>");
    return std::make_unique<ScriptedGateway>(load_script(s.script));
  }
  if (s.gateway == "real") {
    const fs::path log_path = run_dir / "llm.jsonl";
    std::error_code ec;
    fs::remove(log_path, ec);
    auto transport = ctx.transport ? ctx.transport() : make_http_transport();
    return std::make_unique<ChatCompletionGateway>(s.llm, std::move(transport), std::make_shared<JsonlLog>(log_path),
                                                   ctx.sleeper);
  }
  throw ConfigError("unknown gateway '" + s.gateway + "' (expected real, oracle, uniform or scripted)");
}

std::vector<Strategy> strategies_of(const RunSettings& s) {
  if (s.strategies.empty()) return {Strategy::ZeroShot, Strategy::FewShot};
  std::vector<Strategy> out;
  for (const auto& name : s.strategies) {
    if (name == "both") {
      out = {Strategy::ZeroShot, Strategy::FewShot};
      continue;
    }
    const Strategy st = parse_strategy(name);
    if (std::find(out.begin(), out.end(), st) == out.end()) out.push_back(st);
  }
  return out;
}

// ---------------------------------------------------------------------------
// run / report

int cmd_run(RunSettings s, const std::string& config_path, const CliContext& ctx, std::ostream& out,
            std::ostream& err) {
  if (!config_path.empty()) apply_config_file(config_path, s);
  if (s.manifest.empty()) throw ConfigError("run needs --manifest");
  if (s.out.empty()) throw ConfigError("run needs --out");

  const DatasetManifest manifest = load_manifest(s.manifest);
  const std::vector<Strategy> strategies = strategies_of(s);
  std::vector<ModalitySet> subsets;
  const ModalitySet chosen = s.modalities.empty() ? manifest.modalities : ModalitySet::parse(s.modalities);
  if (chosen.empty()) throw ConfigError("no modalities selected");
  if (s.modalities.empty() || s.ablation)
    subsets = chosen.nonempty_subsets();
  else
    subsets = {chosen};

  const fs::path dir(s.out);
  ensure_dir(dir);
  write_file(dir / "config.json", settings_json(s).dump(2) + "\n");
  auto gateway = make_gateway(s, ctx, dir);

  std::ofstream verdicts(dir / "verdicts.jsonl", std::ios::binary | std::ios::trunc);
  if (!verdicts) throw IoError("cannot write " + (dir / "verdicts.jsonl").string());
  const TrialObserver observer = [&](const TrialConfig& config, const TrialResult& trial) {
    json line = to_json(trial);
    line["strategy"] = to_string(config.strategy);
    line["modalities"] = config.modalities.str();
    json vs = json::array();
    for (const auto& v : trial.verdicts) vs.push_back(to_json(v));
    line["verdicts"] = std::move(vs);
    verdicts << line.dump() << '\n';
    verdicts.flush();
  };

  const RunReport report = ablation_grid(manifest, strategies, subsets, trial_config(s), *gateway, observer);
  write_file(dir / "report.json", to_json(report).dump(2) + "\n");
  const std::string md = emit_report({report}, ReportFormat::Markdown);
  write_file(dir / "report.md", md);
  write_file(dir / "report.csv", emit_report({report}, ReportFormat::Csv));
  out << md;

  std::size_t skipped = 0, transport = 0, invalid = 0;
  for (const auto& c : report.cells) {
    skipped += c.skipped;
    transport += c.transport_errors;
    invalid += c.invalid;
  }
  if (invalid) err << invalid << " invalid responses counted as incorrect\n";
  if (skipped || transport) {
    err << "sample-level failures: " << skipped << " skipped, " << transport << " transport errors\n";
    return 1;
  }
  return 0;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string format = "md";
  std::string out;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const ReportFormat format = parse_report_format(a.format);
  std::vector<RunReport> reports;
  for (const auto& run : a.runs) {
    const fs::path p = fs::path(run) / "report.json";
    json j;
    try {
      j = json::parse(read_file(p));
    } catch (const json::parse_error& e) {
      throw ParseError(p.string() + ": " + e.what());
    }
    reports.push_back(report_from_json(j));
  }
  const std::string text = emit_report(reports, format);
  if (a.out.empty())
    out << text;
  else
    write_file(a.out, text);
  return 0;
}

// ---------------------------------------------------------------------------
// prompt --dry-run

struct PromptArgs {
  RunSettings settings;
  std::string sample;
  std::string strategy = "zero";
  std::string attachments;
  bool dry_run = false;
};

int cmd_prompt(const PromptArgs& a, std::ostream& out) {
  if (!a.dry_run) throw ConfigError("prompt only supports --dry-run; use `run` to query a model");
  const RunSettings& s = a.settings;
  if (s.manifest.empty()) throw ConfigError("prompt needs --manifest");
  const DatasetManifest manifest = load_manifest(s.manifest);
  const ModalitySet subset = s.modalities.empty() ? manifest.modalities : ModalitySet::parse(s.modalities);
  if (subset.empty() || !subset.subset_of(manifest.modalities))
    throw ConfigError("manifest " + manifest.name + " does not provide " + subset.str());

  std::size_t query = manifest.samples.size();
  for (std::size_t i = 0; i < manifest.samples.size(); ++i)
    if (manifest.samples[i].id == a.sample) query = i;
  if (query == manifest.samples.size()) throw ConfigError("no sample '" + a.sample + "' in " + s.manifest);

  const TrialConfig config = trial_config(s);
  PayloadCache cache(manifest, config.pipeline);
  AssembledPrompt prompt = build_zero_shot(cache.descriptors(query, subset), manifest.task, config.prompt);

  if (parse_strategy(a.strategy) == Strategy::FewShot) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
      if (i == query) continue;
      try {
        cache.descriptors(i, subset);
        candidates.push_back(i);
      } catch (const Error& e) {
        log_warning("sample '" + manifest.samples[i].id + "' cannot serve as a shot: " + e.what());
      }
    }
    if (candidates.size() < s.shots)
      throw ConfigError("only " + std::to_string(candidates.size()) + " usable shot samples");
    std::vector<ShotExample> shots;
    for (std::size_t pick : draw_without_replacement(candidates.size(), s.shots, s.seed))
      shots.push_back({cache.descriptors(candidates[pick], subset), manifest.samples[candidates[pick]].label});
    prompt = build_few_shot(prompt, shots, manifest.task);
  }

  std::vector<std::string> refs;
  if (!a.attachments.empty()) {
    ensure_dir(a.attachments);
    std::size_t n = 0;
    for (const auto& part : prompt.parts) {
      if (part.kind != PartKind::Image) continue;
      const std::string ext = part.mime_type == "image/jpeg" ? ".jpg" : ".png";
      const fs::path p = fs::path(a.attachments) / ("attachment_" + std::to_string(n++) + ext);
      write_file(p, part.image);
      refs.push_back(p.string());
    }
  }
  out << render_dry_run(prompt, refs);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, const CliContext& context) {
  std::ostream& out = context.out ? *context.out : std::cout;
  std::ostream& err = context.err ? *context.err : std::cerr;

  CLI::App app{"Multimodal EEG, face and audio prompting with a zero-/few-shot evaluation harness", "eegprompt"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  PreprocessArgs pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "Band-pass filter and average-reference an EEG CSV");
  pre_cmd->add_option("--eeg", pre.eeg, "Input CSV")->required();
  pre_cmd->add_option("--sfreq", pre.sfreq, "Sampling rate in Hz")->required();
  pre_cmd->add_option("--window", pre.window, "Keep only start:end seconds");
  pre_cmd->add_option("--out", pre.out, "Output CSV")->required();
  pre.filter.add(pre_cmd);

  TopomapArgs topo;
  auto* topo_cmd = app.add_subcommand("topomap", "Render the snapshot montage of an EEG window");
  topo_cmd->add_option("--eeg", topo.eeg, "Input CSV")->required();
  topo_cmd->add_option("--sfreq", topo.sfreq, "Sampling rate in Hz")->required();
  topo_cmd->add_option("--window", topo.window, "Elicitation window start:end in seconds")->required();
  topo_cmd->add_option("--out", topo.out, "Output PNG")->required();
  topo_cmd->add_option("--snapshots", topo.snapshots, "Snapshots in the window")->capture_default_str();
  topo_cmd->add_option("--grid", topo.grid, "Interpolation grid size")->capture_default_str();
  topo_cmd->add_flag("--per-timestamp-images", topo.per_timestamp, "Write one PNG per snapshot");
  topo.filter.add(topo_cmd);

  FeaturesArgs feat;
  auto* feat_cmd = app.add_subcommand("features", "Summarize MFCC, mel and chroma features of a WAV file");
  feat_cmd->add_option("--audio", feat.audio, "Input WAV")->required();
  feat_cmd->add_option("--out", feat.out, "Output .json or .txt")->required();
  feat_cmd->add_option("--format", feat.format, "json or txt; default from the extension");

  PromptArgs prompt;
  auto* prompt_cmd = app.add_subcommand("prompt", "Print the prompt assembled for one sample");
  add_run_options(prompt_cmd, prompt.settings);
  prompt_cmd->add_option("--sample", prompt.sample, "Sample id")->required();
  prompt_cmd->add_option("--strategy", prompt.strategy, "zero or few")->capture_default_str();
  prompt_cmd->add_option("--attachments", prompt.attachments, "Write image attachments to this directory");
  prompt_cmd->add_flag("--dry-run", prompt.dry_run, "Print without contacting a model");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset and its manifest");
  synth_cmd->add_option("--classes", synth.classes, "Number of classes")->capture_default_str();
  synth_cmd->add_option("--samples", synth.samples, "Number of samples")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_flag("--no-transcripts", synth.no_transcripts, "Omit transcript files");

  RunSettings run;
  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Run trials over modality subsets and strategies");
  add_run_options(run_cmd, run);
  run_cmd->add_option("--config", config_path, "JSON run configuration; its values override flags");
  run_cmd->add_option("--out", run.out, "Run directory");
  run_cmd->add_option("--strategy", run.strategies, "zero, few or both (repeatable; default both)");
  run_cmd->add_option("--repeats", run.repeats, "Trials per cell")->capture_default_str();
  run_cmd->add_flag("--ablation", run.ablation, "Evaluate every non-empty subset of --modalities");
  run_cmd->add_option("--gateway", run.gateway, "real, oracle, uniform or scripted")->capture_default_str();
  run_cmd->add_option("--script", run.script, "Replies for the scripted gateway");
  run_cmd->add_option("--workers", run.workers, "Parallel samples per trial")->capture_default_str();
  run_cmd->add_flag("--strict", run.strict, "Abort on a missing or unreadable modality file");
  run_cmd->add_option("--endpoint", run.llm.endpoint, "Chat-completion URL")->capture_default_str();
  run_cmd->add_option("--model", run.llm.model, "Model id")->capture_default_str();
  run_cmd->add_option("--api-key-env", run.llm.api_key_env, "Environment variable holding the API key")
      ->capture_default_str();
  run_cmd->add_option("--temperature", run.llm.temperature)->capture_default_str();
  run_cmd->add_option("--max-tokens", run.llm.max_tokens)->capture_default_str();
  run_cmd->add_option("--timeout", run.llm.timeout_s, "Request timeout in seconds")->capture_default_str();
  run_cmd->add_option("--max-in-flight", run.llm.max_in_flight)->capture_default_str();
  run_cmd->add_flag("--system-message", run.llm.system_message, "Send the role-play sentence as a system message");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Print the accuracy table of one or more runs");
  report_cmd->add_option("--run", report.runs, "Run directory (repeat for one column per dataset)")->required();
  report_cmd->add_option("--format", report.format, "md or csv")->capture_default_str();
  report_cmd->add_option("--out", report.out, "Write to a file instead of stdout");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const LogLevel previous = log_level();
  if (verbose) set_log_level(LogLevel::Info);
  struct Restore {
    LogLevel level;
    ~Restore() { set_log_level(level); }
  } restore{previous};

  try {
    if (*pre_cmd) return cmd_preprocess(pre);
    if (*topo_cmd) return cmd_topomap(topo, out);
    if (*feat_cmd) return cmd_features(feat);
    if (*prompt_cmd) return cmd_prompt(prompt, out);
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*run_cmd) return cmd_run(run, config_path, context, out, err);
    if (*report_cmd) return cmd_report(report, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace eegprompt
