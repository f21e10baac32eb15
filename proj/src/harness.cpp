#include "eegprompt/harness.hpp"

#include "eegprompt/audio.hpp"
#include "eegprompt/error.hpp"
#include "eegprompt/log.hpp"
#include "eegprompt/topomap.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace eegprompt {

using nlohmann::json;

std::string to_string(Modality m) {
  switch (m) {
    case Modality::Eeg: return "eeg";
    case Modality::Face: return "face";
    case Modality::Audio: return "audio";
  }
  return "unknown";
}

Modality parse_modality(const std::string& s) {
  if (s == "eeg") return Modality::Eeg;
  if (s == "face") return Modality::Face;
  if (s == "audio") return Modality::Audio;
  throw ConfigError("unknown modality '" + s + "' (expected eeg, face or audio)");
}

ModalitySet::ModalitySet(std::initializer_list<Modality> ms) {
  for (Modality m : ms) insert(m);
}

ModalitySet ModalitySet::parse(const std::string& csv) {
  ModalitySet s;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (!item.empty()) s.insert(parse_modality(item));
  }
  return s;
}

std::size_t ModalitySet::size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<Modality> ModalitySet::members() const {
  std::vector<Modality> out;
  for (Modality m : {Modality::Eeg, Modality::Face, Modality::Audio})
    if (contains(m)) out.push_back(m);
  return out;
}

std::string ModalitySet::str() const {
  if (empty()) return "none";
  std::string out;
  for (Modality m : members()) out += (out.empty() ? "" : "+") + to_string(m);
  return out;
}

std::vector<ModalitySet> ModalitySet::nonempty_subsets() const {
  std::vector<ModalitySet> out;
  for (unsigned b = 1; b < 8; ++b)
    if ((b & ~bits_) == 0) out.push_back(from_bits(b));
  std::stable_sort(out.begin(), out.end(), [](ModalitySet a, ModalitySet b) { return a.size() < b.size(); });
  return out;
}

bool SampleRecord::declares(Modality m) const {
  switch (m) {
    case Modality::Eeg: return !eeg_csv.empty();
    case Modality::Face: return !face_image.empty();
    case Modality::Audio: return !audio_wav.empty();
  }
  return false;
}

std::filesystem::path DatasetManifest::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

bool DatasetManifest::audio_has_transcript() const {
  return std::any_of(samples.begin(), samples.end(), [](const SampleRecord& s) { return !s.transcript.empty(); });
}

void DatasetManifest::validate() const {
  try {
    task.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("manifest " + name + ": " + e.what());
  }
  if (samples.size() < 2) throw ConfigError("manifest " + name + " needs at least 2 samples");
  if (modalities.empty()) throw ConfigError("manifest " + name + " lists no modalities");
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!ids.insert(s.id).second) throw ConfigError("duplicate sample id '" + s.id + "'");
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= task.size())
      throw ConfigError("sample '" + s.id + "' has label " + std::to_string(s.label) + " outside 0.." +
                        std::to_string(task.size() - 1));
    if (!s.declares(Modality::Eeg) && !s.declares(Modality::Face) && !s.declares(Modality::Audio))
      throw ConfigError("sample '" + s.id + "' declares no modality files");
  }
}

namespace {

std::optional<TimeWindow> window_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& w = j.at(key);
  if (w.is_array()) return TimeWindow{w.at(0).get<double>(), w.at(1).get<double>()};
  return TimeWindow{w.at("start").get<double>(), w.at("end").get<double>()};
}

std::string path_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  return j.at(key).get<std::string>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
    try {
      if (!header) {
        reject_unknown(j, {"name", "symptom", "classes", "window", "sfreq", "modalities"}, "manifest header");
        m.name = j.value("name", std::string("dataset"));
        m.task.symptom = j.at("symptom").get<std::string>();
        int index = 0;
        for (const auto& c : j.at("classes")) {
          ClassLabel label;
          label.index = c.is_object() ? c.value("index", index) : index;
          label.name = c.is_object() ? c.at("name").get<std::string>() : c.get<std::string>();
          label.description = c.is_object() ? c.value("description", std::string()) : std::string();
          m.task.classes.push_back(label);
          ++index;
        }
        if (auto w = window_from_json(j, "window")) m.default_window = *w;
        if (j.contains("sfreq")) m.default_sfreq = j.at("sfreq").get<double>();
        for (const auto& mod : j.at("modalities")) m.modalities.insert(parse_modality(mod.get<std::string>()));
        header = true;
        continue;
      }
      reject_unknown(j, {"id", "label", "eeg_csv", "sfreq", "window", "face_image", "audio_wav", "transcript"},
                     "manifest line " + std::to_string(line_no));
      SampleRecord s;
      s.id = j.at("id").get<std::string>();
      s.label = j.at("label").get<int>();
      s.eeg_csv = path_field(j, "eeg_csv");
      if (j.contains("sfreq")) s.sfreq = j.at("sfreq").get<double>();
      s.window = window_from_json(j, "window");
      s.face_image = path_field(j, "face_image");
      s.audio_wav = path_field(j, "audio_wav");
      s.transcript = path_field(j, "transcript");
      m.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
  if (!header) throw ParseError(path.string() + ": empty manifest");
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  json classes = json::array();
  for (const auto& c : m.task.classes) {
    json cj = {{"index", c.index}, {"name", c.name}};
    if (!c.description.empty()) cj["description"] = c.description;
    classes.push_back(cj);
  }
  json mods = json::array();
  for (Modality mod : m.modalities.members()) mods.push_back(to_string(mod));
  json header = {{"name", m.name},
                 {"symptom", m.task.symptom},
                 {"classes", classes},
                 {"window", {{"start", m.default_window.start_s}, {"end", m.default_window.end_s}}},
                 {"modalities", mods}};
  if (m.default_sfreq) header["sfreq"] = *m.default_sfreq;
  out << header.dump() << '\n';
  for (const auto& s : m.samples) {
    json j = {{"id", s.id}, {"label", s.label}};
    if (!s.eeg_csv.empty()) j["eeg_csv"] = s.eeg_csv.generic_string();
    if (s.sfreq) j["sfreq"] = *s.sfreq;
    if (s.window) j["window"] = {{"start", s.window->start_s}, {"end", s.window->end_s}};
    if (!s.face_image.empty()) j["face_image"] = s.face_image.generic_string();
    if (!s.audio_wav.empty()) j["audio_wav"] = s.audio_wav.generic_string();
    if (!s.transcript.empty()) j["transcript"] = s.transcript.generic_string();
    out << j.dump() << '\n';
  }
}

std::string to_string(Strategy s) { return s == Strategy::ZeroShot ? "zero-shot" : "few-shot"; }

Strategy parse_strategy(const std::string& s) {
  if (s == "zero" || s == "zero-shot") return Strategy::ZeroShot;
  if (s == "few" || s == "few-shot") return Strategy::FewShot;
  throw ConfigError("unknown strategy '" + s + "' (expected zero or few)");
}

void TrialConfig::validate() const {
  if (strategy == Strategy::FewShot && shots < 1) throw ConfigError("few-shot prompting needs at least one shot");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (modalities.empty()) throw ConfigError("a trial needs at least one modality");
  if (pipeline.snapshots < 1) throw ConfigError("snapshot count must be >= 1");
}

EegPayload build_eeg_payload(const EegRecording& recording, const TimeWindow& window, const PipelineOptions& options) {
  recording.validate();
  if (!(recording.sfreq > 2.0 * options.filter.f_high))
    throw ParameterError("sampling rate " + std::to_string(recording.sfreq) + " Hz is not above twice the " +
                         std::to_string(options.filter.f_high) + " Hz cutoff");
  if (window.end_s > recording.duration() + 1e-9)
    throw ParameterError("window end " + std::to_string(window.end_s) + " s exceeds the recording duration " +
                         std::to_string(recording.duration()) + " s");

  const std::vector<double> taps = design_bandpass_fir(options.filter, recording.sfreq);
  const EegRecording clean = average_reference(apply_fir(recording, taps));
  EegPayload payload;
  payload.timestamps = equidistant_timestamps(window, options.snapshots);
  const SnapshotSet snaps = snapshot(clean, payload.timestamps);
  std::vector<TopomapImage> panels = snapshot_panels(clean, snaps, options.grid);

  if (options.per_timestamp_images) {
    for (auto& p : panels) payload.pngs.push_back(std::move(p.png));
    return payload;
  }
  const std::size_t k = panels.size();
  const std::size_t cols = k % 5 == 0 ? 5 : k;
  const std::size_t rows = k / cols;
  std::vector<std::string> captions;
  for (double t : payload.timestamps) captions.push_back(timestamp_caption(t));
  payload.pngs.push_back(montage(panels, rows, cols, captions).png);
  return payload;
}

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string image_mime(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "image/png";
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

PayloadCache::PayloadCache(const DatasetManifest& manifest, PipelineOptions options)
    : manifest_(manifest), options_(options) {}

std::vector<ModalityDescriptor> PayloadCache::build(std::size_t index, Modality m) {
  const SampleRecord& s = manifest_.samples.at(index);
  auto missing = [&](const char* what) {
    return IoError("sample '" + s.id + "' declares no " + std::string(what) + " file");
  };
  switch (m) {
    case Modality::Eeg: {
      if (s.eeg_csv.empty()) throw missing("EEG");
      const auto sfreq = s.sfreq ? s.sfreq : manifest_.default_sfreq;
      if (!sfreq) throw ParameterError("sample '" + s.id + "' has no sampling rate");
      const EegRecording rec = read_eeg_csv(manifest_.resolve(s.eeg_csv), *sfreq);
      EegPayload payload = build_eeg_payload(rec, s.window.value_or(manifest_.default_window), options_);
      auto d = ModalityDescriptor::eeg_image(std::move(payload.pngs.front()));
      for (std::size_t i = 1; i < payload.pngs.size(); ++i) d.extra_images.push_back(std::move(payload.pngs[i]));
      return {std::move(d)};
    }
    case Modality::Face: {
      if (s.face_image.empty()) throw missing("face image");
      const auto path = manifest_.resolve(s.face_image);
      return {ModalityDescriptor::face_image(read_bytes(path), image_mime(path))};
    }
    case Modality::Audio: {
      if (s.audio_wav.empty()) throw missing("audio");
      std::vector<ModalityDescriptor> out;
      out.push_back(ModalityDescriptor::audio_features(textualize(extract_features(read_wav(manifest_.resolve(s.audio_wav))))));
      if (manifest_.audio_has_transcript()) {
        if (s.transcript.empty()) throw missing("transcript");
        std::string text = load_transcript(manifest_.resolve(s.transcript));
        if (text.empty()) log_warning("sample '" + s.id + "' has an empty transcript");
        out.push_back(ModalityDescriptor::transcript(std::move(text)));
      }
      return out;
    }
  }
  return {};
}

std::vector<ModalityDescriptor> PayloadCache::descriptors(std::size_t sample, ModalitySet subset) {
  std::vector<ModalityDescriptor> out;
  for (Modality m : subset.members()) {
    std::shared_future<std::vector<ModalityDescriptor>> future;
    std::optional<std::promise<std::vector<ModalityDescriptor>>> owner;
    {
      std::lock_guard lock(mutex_);
      auto key = std::make_pair(sample, m);
      auto it = entries_.find(key);
      if (it == entries_.end()) {
        owner.emplace();
        future = owner->get_future().share();
        entries_.emplace(key, future);
      } else {
        future = it->second;
      }
    }
    if (owner) {
      try {
        owner->set_value(build(sample, m));
      } catch (...) {
        owner->set_exception(std::current_exception());
      }
    }
    const auto& part = future.get();
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) throw ParameterError("cannot draw " + std::to_string(count) + " of " + std::to_string(n));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

TrialResult run_trial(const TrialConfig& config, const DatasetManifest& manifest, Gateway& gateway,
                      PayloadCache& cache, std::size_t trial_index) {
  config.validate();
  const std::size_t n = manifest.samples.size();
  TrialResult result;
  result.trial = trial_index;
  result.seed = config.seed + trial_index;

  // Payloads for every sample first: shots may only come from usable samples.
  std::vector<std::optional<std::vector<ModalityDescriptor>>> payloads(n);
  std::vector<std::string> failures(n);
  parallel_for(n, config.workers, [&](std::size_t i) {
    try {
      payloads[i] = cache.descriptors(i, config.modalities);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (!payloads[i] && config.strict)
      throw IoError("sample '" + manifest.samples[i].id + "': " + failures[i]);

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < n; ++i)
    if (payloads[i]) usable.push_back(i);

  std::vector<bool> is_shot(n, false);
  std::vector<ShotExample> shots;
  if (config.strategy == Strategy::FewShot) {
    if (usable.size() <= config.shots)
      throw ConfigError("few-shot prompting with M=" + std::to_string(config.shots) + " needs more than M usable samples (have " +
                        std::to_string(usable.size()) + ")");
    for (std::size_t pick : draw_without_replacement(usable.size(), config.shots, result.seed)) {
      const std::size_t i = usable[pick];
      is_shot[i] = true;
      result.shot_ids.push_back(manifest.samples[i].id);
      shots.push_back({*payloads[i], manifest.samples[i].label});
    }
  }

  std::vector<std::size_t> tested;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_shot[i]) continue;
    if (!payloads[i]) {
      log_warning("skipping sample '" + manifest.samples[i].id + "': " + failures[i]);
      result.skipped.push_back({manifest.samples[i].id, failures[i]});
      continue;
    }
    tested.push_back(i);
  }

  std::vector<SampleVerdict> verdicts(tested.size());
  const std::size_t workers = gateway.sequential() ? 1 : config.workers;
  parallel_for(tested.size(), workers, [&](std::size_t t) {
    const std::size_t i = tested[t];
    const SampleRecord& s = manifest.samples[i];
    AssembledPrompt prompt = build_zero_shot(*payloads[i], manifest.task, config.prompt);
    if (config.strategy == Strategy::FewShot) prompt = build_few_shot(prompt, shots, manifest.task);
    GatewayRequest request{s.id, &prompt, &manifest.task, s.label};
    verdicts[t] = {s.id, s.label, query(gateway, request), prompt.checksum()};
  });

  for (const auto& v : verdicts) {
    if (v.correct())
      ++result.correct;
    else
      ++result.incorrect;
    if (!v.verdict.valid()) ++result.invalid;
    if (!v.verdict.error.empty()) ++result.transport_errors;
  }
  result.verdicts = std::move(verdicts);
  const std::size_t n_tested = result.correct + result.incorrect;
  if (n_tested == 0) log_warning("trial " + std::to_string(trial_index) + " tested no samples");
  result.accuracy = n_tested ? 100.0 * static_cast<double>(result.correct) / static_cast<double>(n_tested) : 0.0;
  return result;
}

CellStats run_experiment(const TrialConfig& config, const DatasetManifest& manifest, Gateway& gateway,
                         PayloadCache& cache, const TrialObserver& observer) {
  config.validate();
  CellStats cell;
  cell.strategy = config.strategy;
  cell.modalities = config.modalities;
  for (std::size_t t = 0; t < config.repeats; ++t) {
    TrialResult trial = run_trial(config, manifest, gateway, cache, t);
    cell.trial_accuracies.push_back(trial.accuracy);
    cell.invalid += trial.invalid;
    cell.skipped += trial.skipped.size();
    cell.transport_errors += trial.transport_errors;
    if (observer) observer(config, trial);
  }
  const double k = static_cast<double>(cell.trial_accuracies.size());
  cell.mean = std::accumulate(cell.trial_accuracies.begin(), cell.trial_accuracies.end(), 0.0) / k;
  double ss = 0.0;
  for (double a : cell.trial_accuracies) ss += (a - cell.mean) * (a - cell.mean);
  cell.std = std::sqrt(ss / k);
  return cell;
}

CellStats run_experiment(const TrialConfig& config, const DatasetManifest& manifest, Gateway& gateway) {
  PayloadCache cache(manifest, config.pipeline);
  return run_experiment(config, manifest, gateway, cache);
}

int majority_label(const std::vector<int>& labels) {
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  int best = 0;
  std::size_t best_count = 0;
  for (const auto& [label, count] : counts)  // ascending label order
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  return best;
}

double majority_vote_baseline(const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  const int label = majority_label(labels);
  const auto count = std::count(labels.begin(), labels.end(), label);
  return 100.0 * static_cast<double>(count) / static_cast<double>(labels.size());
}

double majority_vote_baseline(const DatasetManifest& manifest) {
  std::vector<int> labels;
  for (const auto& s : manifest.samples) labels.push_back(s.label);
  return majority_vote_baseline(labels);
}

const CellStats* RunReport::find(Strategy s, ModalitySet m) const {
  for (const auto& c : cells)
    if (c.strategy == s && c.modalities == m) return &c;
  return nullptr;
}

RunReport ablation_grid(const DatasetManifest& manifest, const std::vector<Strategy>& strategies,
                        const std::vector<ModalitySet>& subsets, const TrialConfig& base, Gateway& gateway,
                        const TrialObserver& observer) {
  manifest.validate();
  RunReport report;
  report.dataset = manifest.name;
  report.n_samples = manifest.samples.size();
  report.n_classes = manifest.task.size();
  report.available = manifest.modalities;
  report.baseline = majority_vote_baseline(manifest);
  report.strategies = strategies;
  report.shots = base.shots;

  PayloadCache cache(manifest, base.pipeline);
  for (Strategy strategy : strategies) {
    for (ModalitySet subset : subsets) {
      if (subset.empty()) throw ConfigError("cannot evaluate an empty modality subset");
      if (!subset.subset_of(manifest.modalities))
        throw ConfigError("manifest " + manifest.name + " does not provide " + subset.str());
      TrialConfig config = base;
      config.strategy = strategy;
      config.modalities = subset;
      log_info("running " + to_string(strategy) + " with " + subset.str());
      report.cells.push_back(run_experiment(config, manifest, gateway, cache, observer));
    }
  }
  return report;
}

RunReport ablation_grid(const DatasetManifest& manifest, const std::vector<Strategy>& strategies,
                        const TrialConfig& base, Gateway& gateway, const TrialObserver& observer) {
  const ModalitySet pool = base.modalities.empty()
                               ? manifest.modalities
                               : ModalitySet::from_bits(base.modalities.bits() & manifest.modalities.bits());
  return ablation_grid(manifest, strategies, pool.nonempty_subsets(), base, gateway, observer);
}

json to_json(const RunReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"strategy", to_string(c.strategy)},
                     {"modalities", c.modalities.str()},
                     {"mean", c.mean},
                     {"std", c.std},
                     {"trials", c.trial_accuracies},
                     {"invalid", c.invalid},
                     {"skipped", c.skipped},
                     {"transport_errors", c.transport_errors}});
  json strategies = json::array();
  for (Strategy s : r.strategies) strategies.push_back(to_string(s));
  return {{"dataset", r.dataset},  {"n_samples", r.n_samples}, {"n_classes", r.n_classes},
          {"available", r.available.str()}, {"baseline", r.baseline}, {"shots", r.shots},
          {"strategies", strategies}, {"cells", cells}};
}

namespace {
ModalitySet parse_plus_set(const std::string& s) {
  if (s == "none") return {};
  std::string csv = s;
  std::replace(csv.begin(), csv.end(), '+', ',');
  return ModalitySet::parse(csv);
}
}  // namespace

RunReport report_from_json(const json& j) {
  try {
    RunReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.n_classes = j.at("n_classes").get<std::size_t>();
    r.available = parse_plus_set(j.at("available").get<std::string>());
    r.baseline = j.at("baseline").get<double>();
    r.shots = j.value("shots", std::size_t{1});
    for (const auto& s : j.at("strategies")) r.strategies.push_back(parse_strategy(s.get<std::string>()));
    for (const auto& c : j.at("cells")) {
      CellStats cell;
      cell.strategy = parse_strategy(c.at("strategy").get<std::string>());
      cell.modalities = parse_plus_set(c.at("modalities").get<std::string>());
      cell.mean = c.at("mean").get<double>();
      cell.std = c.at("std").get<double>();
      cell.trial_accuracies = c.at("trials").get<std::vector<double>>();
      cell.invalid = c.value("invalid", std::size_t{0});
      cell.skipped = c.value("skipped", std::size_t{0});
      cell.transport_errors = c.value("transport_errors", std::size_t{0});
      r.cells.push_back(std::move(cell));
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "md" || s == "markdown") return ReportFormat::Markdown;
  if (s == "csv") return ReportFormat::Csv;
  throw ConfigError("unknown report format '" + s + "' (expected md or csv)");
}

std::string format_cell(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f\xC2\xB1%.2f", mean, std);
  return buf;
}

namespace {

std::vector<ModalitySet> report_rows(const std::vector<RunReport>& reports) {
  std::set<unsigned> bits;
  for (const auto& r : reports)
    for (const auto& c : r.cells) bits.insert(c.modalities.bits());
  std::vector<ModalitySet> rows;
  for (ModalitySet s : ModalitySet::from_bits(7).nonempty_subsets())
    if (bits.count(s.bits())) rows.push_back(s);
  return rows;
}

std::vector<Strategy> report_strategies(const std::vector<RunReport>& reports) {
  std::vector<Strategy> out;
  for (Strategy s : {Strategy::ZeroShot, Strategy::FewShot})
    for (const auto& r : reports)
      if (std::find(r.strategies.begin(), r.strategies.end(), s) != r.strategies.end()) {
        out.push_back(s);
        break;
      }
  return out;
}

std::string strategy_label(Strategy s, std::size_t shots) {
  return s == Strategy::ZeroShot ? "Zero-shot" : "Few-shot (M=" + std::to_string(shots) + ")";
}

const char* mark(bool on) { return on ? "\xE2\x9C\x93" : "\xC3\x97"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string join_trials(const std::vector<double>& v) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f", v[i]);
    out += (i ? ";" : "") + std::string(buf);
  }
  return out;
}

}  // namespace

std::string emit_report(const std::vector<RunReport>& reports, ReportFormat format) {
  const auto rows = report_rows(reports);
  const auto strategies = report_strategies(reports);
  const std::size_t shots = reports.empty() ? 1 : reports.front().shots;
  std::ostringstream out;

  if (format == ReportFormat::Csv) {
    out << "strategy,shots,eeg,face,audio,dataset,mean,std,trials,invalid,skipped\n";
    for (Strategy s : strategies) {
      const std::string sname = to_string(s);
      const std::string m = s == Strategy::FewShot ? std::to_string(shots) : "0";
      for (const auto& r : reports) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", r.baseline);
        out << sname << ',' << m << ",0,0,0," << csv_field(r.dataset) << ',' << buf << ",0.00,,0,0\n";
      }
      for (ModalitySet row : rows)
        for (const auto& r : reports) {
          out << sname << ',' << m << ',' << row.contains(Modality::Eeg) << ',' << row.contains(Modality::Face) << ','
              << row.contains(Modality::Audio) << ',' << csv_field(r.dataset) << ',';
          if (const CellStats* c = r.find(s, row)) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.2f,%.2f", c->mean, c->std);
            out << buf << ',' << join_trials(c->trial_accuracies) << ',' << c->invalid << ',' << c->skipped << '\n';
          } else {
            out << "--,--,,,\n";
          }
        }
    }
    return out.str();
  }

  out << "| Strategy | EEG | Facial Expression | Audio |";
  for (const auto& r : reports) out << ' ' << r.dataset << " |";
  out << "\n|---|---|---|---|";
  for (std::size_t i = 0; i < reports.size(); ++i) out << "---|";
  out << '\n';
  if (strategies.empty()) {
    out << "| Majority vote | " << mark(false) << " | " << mark(false) << " | " << mark(false) << " |";
    for (const auto& r : reports) out << ' ' << format_cell(r.baseline, 0.0) << " |";
    out << '\n';
  }
  for (Strategy s : strategies) {
    const std::string label = strategy_label(s, shots);
    // Best evaluated mean per dataset column.
    std::vector<double> best(reports.size(), -1.0);
    for (std::size_t k = 0; k < reports.size(); ++k)
      for (const auto& c : reports[k].cells)
        if (c.strategy == s) best[k] = std::max(best[k], c.mean);

    out << "| " << label << " | " << mark(false) << " | " << mark(false) << " | " << mark(false) << " |";
    for (const auto& r : reports) out << ' ' << format_cell(r.baseline, 0.0) << " |";
    out << '\n';
    for (ModalitySet row : rows) {
      out << "| " << label << " | " << mark(row.contains(Modality::Eeg)) << " | " << mark(row.contains(Modality::Face))
          << " | " << mark(row.contains(Modality::Audio)) << " |";
      for (std::size_t k = 0; k < reports.size(); ++k) {
        const CellStats* c = reports[k].find(s, row);
        if (!c) {
          out << " -- |";
          continue;
        }
        const std::string cell = format_cell(c->mean, c->std);
        out << ' ' << (c->mean == best[k] ? "**" + cell + "**" : cell) << " |";
      }
      out << '\n';
    }
  }
  return out.str();
}

json to_json(const SampleVerdict& v) {
  json j = {{"sample_id", v.sample_id},
            {"truth", v.truth},
            {"label", v.verdict.label ? json(*v.verdict.label) : json(nullptr)},
            {"correct", v.correct()},
            {"raw", v.verdict.raw_text},
            {"explanation", v.verdict.explanation},
            {"prompt_checksum", v.prompt_checksum}};
  if (!v.verdict.error.empty()) j["error"] = v.verdict.error;
  return j;
}

json to_json(const TrialResult& t) {
  json skipped = json::array();
  for (const auto& s : t.skipped) skipped.push_back({{"sample_id", s.sample_id}, {"reason", s.reason}});
  return {{"trial", t.trial},         {"seed", t.seed},           {"shot_ids", t.shot_ids},
          {"correct", t.correct},     {"incorrect", t.incorrect}, {"invalid", t.invalid},
          {"skipped", skipped},       {"accuracy", t.accuracy},   {"transport_errors", t.transport_errors}};
}

}  // namespace eegprompt
