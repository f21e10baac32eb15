#pragma once

#include "eegprompt/gateway.hpp"
#include "eegprompt/prompt.hpp"
#include "eegprompt/signal.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace eegprompt {

// Dataset-level modalities, in table column order.
enum class Modality { Eeg = 0, Face = 1, Audio = 2 };

std::string to_string(Modality m);
Modality parse_modality(const std::string& s);

// Small ordered set of modalities.
class ModalitySet {
 public:
  ModalitySet() = default;
  ModalitySet(std::initializer_list<Modality> ms);

  static ModalitySet from_bits(unsigned bits) { ModalitySet s; s.bits_ = bits & 7u; return s; }
  // "eeg,audio"
  static ModalitySet parse(const std::string& csv);

  bool contains(Modality m) const { return bits_ & (1u << static_cast<unsigned>(m)); }
  void insert(Modality m) { bits_ |= 1u << static_cast<unsigned>(m); }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const;
  unsigned bits() const { return bits_; }
  bool subset_of(ModalitySet other) const { return (bits_ & ~other.bits_) == 0; }
  std::vector<Modality> members() const;
  std::string str() const;  // "eeg+audio", "none" when empty

  // Non-empty subsets ordered by size, then column order.
  std::vector<ModalitySet> nonempty_subsets() const;

  bool operator==(const ModalitySet&) const = default;
  auto operator<=>(const ModalitySet&) const = default;

 private:
  unsigned bits_ = 0;
};

struct SampleRecord {
  std::string id;
  int label = 0;
  std::filesystem::path eeg_csv;
  std::optional<double> sfreq;
  std::optional<TimeWindow> window;
  std::filesystem::path face_image;
  std::filesystem::path audio_wav;
  std::filesystem::path transcript;

  bool declares(Modality m) const;
};

struct DatasetManifest {
  std::string name;
  TaskSpec task;
  std::vector<SampleRecord> samples;
  TimeWindow default_window{0.0, 5.0};
  std::optional<double> default_sfreq;
  ModalitySet modalities;
  std::filesystem::path base_dir;  // relative sample paths resolve here

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  // Audio prompts carry a transcript when any sample declares one.
  bool audio_has_transcript() const;
  // >= 2 samples, unique ids, valid labels, every sample declares at least
  // one modality. Throws ConfigError.
  void validate() const;
};

// JSON lines: a header object, then one sample object per line.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

enum class Strategy { ZeroShot, FewShot };
std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct PipelineOptions {
  FilterSpec filter{0.1, 45.0, 0};
  std::size_t snapshots = 10;
  std::size_t grid = 64;
  // Attach one image per timestamp instead of one 2x5 montage.
  bool per_timestamp_images = false;
};

struct TrialConfig {
  Strategy strategy = Strategy::ZeroShot;
  std::size_t shots = 1;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  ModalitySet modalities;
  bool strict = false;
  std::size_t workers = 4;
  PromptOptions prompt;
  PipelineOptions pipeline;

  // Throws ConfigError.
  void validate() const;
};

// EEG montage for one sample: filter, average reference, elicitation window,
// equidistant snapshots, panels.
struct EegPayload {
  std::vector<double> timestamps;
  std::vector<std::vector<std::uint8_t>> pngs;  // one montage, or one per timestamp
};
EegPayload build_eeg_payload(const EegRecording& recording, const TimeWindow& window, const PipelineOptions& options);

// Descriptors for a sample under a modality subset, computed once per
// (sample, modality) and shared between threads. Failures are cached too.
class PayloadCache {
 public:
  PayloadCache(const DatasetManifest& manifest, PipelineOptions options);

  // Throws IoError/ParseError/ParameterError when a file is missing or bad.
  std::vector<ModalityDescriptor> descriptors(std::size_t sample, ModalitySet subset);

 private:
  std::vector<ModalityDescriptor> build(std::size_t sample, Modality m);

  const DatasetManifest& manifest_;
  PipelineOptions options_;
  std::mutex mutex_;
  std::map<std::pair<std::size_t, Modality>, std::shared_future<std::vector<ModalityDescriptor>>> entries_;
};

struct SampleVerdict {
  std::string sample_id;
  int truth = 0;
  Verdict verdict;
  std::uint64_t prompt_checksum = 0;
  bool correct() const { return verdict.label && *verdict.label == truth; }
};

struct SkippedSample {
  std::string sample_id;
  std::string reason;
};

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> shot_ids;
  std::vector<SampleVerdict> verdicts;  // manifest order
  std::vector<SkippedSample> skipped;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::size_t invalid = 0;
  std::size_t transport_errors = 0;
  double accuracy = 0.0;  // percent of tested samples
};

// Uniform draw of `count` of `n` indices without replacement; identical
// across platforms for a given seed.
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t count, std::uint64_t seed);

TrialResult run_trial(const TrialConfig& config, const DatasetManifest& manifest, Gateway& gateway,
                      PayloadCache& cache, std::size_t trial_index);

struct CellStats {
  Strategy strategy = Strategy::ZeroShot;
  ModalitySet modalities;
  double mean = 0.0;
  double std = 0.0;  // population
  std::vector<double> trial_accuracies;
  std::size_t invalid = 0;
  std::size_t skipped = 0;
  std::size_t transport_errors = 0;
};

using TrialObserver = std::function<void(const TrialConfig&, const TrialResult&)>;

// `repeats` trials with seeds seed + i; mean and population std.
CellStats run_experiment(const TrialConfig& config, const DatasetManifest& manifest, Gateway& gateway,
                         PayloadCache& cache, const TrialObserver& observer = {});
CellStats run_experiment(const TrialConfig& config, const DatasetManifest& manifest, Gateway& gateway);

// 100 * (count of most frequent label) / N.
double majority_vote_baseline(const DatasetManifest& manifest);
double majority_vote_baseline(const std::vector<int>& labels);
// Most frequent label, ties toward the lowest index.
int majority_label(const std::vector<int>& labels);

struct RunReport {
  std::string dataset;
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;
  ModalitySet available;
  double baseline = 0.0;
  std::size_t shots = 1;  // M of the few-shot cells
  std::vector<Strategy> strategies;
  std::vector<CellStats> cells;  // evaluated subsets only

  const CellStats* find(Strategy s, ModalitySet m) const;
};

// Every non-empty subset of base.modalities (all manifest modalities when
// empty) under each strategy.
RunReport ablation_grid(const DatasetManifest& manifest, const std::vector<Strategy>& strategies,
                        const TrialConfig& base, Gateway& gateway, const TrialObserver& observer = {});
// Explicit subsets, evaluated in the given order.
RunReport ablation_grid(const DatasetManifest& manifest, const std::vector<Strategy>& strategies,
                        const std::vector<ModalitySet>& subsets, const TrialConfig& base, Gateway& gateway,
                        const TrialObserver& observer = {});

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

enum class ReportFormat { Markdown, Csv };
ReportFormat parse_report_format(const std::string& s);

// Table layout: per strategy, the baseline row and then every subset
// evaluated in any report; one accuracy column per report. Cells a report
// did not evaluate print "--".
std::string emit_report(const std::vector<RunReport>& reports, ReportFormat format);

// "mean±std" with 2 decimals.
std::string format_cell(double mean, double std);

nlohmann::json to_json(const TrialResult& trial);
nlohmann::json to_json(const SampleVerdict& verdict);

}  // namespace eegprompt
