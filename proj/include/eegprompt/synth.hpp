#pragma once

#include "eegprompt/harness.hpp"

#include <cstdint>
#include <filesystem>

namespace eegprompt {

struct SynthOptions {
  std::size_t classes = 3;
  std::size_t samples = 30;
  std::uint64_t seed = 0;
  double eeg_sfreq = 128.0;
  double eeg_duration_s = 20.0;
  double audio_sfreq = 16000.0;
  double audio_duration_s = 1.0;
  bool transcripts = true;
};

// Task used for a class count: 2 is depression (healthy/MDD), 3 and 7 are the
// emotion label sets, anything else gets generic names.
TaskSpec synth_task(std::size_t classes);

// The 19 channels of the 10-20 layout written to every synthetic CSV.
const std::vector<std::string>& synth_channels();

// Writes EEG CSVs, WAVs, PNG faces, transcripts and manifest.jsonl under
// `dir`. Labels are assigned round-robin. Returns the manifest path.
std::filesystem::path write_synth_dataset(const std::filesystem::path& dir, const SynthOptions& options);

}  // namespace eegprompt
