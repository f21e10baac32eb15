#include "eegprompt/synth.hpp"

#include "eegprompt/audio.hpp"
#include "eegprompt/error.hpp"
#include "eegprompt/png.hpp"
#include "eegprompt/topomap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace eegprompt {

namespace {

// Box-Muller on raw 53-bit draws; std::normal_distribution is not specified
// bit-for-bit across standard libraries.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

const char* const kSentences[] = {
    "I took the bus to work this morning and read the news on the way.",
    "We had rice and vegetables for dinner yesterday.",
    "The weather has been mild this week with a few clouds in the afternoon.",
    "I spent the weekend tidying the kitchen and answering letters.",
    "My neighbour asked me to water the plants while she is away.",
};

double class_frequency(int label, std::size_t classes) {
  return 4.0 + 32.0 * label / static_cast<double>(classes - 1);
}

EegRecording synth_eeg(int label, std::size_t classes, const SynthOptions& o, Gaussian& noise) {
  const auto& channels = synth_channels();
  const auto layout = ElectrodeLayout::standard();
  const auto n = static_cast<std::size_t>(std::llround(o.eeg_sfreq * o.eeg_duration_s));
  EegRecording rec{channels, o.eeg_sfreq, Matrix(n, channels.size())};
  const double f = class_frequency(label, classes);
  // The class also sets where on the scalp the rhythm is strongest.
  const double focus = 2.0 * std::numbers::pi * label / static_cast<double>(classes);
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const SpherePosition p = layout.position(channels[c]);
    const double gain = 10.0 * (1.0 + std::cos(p.azimuth - focus) * std::cos(p.elevation));
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / o.eeg_sfreq;
      rec.data(i, c) = gain * std::sin(2.0 * std::numbers::pi * f * t) + 2.0 * noise();
    }
  }
  return rec;
}

AudioClip synth_audio(int label, const SynthOptions& o, Gaussian& noise) {
  AudioClip clip;
  clip.sfreq = o.audio_sfreq;
  const double f = 220.0 * std::pow(2.0, label / 12.0);
  const auto n = static_cast<std::size_t>(std::llround(o.audio_sfreq * o.audio_duration_s));
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    clip.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / o.audio_sfreq) + 0.01 * noise();
  return clip;
}

Image synth_face(int label, std::size_t classes) {
  // Hue wheel, full saturation.
  const double h = 6.0 * label / static_cast<double>(classes);
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  double rgb[3] = {0, 0, 0};
  const int sector = static_cast<int>(h) % 6;
  const int order[6][3] = {{0, 1, 2}, {1, 0, 2}, {2, 0, 1}, {2, 1, 0}, {1, 2, 0}, {0, 2, 1}};
  rgb[order[sector][0]] = 1.0;
  rgb[order[sector][1]] = x;
  Image img;
  img.width = img.height = 64;
  img.rgb.resize(64 * 64 * 3);
  for (std::size_t i = 0; i < 64 * 64; ++i)
    for (int k = 0; k < 3; ++k) img.rgb[i * 3 + k] = static_cast<std::uint8_t>(std::lround(255.0 * rgb[k]));
  return img;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

const std::vector<std::string>& synth_channels() {
  static const std::vector<std::string> channels = {"Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T7", "C3", "Cz",
                                                    "C4",  "T8",  "P7", "P3", "Pz", "P4", "P8", "O1", "O2"};
  return channels;
}

TaskSpec synth_task(std::size_t classes) {
  TaskSpec task;
  std::vector<std::string> names;
  if (classes == 2) {
    task.symptom = "depression";
    names = {"healthy", "MDD"};
  } else if (classes == 3) {
    task.symptom = "emotion";
    names = {"neutral", "happy", "sad"};
  } else if (classes == 7) {
    task.symptom = "emotion";
    names = {"anger", "fear", "disgust", "sadness", "happiness", "surprise", "neutral"};
  } else {
    task.symptom = "mental";
    for (std::size_t i = 0; i < classes; ++i) names.push_back("class " + std::to_string(i));
  }
  for (std::size_t i = 0; i < names.size(); ++i) task.classes.push_back({static_cast<int>(i), names[i], {}});
  return task;
}

std::filesystem::path write_synth_dataset(const std::filesystem::path& dir, const SynthOptions& o) {
  if (o.classes < 2) throw ConfigError("synthetic datasets need at least 2 classes");
  if (o.samples < o.classes) throw ConfigError("synthetic datasets need at least one sample per class");

  std::error_code ec;
  for (const char* sub : {"eeg", "face", "audio", "transcript"}) {
    std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }

  DatasetManifest m;
  m.name = "synth-c" + std::to_string(o.classes);
  m.task = synth_task(o.classes);
  m.default_sfreq = o.eeg_sfreq;
  m.default_window = o.classes == 2 ? TimeWindow{1.65, 4.15} : TimeWindow{0.0, 5.0};
  m.modalities = {Modality::Eeg, Modality::Face, Modality::Audio};

  Gaussian noise(o.seed);
  std::vector<std::vector<std::uint8_t>> faces;
  for (std::size_t c = 0; c < o.classes; ++c) faces.push_back(encode_png(synth_face(static_cast<int>(c), o.classes)));

  const std::size_t width = std::max<std::size_t>(2, std::to_string(o.samples - 1).size());
  for (std::size_t i = 0; i < o.samples; ++i) {
    std::string id = std::to_string(i);
    id = "s" + std::string(width - id.size(), '0') + id;
    const int label = static_cast<int>(i % o.classes);

    SampleRecord s;
    s.id = id;
    s.label = label;
    s.eeg_csv = "eeg/" + id + ".csv";
    s.face_image = "face/" + id + ".png";
    s.audio_wav = "audio/" + id + ".wav";
    write_eeg_csv(dir / s.eeg_csv, synth_eeg(label, o.classes, o, noise));
    write_bytes(dir / s.face_image, faces[static_cast<std::size_t>(label)]);
    write_wav(dir / s.audio_wav, synth_audio(label, o, noise));
    if (o.transcripts) {
      s.transcript = "transcript/" + id + ".txt";
      write_text(dir / s.transcript, std::string(kSentences[i % std::size(kSentences)]) + "\n");
    }
    m.samples.push_back(std::move(s));
  }
  const auto path = dir / "manifest.jsonl";
  write_manifest(path, m);
  return path;
}

}  // namespace eegprompt
