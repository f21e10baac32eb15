#pragma once

#include "eegprompt/signal.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace eegprompt {

struct AudioClip {
  double sfreq = 0.0;
  std::vector<double> samples;  // mono, [-1, 1]
};

// PCM 16/24-bit integer or 32-bit float, mono or multichannel. Channels are
// averaged.
AudioClip read_wav(const std::filesystem::path& path);
AudioClip parse_wav(std::span<const std::uint8_t> bytes);
// 16-bit PCM mono.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

struct SpectralFrames {
  std::size_t n_fft = 0;
  std::size_t hop = 0;
  Matrix magnitudes;  // n_frames x (n_fft / 2 + 1)

  std::size_t n_frames() const { return magnitudes.rows(); }
  std::size_t n_bins() const { return magnitudes.cols(); }
};

// Periodic Hann window, no centring or padding:
// 1 + floor((len - n_fft) / hop) frames.
SpectralFrames stft(const AudioClip& clip, std::size_t n_fft = 2048, std::size_t hop = 512);

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters with Slaney area normalization, n_mels x n_bins.
// fmax <= 0 selects sfreq / 2. Throws if a filter covers no FFT bin.
Matrix mel_filterbank(double sfreq, std::size_t n_fft, std::size_t n_mels = 128, double fmin = 0.0, double fmax = 0.0);

// Filterbank applied to the power spectra; result is n_frames x n_mels.
Matrix mel_spectrogram(const SpectralFrames& frames, double sfreq, std::size_t n_mels = 128, double fmin = 0.0,
                       double fmax = 0.0);

inline constexpr double kLogFloor = 1e-10;

// Orthonormal DCT-II of log(mel + kLogFloor), first n_mfcc coefficients.
// Result is n_frames x n_mfcc.
Matrix mfcc(const Matrix& mel, std::size_t n_mfcc = 13);

// Orthonormal DCT-II and its inverse (DCT-III) of one vector.
std::vector<double> dct2_ortho(std::span<const double> x);
std::vector<double> idct2_ortho(std::span<const double> coeffs);

// Pitch class of a frequency, 0 = C ... 11 = B, A4 = 440 Hz.
int pitch_class(double hz);

// Power folded into 12 pitch classes, each frame scaled to a maximum of 1
// (all-zero frames stay zero). Result is 12 x n_frames.
Matrix chroma_stft(const SpectralFrames& frames, double sfreq);

struct FeatureSummary {
  std::vector<double> mfcc_mean, mfcc_std;
  std::vector<double> mel_mean, mel_std;
  std::array<double, 12> chroma_mean{};
};

inline constexpr std::array<const char*, 12> kPitchNames = {"C", "C#", "D", "D#", "E", "F",
                                                            "F#", "G", "G#", "A", "A#", "B"};

// Per-dimension mean and population standard deviation across frames.
// mfcc and mel are frames x dims, chroma is 12 x frames.
FeatureSummary summarize(const Matrix& mfcc, const Matrix& mel, const Matrix& chroma);
std::string textualize(const FeatureSummary& summary);

struct FeatureOptions {
  std::size_t n_fft = 2048;
  std::size_t hop = 512;
  std::size_t n_mels = 128;
  std::size_t n_mfcc = 13;
};

FeatureSummary extract_features(const AudioClip& clip, const FeatureOptions& options = {});

// Trimmed UTF-8 transcript. An empty file yields an empty string.
std::string load_transcript(const std::filesystem::path& path);

}  // namespace eegprompt
