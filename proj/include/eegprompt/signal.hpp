#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace eegprompt {

// Dense row-major matrix of doubles. Rows are samples, columns are channels
// when used for EEG.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Multichannel EEG in microvolts. data is n_samples x n_channels.
struct EegRecording {
  std::vector<std::string> channel_names;
  double sfreq = 0.0;
  Matrix data;

  std::size_t n_samples() const { return data.rows(); }
  std::size_t n_channels() const { return data.cols(); }
  double duration() const { return static_cast<double>(n_samples()) / sfreq; }

  // Throws ParameterError if the shape, sampling rate or sample values are
  // inconsistent.
  void validate() const;
};

struct FilterSpec {
  double f_low = 0.1;
  double f_high = 45.0;
  // Odd tap count. 0 means derive from the transition-width rule
  // (see default_tap_count).
  std::size_t n_taps = 0;
};

struct TimeWindow {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct SnapshotSet {
  std::vector<double> timestamps;
  Matrix values;  // k x n_channels
};

// Smallest odd integer >= 3.3 * sfreq / transition, with
// transition = min(2 Hz, 2 * f_low). The narrower low-edge transition keeps
// DC inside the stopband when f_low is a fraction of a hertz.
std::size_t default_tap_count(const FilterSpec& spec, double sfreq);

// Hamming-windowed band-pass built as the difference of two windowed-sinc
// low-pass kernels, scaled to unit gain at the band centre. Half amplitude
// at f_low and f_high.
std::vector<double> design_bandpass_fir(const FilterSpec& spec, double sfreq);

// Zero-phase application of a symmetric odd-length FIR: reflect-pads
// (n_taps - 1) / 2 samples on each side and compensates the group delay so
// the output is aligned with, and as long as, the input.
EegRecording apply_fir(const EegRecording& recording, std::span<const double> taps);

// Subtracts the instantaneous cross-channel mean from every channel.
EegRecording average_reference(const EegRecording& recording);

// Centred-bin sampling: t_i = start + (i + 0.5) * (end - start) / k.
std::vector<double> equidistant_timestamps(const TimeWindow& window, std::size_t k);

// Nearest-sample amplitudes (index round(t * sfreq)) at each timestamp.
SnapshotSet snapshot(const EegRecording& recording, std::span<const double> timestamps);

// CSV with a header of channel names and one numeric row per sample.
EegRecording read_eeg_csv(const std::filesystem::path& path, double sfreq);
EegRecording parse_eeg_csv(const std::string& text, double sfreq);
void write_eeg_csv(const std::filesystem::path& path, const EegRecording& recording);

}  // namespace eegprompt
