#include "eegprompt/audio.hpp"

#include "eegprompt/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

namespace eegprompt {

namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | p[1] << 8); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

AudioClip parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ParseError("not a RIFF/WAVE stream");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::span<const std::uint8_t> data;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw ParseError("truncated fmt chunk");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      if (format == 0xFFFE && avail >= 26) format = le16(bytes.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.subspan(body, avail);
      have_data = true;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || !have_data) throw ParseError("WAV stream lacks fmt or data chunk");
  if (channels == 0 || rate == 0) throw ParseError("WAV header declares zero channels or rate");
  const bool pcm = format == 1 && (bits == 16 || bits == 24 || bits == 32);
  const bool flt = format == 3 && bits == 32;
  if (!pcm && !flt)
    throw ParseError("unsupported WAV encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
                     " bits)");

  const std::size_t width = bits / 8;
  const std::size_t frame = width * channels;
  const std::size_t n = data.size() / frame;
  AudioClip clip;
  clip.sfreq = rate;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data.data() + i * frame + c * width;
      double v = 0.0;
      if (flt) {
        float f;
        std::uint32_t raw = le32(p);
        std::memcpy(&f, &raw, sizeof f);
        v = f;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = p[0] | p[1] << 8 | p[2] << 16;
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(le32(p)) / 2147483648.0;
      }
      acc += v;
    }
    clip.samples[i] = acc / channels;
  }
  if (clip.samples.empty()) throw ParseError("WAV stream has no samples");
  for (double v : clip.samples)
    if (!std::isfinite(v)) throw ParseError("WAV stream contains non-finite samples");
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_wav(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  std::vector<std::uint8_t> out;
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto put16 = [&](std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sfreq));
  const auto data_size = static_cast<std::uint32_t>(2 * clip.samples.size());
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(16);
  put16(1);
  put16(1);
  put32(rate);
  put32(rate * 2);
  put16(2);
  put16(16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(data_size);
  for (double v : clip.samples) {
    const auto s = static_cast<std::int16_t>(std::lround(std::clamp(v, -1.0, 32767.0 / 32768.0) * 32768.0));
    put16(static_cast<std::uint16_t>(s));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

namespace {

// FFTW planning is not thread-safe; execution on a private plan is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double magnitude(std::size_t k) const { return std::hypot(out_[k][0], out_[k][1]); }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

SpectralFrames stft(const AudioClip& clip, std::size_t n_fft, std::size_t hop) {
  if (n_fft < 2 || hop == 0) throw ParameterError("n_fft must be >= 2 and hop >= 1");
  if (clip.samples.size() < n_fft)
    throw ParameterError("clip has " + std::to_string(clip.samples.size()) + " samples, shorter than one " +
                         std::to_string(n_fft) + "-sample frame");
  const std::size_t n_frames = 1 + (clip.samples.size() - n_fft) / hop;
  const std::size_t n_bins = n_fft / 2 + 1;
  std::vector<double> window(n_fft);
  for (std::size_t i = 0; i < n_fft; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_fft));

  SpectralFrames frames{n_fft, hop, Matrix(n_frames, n_bins)};
  RealFft fft(n_fft);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const double* src = clip.samples.data() + f * hop;
    double* in = fft.input();
    for (std::size_t i = 0; i < n_fft; ++i) in[i] = src[i] * window[i];
    fft.execute();
    for (std::size_t k = 0; k < n_bins; ++k) frames.magnitudes(f, k) = fft.magnitude(k);
  }
  return frames;
}

namespace {
constexpr double kMelLinearSlope = 200.0 / 3.0;  // Hz per mel below 1 kHz
constexpr double kMelBreakHz = 1000.0;
constexpr double kMelBreak = kMelBreakHz / kMelLinearSlope;
const double kMelLogStep = std::log(6.4) / 27.0;
}  // namespace

double hz_to_mel(double hz) {
  if (hz < kMelBreakHz) return hz / kMelLinearSlope;
  return kMelBreak + std::log(hz / kMelBreakHz) / kMelLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMelBreak) return mel * kMelLinearSlope;
  return kMelBreakHz * std::exp(kMelLogStep * (mel - kMelBreak));
}

Matrix mel_filterbank(double sfreq, std::size_t n_fft, std::size_t n_mels, double fmin, double fmax) {
  if (fmax <= 0.0) fmax = sfreq / 2.0;
  if (fmax > sfreq / 2.0 + 1e-9) throw ParameterError("fmax exceeds the Nyquist frequency");
  if (!(fmin >= 0.0) || !(fmin < fmax)) throw ParameterError("mel band must satisfy 0 <= fmin < fmax");
  if (n_mels == 0) throw ParameterError("n_mels must be positive");
  const std::size_t n_bins = n_fft / 2 + 1;

  std::vector<double> edges(n_mels + 2);
  const double mel_lo = hz_to_mel(fmin), mel_hi = hz_to_mel(fmax);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  Matrix bank(n_mels, n_bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    const double norm = 2.0 / (hi - lo);
    bool any = false;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sfreq / static_cast<double>(n_fft);
      const double rising = (f - lo) / (centre - lo);
      const double falling = (hi - f) / (hi - centre);
      const double w = std::max(0.0, std::min(rising, falling));
      bank(m, k) = w * norm;
      any = any || w > 0.0;
    }
    if (!any)
      throw ParameterError("mel filter " + std::to_string(m) + " covers no FFT bin; reduce n_mels or raise n_fft");
  }
  return bank;
}

Matrix mel_spectrogram(const SpectralFrames& frames, double sfreq, std::size_t n_mels, double fmin, double fmax) {
  const Matrix bank = mel_filterbank(sfreq, frames.n_fft, n_mels, fmin, fmax);
  Matrix mel(frames.n_frames(), n_mels);
  std::vector<double> power(frames.n_bins());
  for (std::size_t f = 0; f < frames.n_frames(); ++f) {
    for (std::size_t k = 0; k < frames.n_bins(); ++k) {
      const double m = frames.magnitudes(f, k);
      power[k] = m * m;
    }
    for (std::size_t m = 0; m < n_mels; ++m) {
      auto weights = bank.row(m);
      double acc = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) acc += weights[k] * power[k];
      mel(f, m) = acc;
    }
  }
  return mel;
}

std::vector<double> dct2_ortho(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  const double base = std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * std::cos(base * (static_cast<double>(i) + 0.5) * static_cast<double>(k));
    out[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return out;
}

std::vector<double> idct2_ortho(std::span<const double> coeffs) {
  const std::size_t n = coeffs.size();
  std::vector<double> out(n);
  const double base = std::numbers::pi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = coeffs[0] * std::sqrt(1.0 / static_cast<double>(n));
    for (std::size_t k = 1; k < n; ++k)
      acc += coeffs[k] * std::sqrt(2.0 / static_cast<double>(n)) *
             std::cos(base * (static_cast<double>(i) + 0.5) * static_cast<double>(k));
    out[i] = acc;
  }
  return out;
}

Matrix mfcc(const Matrix& mel, std::size_t n_mfcc) {
  if (n_mfcc > mel.cols()) throw ParameterError("n_mfcc exceeds the number of mel bands");
  Matrix out(mel.rows(), n_mfcc);
  std::vector<double> logmel(mel.cols());
  for (std::size_t f = 0; f < mel.rows(); ++f) {
    auto row = mel.row(f);
    for (std::size_t m = 0; m < row.size(); ++m) {
      if (row[m] < 0.0) throw ParameterError("mel energies must be non-negative");
      logmel[m] = std::log(row[m] + kLogFloor);
    }
    const auto c = dct2_ortho(logmel);
    std::copy_n(c.begin(), n_mfcc, out.row(f).begin());
  }
  return out;
}

int pitch_class(double hz) {
  const auto semis = static_cast<long>(std::lround(12.0 * std::log2(hz / 440.0)));
  return static_cast<int>(((semis + 9) % 12 + 12) % 12);
}

Matrix chroma_stft(const SpectralFrames& frames, double sfreq) {
  Matrix chroma(12, frames.n_frames());
  std::vector<int> classes(frames.n_bins(), -1);
  for (std::size_t k = 1; k < frames.n_bins(); ++k)
    classes[k] = pitch_class(static_cast<double>(k) * sfreq / static_cast<double>(frames.n_fft));
  for (std::size_t f = 0; f < frames.n_frames(); ++f) {
    std::array<double, 12> acc{};
    for (std::size_t k = 1; k < frames.n_bins(); ++k) {
      const double m = frames.magnitudes(f, k);
      acc[static_cast<std::size_t>(classes[k])] += m * m;
    }
    const double peak = *std::max_element(acc.begin(), acc.end());
    for (std::size_t c = 0; c < 12; ++c) chroma(c, f) = peak > 0.0 ? acc[c] / peak : 0.0;
  }
  return chroma;
}

namespace {

void mean_std(const Matrix& m, bool by_rows, std::vector<double>& mean, std::vector<double>& sd) {
  // by_rows: statistics per row across columns; otherwise per column.
  const std::size_t dims = by_rows ? m.rows() : m.cols();
  const std::size_t count = by_rows ? m.cols() : m.rows();
  if (count == 0) throw ParameterError("cannot summarize zero frames");
  mean.assign(dims, 0.0);
  sd.assign(dims, 0.0);
  for (std::size_t d = 0; d < dims; ++d) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += by_rows ? m(d, i) : m(i, d);
    const double mu = s / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double e = (by_rows ? m(d, i) : m(i, d)) - mu;
      ss += e * e;
    }
    mean[d] = mu;
    sd[d] = std::sqrt(ss / static_cast<double>(count));
  }
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string join_fixed(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += fixed4(values[i]);
  }
  return out;
}

}  // namespace

FeatureSummary summarize(const Matrix& mfcc_m, const Matrix& mel, const Matrix& chroma) {
  if (chroma.rows() != 12) throw ParameterError("chroma must have 12 rows");
  FeatureSummary s;
  mean_std(mfcc_m, false, s.mfcc_mean, s.mfcc_std);
  mean_std(mel, false, s.mel_mean, s.mel_std);
  std::vector<double> cm, cs;
  mean_std(chroma, true, cm, cs);
  std::copy(cm.begin(), cm.end(), s.chroma_mean.begin());
  return s;
}

std::string textualize(const FeatureSummary& s) {
  std::string out;
  out += "MFCC mean: " + join_fixed(s.mfcc_mean) + "\n";
  out += "MFCC std: " + join_fixed(s.mfcc_std) + "\n";
  out += "Mel spectrogram mean: " + join_fixed(s.mel_mean) + "\n";
  out += "Mel spectrogram std: " + join_fixed(s.mel_std) + "\n";
  out += "Chroma STFT mean: ";
  for (std::size_t c = 0; c < 12; ++c) {
    if (c) out += ", ";
    out += std::string(kPitchNames[c]) + "=" + fixed4(s.chroma_mean[c]);
  }
  return out;
}

FeatureSummary extract_features(const AudioClip& clip, const FeatureOptions& options) {
  const SpectralFrames frames = stft(clip, options.n_fft, options.hop);
  const Matrix mel = mel_spectrogram(frames, clip.sfreq, options.n_mels);
  return summarize(mfcc(mel, options.n_mfcc), mel, chroma_stft(frames, clip.sfreq));
}

std::string load_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("transcript not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!text.empty() && is_space(text.back())) text.pop_back();
  std::size_t lead = 0;
  while (lead < text.size() && is_space(text[lead])) ++lead;
  return text.substr(lead);
}

}  // namespace eegprompt
