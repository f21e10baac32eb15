#include "eegprompt/signal.hpp"

#include "eegprompt/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace eegprompt {

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
  return out;
}

void Matrix::set_column(std::size_t c, std::span<const double> values) {
  for (std::size_t r = 0; r < rows_; ++r) data_[r * cols_ + c] = values[r];
}

void EegRecording::validate() const {
  if (!(sfreq > 0.0) || !std::isfinite(sfreq))
    throw ParameterError("sampling rate must be positive, got " + std::to_string(sfreq));
  if (data.cols() != channel_names.size())
    throw ParameterError("recording has " + std::to_string(data.cols()) + " data columns but " +
                         std::to_string(channel_names.size()) + " channel names");
  for (double v : data.values())
    if (!std::isfinite(v)) throw ParameterError("recording contains non-finite samples");
}

namespace {

void check_band(const FilterSpec& spec, double sfreq) {
  if (!(sfreq > 0.0)) throw ParameterError("sampling rate must be positive");
  const double nyquist = sfreq / 2.0;
  if (!(spec.f_low > 0.0) || !(spec.f_low < spec.f_high))
    throw ParameterError("band edges must satisfy 0 < f_low < f_high");
  if (!(spec.f_high < nyquist))
    throw ParameterError("f_high " + std::to_string(spec.f_high) + " Hz is not below the Nyquist frequency " +
                         std::to_string(nyquist) + " Hz");
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

std::size_t default_tap_count(const FilterSpec& spec, double sfreq) {
  check_band(spec, sfreq);
  const double transition = std::min(2.0, 2.0 * spec.f_low);
  // Guard the ceiling against representation error (3.3 * 250 / 0.2 is 4125).
  auto n = static_cast<std::size_t>(std::ceil(3.3 * sfreq / transition - 1e-9));
  if (n % 2 == 0) ++n;
  return n;
}

std::vector<double> design_bandpass_fir(const FilterSpec& spec, double sfreq) {
  check_band(spec, sfreq);
  const std::size_t n = spec.n_taps ? spec.n_taps : default_tap_count(spec, sfreq);
  if (n % 2 == 0) throw ParameterError("n_taps must be odd, got " + std::to_string(n));

  const double lo = spec.f_low / sfreq;
  const double hi = spec.f_high / sfreq;
  const double half = static_cast<double>(n - 1) / 2.0;
  std::vector<double> taps(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = static_cast<double>(i) - half;
    const double window =
        n == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    taps[i] = (2.0 * hi * sinc(2.0 * hi * m) - 2.0 * lo * sinc(2.0 * lo * m)) * window;
  }

  // Unit gain at the centre of the pass band. Taps are symmetric, so the
  // response is a real cosine sum around the centre tap.
  const double centre = (lo + hi) / 2.0;
  double gain = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    gain += taps[i] * std::cos(2.0 * std::numbers::pi * centre * (static_cast<double>(i) - half));
  for (double& t : taps) t /= gain;

  // Pairwise averaging makes the symmetry exact in floating point.
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double s = 0.5 * (taps[i] + taps[n - 1 - i]);
    taps[i] = taps[n - 1 - i] = s;
  }
  return taps;
}

EegRecording apply_fir(const EegRecording& recording, std::span<const double> taps) {
  const std::size_t n_taps = taps.size();
  if (n_taps == 0 || n_taps % 2 == 0) throw ParameterError("filter must have an odd, non-zero tap count");
  const std::size_t n = recording.n_samples();
  if (n < n_taps)
    throw ParameterError("recording has " + std::to_string(n) + " samples; the " + std::to_string(n_taps) +
                         "-tap filter needs at least " + std::to_string(n_taps));

  const std::size_t pad = (n_taps - 1) / 2;
  EegRecording out = recording;
  std::vector<double> padded(n + 2 * pad);
  std::vector<double> filtered(n);
  for (std::size_t c = 0; c < recording.n_channels(); ++c) {
    const std::vector<double> x = recording.data.column(c);
    // Reflect about the edge samples (edge sample not repeated).
    for (std::size_t j = 0; j < pad; ++j) {
      padded[pad - 1 - j] = x[j + 1];
      padded[pad + n + j] = x[n - 2 - j];
    }
    std::copy(x.begin(), x.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = padded.data() + i;
      // Independent partial sums let the compiler pipeline the loop.
      double acc[4] = {0.0, 0.0, 0.0, 0.0};
      std::size_t k = 0;
      for (; k + 4 <= n_taps; k += 4)
        for (std::size_t u = 0; u < 4; ++u) acc[u] += taps[k + u] * p[k + u];
      for (; k < n_taps; ++k) acc[0] += taps[k] * p[k];
      filtered[i] = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    }
    out.data.set_column(c, filtered);
  }
  return out;
}

EegRecording average_reference(const EegRecording& recording) {
  const std::size_t n_ch = recording.n_channels();
  if (n_ch < 2) throw ParameterError("average reference needs at least 2 channels");
  EegRecording out = recording;
  for (std::size_t r = 0; r < out.n_samples(); ++r) {
    auto row = out.data.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(n_ch);
    for (double& v : row) v -= mean;
  }
  return out;
}

std::vector<double> equidistant_timestamps(const TimeWindow& window, std::size_t k) {
  if (k == 0) throw ParameterError("snapshot count must be at least 1");
  if (!(window.start_s >= 0.0) || !(window.start_s < window.end_s))
    throw ParameterError("time window must satisfy 0 <= start < end");
  const double step = (window.end_s - window.start_s) / static_cast<double>(k);
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = window.start_s + (static_cast<double>(i) + 0.5) * step;
  return out;
}

SnapshotSet snapshot(const EegRecording& recording, std::span<const double> timestamps) {
  SnapshotSet set;
  set.timestamps.assign(timestamps.begin(), timestamps.end());
  set.values = Matrix(timestamps.size(), recording.n_channels());
  const double duration = recording.duration();
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    const double t = timestamps[i];
    if (!(t >= 0.0) || t > duration)
      throw ParameterError("snapshot time " + std::to_string(t) + " s lies outside the recording (0 to " +
                           std::to_string(duration) + " s)");
    auto idx = static_cast<std::size_t>(std::llround(t * recording.sfreq));
    idx = std::min(idx, recording.n_samples() - 1);
    auto src = recording.data.row(idx);
    std::copy(src.begin(), src.end(), set.values.row(i).begin());
  }
  return set;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

EegRecording parse_eeg_csv(const std::string& text, double sfreq) {
  EegRecording rec;
  rec.sfreq = sfreq;
  std::vector<double> values;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (trim(line).empty()) continue;
    auto fields = split_commas(line);
    if (!header_seen) {
      for (auto f : fields) {
        if (f.empty()) throw ParseError("empty channel name in header", line_no);
        rec.channel_names.emplace_back(f);
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != rec.channel_names.size())
      throw ParseError("expected " + std::to_string(rec.channel_names.size()) + " values, found " +
                           std::to_string(fields.size()),
                       line_no);
    for (auto f : fields) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw ParseError("invalid number '" + std::string(f) + "'", line_no);
      values.push_back(v);
    }
  }
  if (!header_seen) throw ParseError("missing header line");
  const std::size_t n_ch = rec.channel_names.size();
  rec.data = Matrix(values.size() / n_ch, n_ch);
  rec.data.values() = std::move(values);
  rec.validate();
  return rec;
}

EegRecording read_eeg_csv(const std::filesystem::path& path, double sfreq) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open EEG file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_eeg_csv(ss.str(), sfreq);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.line());
  }
}

void write_eeg_csv(const std::filesystem::path& path, const EegRecording& recording) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t c = 0; c < recording.channel_names.size(); ++c)
    out << (c ? "," : "") << recording.channel_names[c];
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < recording.n_samples(); ++r) {
    auto row = recording.data.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, row[c]);
      if (c) out << ',';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace eegprompt
