#include "eegprompt/topomap.hpp"

#include "eegprompt/error.hpp"
#include "eegprompt/png.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace eegprompt {

namespace {

using Vec3 = std::array<double, 3>;  // x right, y anterior, z up

Vec3 sub(Vec3 a, Vec3 b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 add(Vec3 a, Vec3 b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 scale(Vec3 a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(Vec3 a, Vec3 b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(Vec3 a, Vec3 b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalized(Vec3 a) { return scale(a, 1.0 / std::sqrt(dot(a, a))); }

constexpr double kDeg = std::numbers::pi / 180.0;

// Equator point at `from_front` degrees from the nasion direction; positive
// is toward the left ear.
Vec3 equator_point(double from_front_deg) {
  const double a = from_front_deg * kDeg;
  return {-std::sin(a), std::cos(a), 0.0};
}

// Midline point `steps` * 22.5 degrees from Cz; positive is anterior.
Vec3 midline_point(double steps) {
  const double t = steps * 22.5 * kDeg;
  return {0.0, std::sin(t), std::cos(t)};
}

Vec3 circumcentre(Vec3 a, Vec3 b, Vec3 c) {
  const Vec3 ab = sub(b, a);
  const Vec3 ac = sub(c, a);
  const Vec3 n = cross(ab, ac);
  const double denom = 2.0 * dot(n, n);
  const Vec3 term = add(scale(cross(n, ab), dot(ac, ac)), scale(cross(ac, n), dot(ab, ab)));
  return add(a, scale(term, 1.0 / denom));
}

// Position of an electrode on the row whose midline electrode is `row`
// steps from Cz, `fraction` of the way (by arc angle) from the midline to the
// row's equator end. Negative fractions lie to the right.
Vec3 row_position(double row, double fraction) {
  const Vec3 mid = midline_point(row);
  if (fraction == 0.0) return mid;
  const double end_deg = 90.0 - row * 18.0;  // equator end of the row
  const Vec3 left = equator_point(end_deg);
  const Vec3 right = equator_point(-end_deg);
  const Vec3 centre = circumcentre(left, mid, right);
  const Vec3 m = sub(mid, centre);
  const double radius = std::sqrt(dot(m, m));
  const Vec3 u = scale(m, 1.0 / radius);
  const Vec3 target = sub(fraction > 0 ? left : right, centre);
  Vec3 v = sub(target, scale(u, dot(target, u)));
  v = normalized(v);
  const double total = std::atan2(dot(target, v), dot(target, u));
  const double angle = std::abs(fraction) * total;
  return normalized(add(centre, scale(add(scale(u, std::cos(angle)), scale(v, std::sin(angle))), radius)));
}

std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

SpherePosition to_sphere(Vec3 p) {
  return {std::atan2(p[1], p[0]), std::asin(std::clamp(p[2], -1.0, 1.0))};
}

}  // namespace

ElectrodeLayout::ElectrodeLayout() {
  struct Row {
    const char* prefix;
    double steps;
    int first_col;
    int last_col;
  };
  // Column pairs (1,2), (3,4), ... sit at quarter steps along the row arc;
  // 9/10 continue one quarter below the equator.
  const Row rows[] = {
      {"AF", 3, 1, 8}, {"F", 2, 1, 10}, {"FC", 1, 1, 6}, {"FT", 1, 7, 10}, {"C", 0, 1, 6},
      {"T", 0, 7, 10}, {"CP", -1, 1, 6}, {"TP", -1, 7, 10}, {"P", -2, 1, 10}, {"PO", -3, 1, 10},
  };
  auto put = [this](const std::string& label, Vec3 p) { entries_[lower(label)] = to_sphere(p); };
  for (const Row& row : rows) {
    put(std::string(row.prefix) + "z", row_position(row.steps, 0.0));
    for (int col = row.first_col; col <= row.last_col; ++col) {
      const double fraction = static_cast<double>((col + 1) / 2) / 4.0;
      put(row.prefix + std::to_string(col), row_position(row.steps, col % 2 ? fraction : -fraction));
    }
  }
  entries_.erase("tz");
  entries_.erase("ftz");
  entries_.erase("tpz");
  // Frontopolar and occipital electrodes lie on the equator.
  put("Fpz", midline_point(4));
  put("Fp1", equator_point(18));
  put("Fp2", equator_point(-18));
  put("Oz", midline_point(-4));
  put("O1", equator_point(162));
  put("O2", equator_point(-162));
  put("Iz", midline_point(-5));
  put("Cz", midline_point(0));
  entries_["t3"] = entries_.at("t7");
  entries_["t4"] = entries_.at("t8");
  entries_["t5"] = entries_.at("p7");
  entries_["t6"] = entries_.at("p8");
}

const ElectrodeLayout& ElectrodeLayout::standard() {
  static const ElectrodeLayout layout;
  return layout;
}

bool ElectrodeLayout::contains(const std::string& label) const { return entries_.count(lower(label)) != 0; }

SpherePosition ElectrodeLayout::position(const std::string& label) const {
  auto it = entries_.find(lower(label));
  if (it == entries_.end()) throw ParameterError("unknown 10-20 electrode label '" + label + "'");
  return it->second;
}

std::vector<std::string> ElectrodeLayout::labels() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [label, _] : entries_) out.push_back(label);
  return out;
}

std::vector<Point2> project_layout(const std::vector<std::string>& channel_names, const ElectrodeLayout& layout) {
  std::vector<Point2> out;
  out.reserve(channel_names.size());
  for (const auto& name : channel_names) {
    const SpherePosition p = layout.position(name);
    const double radius = (std::numbers::pi / 2.0 - p.elevation) / kProjectionMaxPolar;
    out.push_back({radius * std::cos(p.azimuth), radius * std::sin(p.azimuth)});
  }
  return out;
}

Point2 ScalpField::cell_centre(std::size_t row, std::size_t col) const {
  const double step = 2.0 / static_cast<double>(n);
  return {-1.0 + (static_cast<double>(col) + 0.5) * step, 1.0 - (static_cast<double>(row) + 0.5) * step};
}

double idw_value(std::span<const Point2> coords, std::span<const double> values, Point2 at) {
  double weight_sum = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double dx = at.x - coords[i].x;
    const double dy = at.y - coords[i].y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < 1e-24) return values[i];
    const double w = 1.0 / d2;
    weight_sum += w;
    acc += w * values[i];
  }
  return acc / weight_sum;
}

ScalpField interpolate_scalp(std::span<const Point2> coords, std::span<const double> values, std::size_t n) {
  if (coords.size() != values.size()) throw ParameterError("one value per electrode is required");
  if (coords.size() < 3) throw ParameterError("interpolation needs at least 3 electrodes");
  if (n == 0) throw ParameterError("grid size must be positive");
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (std::size_t j = i + 1; j < coords.size(); ++j)
      if (coords[i].x == coords[j].x && coords[i].y == coords[j].y)
        throw ParameterError("duplicate electrode coordinates at indices " + std::to_string(i) + " and " +
                             std::to_string(j));

  ScalpField field;
  field.n = n;
  field.grid.assign(n * n, 0.0);
  field.mask.assign(n * n, 0);
  double peak = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const Point2 p = field.cell_centre(r, c);
      if (p.x * p.x + p.y * p.y > 1.0) continue;
      const double v = idw_value(coords, values, p);
      field.grid[r * n + c] = v;
      field.mask[r * n + c] = 1;
      peak = std::max(peak, std::abs(v));
    }
  }
  field.vmin = -peak;
  field.vmax = peak;
  return field;
}

Rgb colormap(int index) {
  index = std::clamp(index, 0, 255);
  if (index <= 127) {
    const auto ramp = static_cast<std::uint8_t>(std::lround(255.0 * index / 127.0));
    return {ramp, ramp, 255};
  }
  const auto ramp = static_cast<std::uint8_t>(std::lround(255.0 * (255 - index) / 127.0));
  return {255, ramp, ramp};
}

int color_index(double value, double vmin, double vmax) {
  if (!(vmax > vmin)) return 128;
  const double x = std::clamp(255.0 * (value - vmin) / (vmax - vmin), 0.0, 255.0);
  const double idx = x < 127.5 ? std::floor(x + 0.5) : std::ceil(x - 0.5);
  return static_cast<int>(idx);
}

namespace {

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kInk{0, 0, 0};

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double t = std::clamp(((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Image render_raster(const ScalpField& field, std::size_t size) {
  if (field.n == 0 || std::none_of(field.mask.begin(), field.mask.end(), [](std::uint8_t m) { return m != 0; }))
    throw ParameterError("scalp field has an empty mask");

  Image img{size, size, std::vector<std::uint8_t>(3 * size * size, 255)};
  const double s = static_cast<double>(size);
  const double radius = 0.39 * s;  // head radius in pixels
  const double cx = s / 2.0;
  const double cy = s / 2.0 + 0.025 * s;
  const double stroke = std::max(1.0, s / 256.0);

  for (std::size_t py = 0; py < size; ++py) {
    for (std::size_t px = 0; px < size; ++px) {
      const double X = static_cast<double>(px) + 0.5;
      const double Y = static_cast<double>(py) + 0.5;
      const double u = (X - cx) / radius;
      const double v = (cy - Y) / radius;
      const double r = std::sqrt(u * u + v * v);

      if (r <= 1.0) {
        const auto col = std::min(field.n - 1, static_cast<std::size_t>((u + 1.0) / 2.0 * static_cast<double>(field.n)));
        const auto row = std::min(field.n - 1, static_cast<std::size_t>((1.0 - v) / 2.0 * static_cast<double>(field.n)));
        if (field.inside(row, col)) img.set(px, py, colormap(color_index(field.at(row, col), field.vmin, field.vmax)));
      }

      bool ink = std::abs(r - 1.0) * radius < stroke;
      if (!ink && r > 1.0) {
        // Nose wedge above the head, ears on either side.
        const double nose_half = 0.12, nose_tip = 1.14;
        ink = segment_distance(u, v, -nose_half, std::sqrt(1 - nose_half * nose_half), 0.0, nose_tip) * radius < stroke ||
              segment_distance(u, v, nose_half, std::sqrt(1 - nose_half * nose_half), 0.0, nose_tip) * radius < stroke;
        for (double side : {-1.0, 1.0}) {
          const double eu = (u - side * 1.0) / 0.07;
          const double ev = v / 0.2;
          const double e = std::sqrt(eu * eu + ev * ev);
          if (std::abs(e - 1.0) * 0.07 * radius < stroke) ink = true;
        }
      }
      if (ink) img.set(px, py, kInk);
    }
  }
  return img;
}

TopomapImage render(const ScalpField& field, std::size_t size) {
  TopomapImage out;
  out.image = render_raster(field, size);
  out.png = encode_png(out.image);
  return out;
}

namespace {

// 5x7 glyphs, one string per row, '#' set.
struct Glyph {
  char ch;
  std::array<const char*, 7> rows;
};

constexpr Glyph kGlyphs[] = {
    {'0', {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "}},
    {'1', {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
    {'2', {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"}},
    {'3', {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "}},
    {'4', {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "}},
    {'5', {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "}},
    {'6', {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "}},
    {'7', {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "}},
    {'8', {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "}},
    {'9', {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "}},
    {'.', {"     ", "     ", "     ", "     ", "     ", " ##  ", " ##  "}},
    {'-', {"     ", "     ", "     ", "#####", "     ", "     ", "     "}},
    {'=', {"     ", "     ", "#####", "     ", "#####", "     ", "     "}},
    {'t', {" #   ", " #   ", "#### ", " #   ", " #   ", " #  #", "  ## "}},
    {'s', {"     ", "     ", " ####", "#    ", " ### ", "    #", "#### "}},
    {' ', {"     ", "     ", "     ", "     ", "     ", "     ", "     "}},
};

const Glyph* find_glyph(char ch) {
  for (const Glyph& g : kGlyphs)
    if (g.ch == ch) return &g;
  return nullptr;
}

void draw_text(Image& img, const std::string& text, std::size_t centre_x, std::size_t top) {
  constexpr std::size_t scale = 2, advance = 6 * scale;
  const std::size_t width = text.size() * advance;
  std::size_t x0 = centre_x > width / 2 ? centre_x - width / 2 : 0;
  for (char ch : text) {
    if (const Glyph* g = find_glyph(ch)) {
      for (std::size_t gy = 0; gy < 7; ++gy)
        for (std::size_t gx = 0; gx < 5; ++gx) {
          if (g->rows[gy][gx] != '#') continue;
          for (std::size_t dy = 0; dy < scale; ++dy)
            for (std::size_t dx = 0; dx < scale; ++dx) {
              const std::size_t x = x0 + gx * scale + dx, y = top + gy * scale + dy;
              if (x < img.width && y < img.height) img.set(x, y, kInk);
            }
        }
    }
    x0 += advance;
  }
}

}  // namespace

TopomapImage montage(std::span<const TopomapImage> images, std::size_t rows, std::size_t cols,
                     std::span<const std::string> captions) {
  if (rows == 0 || cols == 0 || images.size() != rows * cols)
    throw ParameterError("montage of " + std::to_string(rows) + "x" + std::to_string(cols) + " needs " +
                         std::to_string(rows * cols) + " panels, got " + std::to_string(images.size()));
  if (!captions.empty() && captions.size() != images.size())
    throw ParameterError("one caption per panel is required");
  const std::size_t w = images.front().image.width;
  const std::size_t h = images.front().image.height;
  for (const auto& p : images)
    if (p.image.width != w || p.image.height != h) throw ParameterError("montage panels must share one size");

  const std::size_t tile_h = h + kCaptionHeight;
  Image out{cols * w, rows * tile_h, std::vector<std::uint8_t>(3 * cols * w * rows * tile_h, 255)};
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::size_t r = i / cols, c = i % cols;
    for (std::size_t y = 0; y < h; ++y) {
      const auto* src = images[i].image.rgb.data() + 3 * y * w;
      auto* dst = out.rgb.data() + 3 * ((r * tile_h + y) * out.width + c * w);
      std::copy(src, src + 3 * w, dst);
    }
    if (!captions.empty()) draw_text(out, captions[i], c * w + w / 2, r * tile_h + h + 1);
  }
  TopomapImage result;
  result.png = encode_png(out);
  result.image = std::move(out);
  return result;
}

std::string timestamp_caption(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t=%.3fs", seconds);
  return buf;
}

std::vector<TopomapImage> snapshot_panels(const EegRecording& recording, const SnapshotSet& snapshots,
                                          std::size_t grid) {
  const std::vector<Point2> coords = project_layout(recording.channel_names);
  std::vector<TopomapImage> panels;
  panels.reserve(snapshots.timestamps.size());
  for (std::size_t i = 0; i < snapshots.timestamps.size(); ++i) {
    auto row = snapshots.values.row(i);
    panels.push_back(render(interpolate_scalp(coords, row, grid)));
  }
  return panels;
}

}  // namespace eegprompt
