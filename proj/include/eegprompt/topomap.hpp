#pragma once

#include "eegprompt/signal.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace eegprompt {

// Spherical electrode position: azimuth in radians counter-clockwise from
// the right ear (nose at +pi/2), elevation in radians above the ear-nasion
// plane. Cz has elevation pi/2.
struct SpherePosition {
  double azimuth = 0.0;
  double elevation = 0.0;
};

struct Point2 {
  double x = 0.0;  // right
  double y = 0.0;  // anterior
};

// Canonical 10-20 / 10-10 positions on an idealized spherical head.
// Label lookup is case-insensitive; T3/T4/T5/T6 alias T7/T8/P7/P8.
class ElectrodeLayout {
 public:
  static const ElectrodeLayout& standard();

  bool contains(const std::string& label) const;
  // Throws ParameterError naming the label when unknown.
  SpherePosition position(const std::string& label) const;
  std::vector<std::string> labels() const;

 private:
  ElectrodeLayout();
  std::map<std::string, SpherePosition> entries_;  // keyed by lower-case label
};

// Polar angle (from Cz) that maps to radius 1 in the projection.
inline constexpr double kProjectionMaxPolar = 2.0943951023931957;  // 120 degrees

// Azimuthal-equidistant projection centred on Cz: radius is the polar angle
// divided by kProjectionMaxPolar.
std::vector<Point2> project_layout(const std::vector<std::string>& channel_names,
                                   const ElectrodeLayout& layout = ElectrodeLayout::standard());

struct ScalpField {
  std::size_t n = 0;
  std::vector<double> grid;  // n x n row-major; row 0 is the anterior edge
  std::vector<std::uint8_t> mask;
  double vmin = 0.0;
  double vmax = 0.0;

  double at(std::size_t row, std::size_t col) const { return grid[row * n + col]; }
  bool inside(std::size_t row, std::size_t col) const { return mask[row * n + col] != 0; }
  // Unit-disk coordinate of a cell centre.
  Point2 cell_centre(std::size_t row, std::size_t col) const;
};

// Inverse-distance weighting, power 2. Exact at the nodes.
double idw_value(std::span<const Point2> coords, std::span<const double> values, Point2 at);

ScalpField interpolate_scalp(std::span<const Point2> coords, std::span<const double> values, std::size_t n = 64);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// 256-entry blue-white-red map; entries 127 and 128 are white and
// colormap(255 - i) is colormap(i) with red and blue exchanged.
Rgb colormap(int index);
// round(255 * (v - vmin) / (vmax - vmin)) with ties resolved toward the
// centre so that negating the field mirrors the colour index exactly.
int color_index(double value, double vmin, double vmax);

// 8-bit RGB raster.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Rgb pixel(std::size_t x, std::size_t y) const {
    const std::size_t i = 3 * (y * width + x);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  void set(std::size_t x, std::size_t y, Rgb c) {
    const std::size_t i = 3 * (y * width + x);
    rgb[i] = c.r;
    rgb[i + 1] = c.g;
    rgb[i + 2] = c.b;
  }
  bool operator==(const Image&) const = default;
};

struct TopomapImage {
  Image image;
  std::vector<std::uint8_t> png;
};

inline constexpr std::size_t kPanelSize = 256;
inline constexpr std::size_t kCaptionHeight = 16;

// Rasterizes the field with the head outline, nose and ears.
Image render_raster(const ScalpField& field, std::size_t size = kPanelSize);
TopomapImage render(const ScalpField& field, std::size_t size = kPanelSize);

// Row-major tiling; each row of panels is followed by a caption strip of
// kCaptionHeight pixels. captions may be empty or hold one entry per panel.
TopomapImage montage(std::span<const TopomapImage> images, std::size_t rows, std::size_t cols,
                     std::span<const std::string> captions = {});

// Full EEG-to-montage path: snapshots at `timestamps`, one panel each, tiled
// 2 x 5 (or as a single row when fewer than 10 panels).
std::vector<TopomapImage> snapshot_panels(const EegRecording& recording, const SnapshotSet& snapshots,
                                          std::size_t grid = 64);
std::string timestamp_caption(double seconds);

}  // namespace eegprompt
