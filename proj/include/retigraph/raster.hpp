#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace retigraph {

// Default lattice spacing: 3 mm scans at 304x304 px.
inline constexpr double kDefaultPixelSizeMm = 3.0 / 304.0;

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

// Row-major comparison used wherever "first pixel in raster order" matters.
inline bool raster_less(const Pixel& a, const Pixel& b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

struct IntensityGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, in [0,1]
  double pixel_size_mm = kDefaultPixelSizeMm;

  double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return values.size(); }
};

struct BinaryGrid {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> mask;  // row-major, 0/1

  BinaryGrid() = default;
  BinaryGrid(int w, int h) : width(w), height(h), mask(static_cast<size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return mask[static_cast<size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { mask[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  // Out-of-bounds pixels read as background.
  bool at_safe(int x, int y) const { return in_bounds(x, y) && at(x, y); }
  size_t count() const;

  friend bool operator==(const BinaryGrid&, const BinaryGrid&) = default;
};

struct LabelGrid {
  int width = 0;
  int height = 0;
  std::vector<int32_t> labels;  // 0 = unlabeled
  int32_t num_labels = 0;

  int32_t at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
};

struct RegionProps {
  double area = 0.0;       // pixel count
  double perimeter = 0.0;  // boundary pixel-edge count
  Point centroid;
  double eccentricity = 0.0;
  double major_axis_len = 0.0;
  double minor_axis_len = 0.0;
  double solidity = 1.0;
  double mean_intensity = 0.0;
  double std_intensity = 0.0;
};

// Run-length encoded pixel set; runs sorted by (row, start_col).
struct RleRun {
  int32_t row = 0;
  int32_t start_col = 0;
  int32_t run_len = 0;
  friend bool operator==(const RleRun&, const RleRun&) = default;
};

struct PixelMask {
  std::vector<RleRun> runs;

  size_t pixel_count() const;
  bool empty() const { return runs.empty(); }
  template <typename Fn>
  void for_each_pixel(Fn&& fn) const {
    for (const RleRun& r : runs)
      for (int32_t c = r.start_col; c < r.start_col + r.run_len; ++c) fn(c, r.row);
  }
  friend bool operator==(const PixelMask&, const PixelMask&) = default;
};

PixelMask mask_from_pixels(std::vector<Pixel> pixels);
PixelMask mask_from_grid(const BinaryGrid& grid);

// --- image I/O -------------------------------------------------------------

// Reads PGM (P5, 8/16-bit) or grayscale PNG (8/16-bit, non-interlaced).
// Values are rescaled linearly by the format's maximum to [0,1].
IntensityGrid load_image(const std::string& path, double pixel_size_mm = kDefaultPixelSizeMm);

void save_pgm(const IntensityGrid& img, const std::string& path);
void save_pgm(const BinaryGrid& mask, const std::string& path);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;  // row-major RGB triplets

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0) {}
};

// Deterministic PNG bytes (stored deflate blocks, no filtering).
void save_png(const RgbImage& img, const std::string& path);
std::vector<uint8_t> encode_png(const RgbImage& img);

// --- raster operations -----------------------------------------------------

BinaryGrid threshold(const IntensityGrid& grid, double t);

// Deterministic labels: the component whose first pixel in row-major order
// comes earlier gets the smaller label. connectivity is 4 or 8.
LabelGrid connected_components(const BinaryGrid& binary, int connectivity);

BinaryGrid invert(const BinaryGrid& binary);

// Iterative thinning, Zhang-Suen conditions applied sequentially in raster
// order so that every deletion is a simple point. Preserves the 8-connected
// foreground component count exactly and is idempotent.
BinaryGrid skeletonize(const BinaryGrid& binary);

// Exact Euclidean distance to the nearest background pixel, with the grid
// border treated as background (a vessel touching the crop edge gets a finite
// radius). Returns 0 on background pixels. Distances are in pixels.
std::vector<double> distance_transform(const BinaryGrid& binary);

// Geometric and intensity descriptors of one labeled region, in pixel units.
// Axes follow the ellipse-of-equal-second-moments convention; perimeter is the
// count of pixel edges facing non-region pixels (grid border counts).
RegionProps region_properties(const LabelGrid& labels, int32_t label, const IntensityGrid& intensity);

// Convex hull of pixel centers (counter-clockwise); used for solidity and
// Feret diameters.
std::vector<Point> region_hull(const std::vector<Pixel>& pixels);

}  // namespace retigraph
