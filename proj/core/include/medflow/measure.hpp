#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "medflow/errors.hpp"

namespace medflow {

MEDFLOW_DEFINE_ERROR(DegenerateImageError, "DegenerateImage");
MEDFLOW_DEFINE_ERROR(EmptyContourError, "EmptyContour");
MEDFLOW_DEFINE_ERROR(EmptyMaskError, "EmptyMask");
MEDFLOW_DEFINE_ERROR(NoIntersectionError, "NoIntersection");
MEDFLOW_DEFINE_ERROR(ShapeMismatchError, "ShapeMismatch");
MEDFLOW_DEFINE_ERROR(EmptyComponentError, "EmptyComponent");
MEDFLOW_DEFINE_ERROR(NegativeInputError, "NegativeInput");

template <class T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;  // row-major, index y * width + x

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), pixels(std::size_t(w) * h, fill) {}
  T at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  T& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  std::size_t size() const { return pixels.size(); }
};

using BinaryMask = Image<std::uint8_t>;   // 0 background, nonzero foreground
using LabelImage = Image<std::int32_t>;   // labels >= 0, 0 background
using GrayImage = Image<std::uint8_t>;

template <class T>
struct Volume {
  int depth = 0, height = 0, width = 0;
  std::vector<T> voxels;  // [z][y][x]
  Volume() = default;
  Volume(int d, int h, int w, T fill = T{})
      : depth(d), height(h), width(w), voxels(std::size_t(d) * h * w, fill) {}
  T at(int z, int y, int x) const {
    return voxels[(std::size_t(z) * height + y) * width + x];
  }
  T& at(int z, int y, int x) {
    return voxels[(std::size_t(z) * height + y) * width + x];
  }
};

// frames x slices x rows x cols, binary.
struct CineMask4D {
  int frames = 0, slices = 0, height = 0, width = 0;
  std::vector<std::uint8_t> voxels;
  CineMask4D() = default;
  CineMask4D(int t, int z, int h, int w)
      : frames(t), slices(z), height(h), width(w),
        voxels(std::size_t(t) * z * h * w, 0) {}
  std::uint8_t at(int t, int z, int y, int x) const {
    return voxels[((std::size_t(t) * slices + z) * height + y) * width + x];
  }
  std::uint8_t& at(int t, int z, int y, int x) {
    return voxels[((std::size_t(t) * slices + z) * height + y) * width + x];
  }
  BinaryMask slice(int t, int z) const;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Contour {
  std::vector<Point> vertices;  // counterclockwise for outer boundaries
  bool closed = true;
};

struct Spacing2 {
  double x = 1.0;  // physical size per pixel along x
  double y = 1.0;
};

struct Measurement {
  double value = 0.0;
  std::string unit;
  Point witness_p, witness_q;  // extremal pair realizing the value
  int witness_slice = -1;
  int witness_frame = -1;
  std::string method;
};

// --- tissue mask preprocessing -------------------------------------------

struct TissuePreprocessConfig {
  int window = 31;        // box size for the local-mean threshold, odd
  double offset = 10.0;   // foreground when pixel < local mean - offset
  int close_radius = 2;   // disk radius for morphological closing
  int min_area = 64;      // drop 8-connected components smaller than this
  int border = 8;         // zero a strip this wide along every edge
  // Optional sink for the intermediate stage masks, in pipeline order:
  // threshold, closed, filled, filtered, final.
  std::function<void(const std::string&, const BinaryMask&)> stage_sink;
};

struct PreprocessResult {
  BinaryMask mask;
  std::vector<std::string> warnings;
};

PreprocessResult preprocess_tissue_mask(const GrayImage& thumbnail,
                                        const TissuePreprocessConfig& config = {});

// --- contours --------------------------------------------------------------

// One closed, counterclockwise contour per outer boundary of each
// 8-connected foreground component, traced along pixel cracks: a pixel at
// (x, y) occupies the unit square [x, x+1] x [y, y+1]. Vertices are lattice
// points one pixel apart (collinear runs are not merged), so nearest-vertex
// queries resolve to within one pixel. Holes are not reported.
std::vector<Contour> extract_contours(const BinaryMask& mask);

double polygon_signed_area(std::span<const Point> vertices);
double contour_perimeter(const Contour& contour);

// --- depth of invasion ------------------------------------------------------

// Maximum over tumor vertices of the distance to the nearest epithelial
// vertex, scaled to physical units. Multiple epithelial contours contribute
// the union of their vertices. The witness pair (p*, q*) realizes the value.
Measurement measure_doi(std::span<const Point> tumor_vertices,
                        std::span<const Point> epithelial_vertices,
                        double pixel_size_um);
Measurement measure_doi(const Contour& tumor, std::span<const Contour> epithelium,
                        double pixel_size_um);

// Exact nearest-vertex search over a uniform grid of buckets with expanding
// ring lookup. Same results as a linear scan, independent of cell size.
class VertexIndex {
 public:
  explicit VertexIndex(std::span<const Point> points, double cell_size = 64.0);
  struct Hit {
    std::size_t index = 0;
    double distance = 0.0;
  };
  Hit nearest(const Point& query) const;
  std::size_t size() const { return points_.size(); }

 private:
  std::vector<Point> points_;
  double cell_ = 64.0;
  double origin_x_ = 0.0, origin_y_ = 0.0;
  int cells_x_ = 0, cells_y_ = 0;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

// --- left-ventricle wall thickness ------------------------------------------

struct WallThicknessResult {
  Measurement max_thickness;          // mm; witness carries slice + frame
  std::vector<double> per_slice_max;  // mm per slice at the ED frame; NaN when empty
  int ed_frame = 0;
  std::size_t vertices_measured = 0;
  std::size_t vertices_skipped = 0;
};

// End-diastole frame = argmax over frames of blood-pool voxel count (lowest
// frame wins ties). Per slice, the endocardial contour bounds the blood
// pool and the epicardial contour bounds blood pool union myocardium; local
// thickness is the outward-normal ray length from each endocardial vertex
// to its first epicardial crossing, measured in physical coordinates.
// `rv_blood_pool` is accepted for interface compatibility and not used.
WallThicknessResult measure_wall_thickness(const CineMask4D& lv_blood_pool,
                                           const CineMask4D& lv_myocardium,
                                           Spacing2 spacing_mm,
                                           const CineMask4D* rv_blood_pool = nullptr);

// --- lymph node overlap -------------------------------------------------------

struct NodeOverlap {
  std::int32_t label = 0;
  bool positive = false;
  std::uint64_t overlap_area = 0;       // pixels of tumor inside this node
  BinaryMask deposit;                   // largest 8-connected overlap component
  std::uint64_t deposit_area = 0;
};

std::vector<NodeOverlap> node_positivity(const LabelImage& node_labels,
                                         const BinaryMask& tumor_mask);

// --- deposit extent --------------------------------------------------------------

// Maximum Feret diameter over boundary pixel centers in physical
// coordinates (convex hull + rotating calipers), floored at one pixel
// pitch (max spacing component) so single-pixel deposits report the pitch.
double max_extent_mm(const BinaryMask& component, Spacing2 spacing_mm);

// --- connected components ----------------------------------------------------------

struct ComponentMap {
  std::size_t count = 0;
  LabelImage labels;  // 1..count in raster first-encounter order
};

ComponentMap count_components(const BinaryMask& grid, int connectivity);  // 4 or 8

// --- masked statistics ----------------------------------------------------------------

double masked_mean_intensity(const Volume<double>& volume, const Volume<std::uint8_t>& mask);
double masked_mean_intensity(const Volume<float>& volume, const Volume<std::uint8_t>& mask);

}  // namespace medflow
