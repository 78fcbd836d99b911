#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include "medflow/measure.hpp"

namespace medflow {

BinaryMask CineMask4D::slice(int t, int z) const {
  BinaryMask out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.at(x, y) = at(t, z, y, x);
  return out;
}

namespace {

const int kNbr4X[4] = {1, -1, 0, 0};
const int kNbr4Y[4] = {0, 0, 1, -1};
const int kNbr8X[8] = {1, -1, 0, 0, 1, 1, -1, -1};
const int kNbr8Y[8] = {0, 0, 1, -1, 1, -1, 1, -1};

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> out;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) out.emplace_back(dx, dy);
  return out;
}

BinaryMask dilate(const BinaryMask& in, const std::vector<std::pair<int, int>>& se) {
  BinaryMask out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      if (!in.at(x, y)) continue;
      for (auto [dx, dy] : se) {
        int nx = x + dx, ny = y + dy;
        if (in.inside(nx, ny)) out.at(nx, ny) = 1;
      }
    }
  return out;
}

BinaryMask erode(const BinaryMask& in, const std::vector<std::pair<int, int>>& se) {
  BinaryMask out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      bool all = true;
      for (auto [dx, dy] : se) {
        int nx = x + dx, ny = y + dy;
        if (!in.inside(nx, ny) || !in.at(nx, ny)) {
          all = false;
          break;
        }
      }
      out.at(x, y) = all ? 1 : 0;
    }
  return out;
}

BinaryMask fill_holes(const BinaryMask& in) {
  // Background reachable from the border stays background; the rest is hole.
  BinaryMask reach(in.width, in.height);
  std::vector<std::pair<int, int>> stack;
  auto push = [&](int x, int y) {
    if (in.inside(x, y) && !in.at(x, y) && !reach.at(x, y)) {
      reach.at(x, y) = 1;
      stack.emplace_back(x, y);
    }
  };
  for (int x = 0; x < in.width; ++x) {
    push(x, 0);
    push(x, in.height - 1);
  }
  for (int y = 0; y < in.height; ++y) {
    push(0, y);
    push(in.width - 1, y);
  }
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    stack.pop_back();
    for (int k = 0; k < 4; ++k) push(x + kNbr4X[k], y + kNbr4Y[k]);
  }
  BinaryMask out(in.width, in.height);
  for (std::size_t i = 0; i < in.pixels.size(); ++i)
    out.pixels[i] = (in.pixels[i] || !reach.pixels[i]) ? 1 : 0;
  return out;
}

}  // namespace

ComponentMap count_components(const BinaryMask& grid, int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw ShapeMismatchError("connectivity must be 4 or 8, got " +
                             std::to_string(connectivity));
  ComponentMap result;
  result.labels = LabelImage(grid.width, grid.height, 0);
  const int* nx = connectivity == 4 ? kNbr4X : kNbr8X;
  const int* ny = connectivity == 4 ? kNbr4Y : kNbr8Y;

  std::vector<std::pair<int, int>> stack;
  std::int32_t next_label = 0;
  for (int sy = 0; sy < grid.height; ++sy) {
    for (int sx = 0; sx < grid.width; ++sx) {
      if (!grid.at(sx, sy) || result.labels.at(sx, sy)) continue;
      ++next_label;
      result.labels.at(sx, sy) = next_label;
      stack.emplace_back(sx, sy);
      while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        for (int k = 0; k < connectivity; ++k) {
          int ax = x + nx[k], ay = y + ny[k];
          if (grid.inside(ax, ay) && grid.at(ax, ay) && !result.labels.at(ax, ay)) {
            result.labels.at(ax, ay) = next_label;
            stack.emplace_back(ax, ay);
          }
        }
      }
    }
  }
  result.count = static_cast<std::size_t>(next_label);
  return result;
}

PreprocessResult preprocess_tissue_mask(const GrayImage& thumbnail,
                                        const TissuePreprocessConfig& config) {
  if (thumbnail.width <= 0 || thumbnail.height <= 0)
    throw DegenerateImageError("empty image");
  PreprocessResult result;
  result.mask = BinaryMask(thumbnail.width, thumbnail.height);

  auto [mn, mx] = std::minmax_element(thumbnail.pixels.begin(), thumbnail.pixels.end());
  if (*mn == *mx) {
    result.warnings.push_back("constant intensity image, mask is empty");
    return result;
  }

  const int w = thumbnail.width, h = thumbnail.height;
  // Local mean over a clamped box window via an integral image.
  std::vector<std::uint64_t> integral(std::size_t(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      integral[std::size_t(y + 1) * (w + 1) + (x + 1)] =
          integral[std::size_t(y) * (w + 1) + (x + 1)] +
          integral[std::size_t(y + 1) * (w + 1) + x] -
          integral[std::size_t(y) * (w + 1) + x] + thumbnail.at(x, y);
  auto box_sum = [&](int x0, int y0, int x1, int y1) {  // inclusive corners
    return integral[std::size_t(y1 + 1) * (w + 1) + (x1 + 1)] -
           integral[std::size_t(y0) * (w + 1) + (x1 + 1)] -
           integral[std::size_t(y1 + 1) * (w + 1) + x0] +
           integral[std::size_t(y0) * (w + 1) + x0];
  };

  int half = std::max(1, config.window) / 2;
  BinaryMask mask(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int x0 = std::max(0, x - half), x1 = std::min(w - 1, x + half);
      int y0 = std::max(0, y - half), y1 = std::min(h - 1, y + half);
      double mean = double(box_sum(x0, y0, x1, y1)) / (double(x1 - x0 + 1) * (y1 - y0 + 1));
      mask.at(x, y) = thumbnail.at(x, y) < mean - config.offset ? 1 : 0;
    }
  }
  if (config.stage_sink) config.stage_sink("threshold", mask);

  if (config.close_radius > 0) {
    auto se = disk_offsets(config.close_radius);
    mask = erode(dilate(mask, se), se);
  }
  if (config.stage_sink) config.stage_sink("closed", mask);

  mask = fill_holes(mask);
  if (config.stage_sink) config.stage_sink("filled", mask);

  if (config.min_area > 0) {
    ComponentMap cm = count_components(mask, 8);
    std::vector<std::uint64_t> area(cm.count + 1, 0);
    for (std::int32_t l : cm.labels.pixels) ++area[l];
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
      std::int32_t l = cm.labels.pixels[i];
      mask.pixels[i] = (l > 0 && area[l] >= std::uint64_t(config.min_area)) ? 1 : 0;
    }
  }
  if (config.stage_sink) config.stage_sink("filtered", mask);

  int b = config.border;
  if (b > 0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (x < b || y < b || x >= w - b || y >= h - b) mask.at(x, y) = 0;
  }
  if (config.stage_sink) config.stage_sink("final", mask);

  result.mask = std::move(mask);
  return result;
}

std::vector<NodeOverlap> node_positivity(const LabelImage& node_labels,
                                         const BinaryMask& tumor_mask) {
  if (node_labels.width != tumor_mask.width || node_labels.height != tumor_mask.height)
    throw ShapeMismatchError("node labels and tumor mask differ in shape");
  const int w = node_labels.width, h = node_labels.height;

  std::map<std::int32_t, NodeOverlap> per_node;
  for (std::int32_t l : node_labels.pixels)
    if (l > 0 && !per_node.count(l)) {
      per_node[l].label = l;
      per_node[l].deposit = BinaryMask(w, h);
    }

  // Overlap components never cross node boundaries: flood fill is gated on
  // equal node label.
  LabelImage comp(w, h, 0);
  std::map<std::int32_t, std::pair<std::uint64_t, std::int32_t>> best;  // node -> (area, comp)
  std::map<std::int32_t, std::vector<std::pair<int, int>>> comp_pixels;
  std::int32_t next_comp = 0;
  std::vector<std::pair<int, int>> stack;

  auto is_overlap = [&](int x, int y) {
    return tumor_mask.at(x, y) && node_labels.at(x, y) > 0;
  };

  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      if (!is_overlap(sx, sy) || comp.at(sx, sy)) continue;
      std::int32_t node = node_labels.at(sx, sy);
      std::int32_t id = ++next_comp;
      std::uint64_t area = 0;
      comp.at(sx, sy) = id;
      stack.emplace_back(sx, sy);
      auto& pixels = comp_pixels[id];
      while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        ++area;
        pixels.emplace_back(x, y);
        for (int k = 0; k < 8; ++k) {
          int ax = x + kNbr8X[k], ay = y + kNbr8Y[k];
          if (comp.inside(ax, ay) && is_overlap(ax, ay) && !comp.at(ax, ay) &&
              node_labels.at(ax, ay) == node) {
            comp.at(ax, ay) = id;
            stack.emplace_back(ax, ay);
          }
        }
      }
      per_node[node].overlap_area += area;
      auto it = best.find(node);
      if (it == best.end() || area > it->second.first) best[node] = {area, id};
    }
  }

  std::vector<NodeOverlap> out;
  out.reserve(per_node.size());
  for (auto& [label, entry] : per_node) {
    entry.positive = entry.overlap_area > 0;
    auto it = best.find(label);
    if (it != best.end()) {
      entry.deposit_area = it->second.first;
      for (auto [x, y] : comp_pixels[it->second.second]) entry.deposit.at(x, y) = 1;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double point_dist(const Point& a, const Point& b) {
  double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// Monotone chain, strictly convex (collinear points dropped).
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point& a, const Point& b) {
                          return a.x == b.x && a.y == b.y;
                        }),
            pts.end());
  std::size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<Point> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

double max_extent_mm(const BinaryMask& component, Spacing2 spacing_mm) {
  std::vector<Point> boundary;
  for (int y = 0; y < component.height; ++y) {
    for (int x = 0; x < component.width; ++x) {
      if (!component.at(x, y)) continue;
      bool edge = x == 0 || y == 0 || x == component.width - 1 || y == component.height - 1;
      if (!edge) {
        for (int k = 0; k < 4 && !edge; ++k)
          if (!component.at(x + kNbr4X[k], y + kNbr4Y[k])) edge = true;
      }
      if (edge) boundary.push_back({x * spacing_mm.x, y * spacing_mm.y});
    }
  }
  if (boundary.empty()) throw EmptyComponentError("no foreground pixels");

  double pitch = std::max(spacing_mm.x, spacing_mm.y);
  std::vector<Point> hull = convex_hull(std::move(boundary));
  double diameter = 0.0;
  if (hull.size() == 2) {
    diameter = point_dist(hull[0], hull[1]);
  } else if (hull.size() > 2) {
    // Rotating calipers over antipodal pairs. Every hull vertex lies left of
    // each directed edge (CCW), so the triangle areas compared are >= 0.
    std::size_t m = hull.size();
    std::size_t j = 1;
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t ni = (i + 1) % m;
      while (cross(hull[i], hull[ni], hull[(j + 1) % m]) >
             cross(hull[i], hull[ni], hull[j]))
        j = (j + 1) % m;
      diameter = std::max(diameter, point_dist(hull[i], hull[j]));
      diameter = std::max(diameter, point_dist(hull[ni], hull[j]));
    }
  }
  return std::max(diameter, pitch);
}

namespace {

template <class T>
double masked_mean_impl(const Volume<T>& volume, const Volume<std::uint8_t>& mask) {
  if (volume.depth != mask.depth || volume.height != mask.height ||
      volume.width != mask.width)
    throw ShapeMismatchError("volume and mask differ in shape");
  double sum = 0.0;
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < volume.voxels.size(); ++i) {
    if (mask.voxels[i]) {
      sum += static_cast<double>(volume.voxels[i]);
      ++n;
    }
  }
  if (n == 0) throw EmptyMaskError("mask selects no voxels");
  return sum / static_cast<double>(n);
}

}  // namespace

double masked_mean_intensity(const Volume<double>& volume, const Volume<std::uint8_t>& mask) {
  return masked_mean_impl(volume, mask);
}

double masked_mean_intensity(const Volume<float>& volume, const Volume<std::uint8_t>& mask) {
  return masked_mean_impl(volume, mask);
}

}  // namespace medflow
