#pragma once

#include <algorithm>
#include <cmath>

namespace stil {

// Axis-aligned box in pixel coordinates, corners (x1,y1) top-left and
// (x2,y2) bottom-right. Valid boxes have positive area.
struct Rect {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  friend bool operator==(const Rect& a, const Rect& b) = default;
};

inline bool rect_valid(const Rect& r) { return r.x1 < r.x2 && r.y1 < r.y2; }

inline double rect_area(const Rect& r) { return (r.x2 - r.x1) * (r.y2 - r.y1); }

inline double rect_center_x(const Rect& r) { return 0.5 * (r.x1 + r.x2); }
inline double rect_center_y(const Rect& r) { return 0.5 * (r.y1 + r.y2); }

// Center-to-corner distance (half diagonal).
inline double rect_half_diagonal(const Rect& r) {
  const double hw = 0.5 * (r.x2 - r.x1);
  const double hh = 0.5 * (r.y2 - r.y1);
  return std::sqrt(hw * hw + hh * hh);
}

// Intersection-over-union of two valid rects. Symmetric, in [0,1].
inline double spatial_iou(const Rect& a, const Rect& b) {
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = rect_area(a) + rect_area(b) - inter;
  return inter / uni;
}

}  // namespace stil
