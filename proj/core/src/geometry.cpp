#include "stvg/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace stvg {

double box_iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return a == b ? 1.0 : 0.0;
  return inter / uni;
}

double overlap_ratio_min(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double smaller = std::min(a.area(), b.area());
  if (smaller <= 0.0) return a == b ? 1.0 : 0.0;
  return inter / smaller;
}

double temporal_iou(const TemporalInterval& p, const TemporalInterval& g) {
  const double inter = std::max(0.0, std::min(p.t_e, g.t_e) - std::max(p.t_s, g.t_s));
  const double uni = p.length() + g.length() - inter;
  if (uni <= 0.0) return p.t_s == g.t_s ? 1.0 : 0.0;
  return inter / uni;
}

FrameSpan frame_span(const TemporalInterval& interval, double fps, int frame_count) {
  FrameSpan span;
  const long lo = std::lround(interval.t_s * fps);
  const long hi = std::lround(interval.t_e * fps);
  span.lo = static_cast<int>(std::max(lo, 0L));
  span.hi = static_cast<int>(std::min(hi, static_cast<long>(frame_count) - 1));
  if (span.lo > span.hi) {
    span.lo = 0;
    span.hi = -1;
  }
  return span;
}

}  // namespace stvg
