#pragma once

namespace stvg {

// Axis-aligned box in continuous frame coordinates, [x1,x2) x [y1,y2).
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x1 <= x2 && y1 <= y2; }

  bool operator==(const BBox&) const = default;
};

// Closed time interval in seconds.
struct TemporalInterval {
  double t_s = 0.0;
  double t_e = 0.0;

  double length() const { return t_e - t_s; }
  bool valid() const { return t_s <= t_e; }

  bool operator==(const TemporalInterval&) const = default;
};

// Intersection-over-union on continuous area. Identical boxes score 1 even
// when degenerate; otherwise a zero-area union scores 0.
double box_iou(const BBox& a, const BBox& b);

// Intersection area over the smaller box's area. Same degenerate convention
// as box_iou, so containment and identity always score 1.
double overlap_ratio_min(const BBox& a, const BBox& b);

// Interval IoU. Union is the covering hull minus any gap. Two identical
// point intervals score 1; distinct points score 0.
double temporal_iou(const TemporalInterval& p, const TemporalInterval& g);

// Inclusive frame-index range covered by an interval on a sampled grid.
// Second boundaries round to the nearest sampled frame and the result is
// clamped to [0, frame_count).
struct FrameSpan {
  int lo = 0;
  int hi = -1;

  bool empty() const { return lo > hi; }
  int count() const { return empty() ? 0 : hi - lo + 1; }
  bool contains(int f) const { return f >= lo && f <= hi; }
};

FrameSpan frame_span(const TemporalInterval& interval, double fps, int frame_count);

}  // namespace stvg
