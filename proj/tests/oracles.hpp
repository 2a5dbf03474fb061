#pragma once

// Brute-force reference computations for the metric tests. Everything here
// stays independent of the library's closed-form paths: boxes are scored by
// counting grid cells, intervals by dense midpoint sampling, masks by naive
// double loops.

#include <algorithm>
#include <cmath>
#include <vector>

#include "stvg/geometry.hpp"
#include "stvg/identity.hpp"
#include "stvg/mask_db.hpp"
#include "stvg/masks.hpp"
#include "stvg/rng.hpp"

namespace oracles {

// Cell-counting IoU on an integer grid; exact for integer-coordinate boxes
// when cell == 1, approximate for continuous boxes at fine subdivision.
inline double grid_box_iou(const stvg::BBox& a, const stvg::BBox& b, double cell) {
  const double lo_x = std::min(a.x1, b.x1), hi_x = std::max(a.x2, b.x2);
  const double lo_y = std::min(a.y1, b.y1), hi_y = std::max(a.y2, b.y2);
  long long in_a = 0, in_b = 0, in_both = 0;
  const int nx = static_cast<int>(std::ceil((hi_x - lo_x) / cell));
  const int ny = static_cast<int>(std::ceil((hi_y - lo_y) / cell));
  for (int iy = 0; iy < ny; ++iy) {
    const double y = lo_y + (iy + 0.5) * cell;
    for (int ix = 0; ix < nx; ++ix) {
      const double x = lo_x + (ix + 0.5) * cell;
      const bool ina = x > a.x1 && x < a.x2 && y > a.y1 && y < a.y2;
      const bool inb = x > b.x1 && x < b.x2 && y > b.y1 && y < b.y2;
      in_a += ina;
      in_b += inb;
      in_both += ina && inb;
    }
  }
  const long long uni = in_a + in_b - in_both;
  if (uni == 0) return a == b ? 1.0 : 0.0;
  return static_cast<double>(in_both) / static_cast<double>(uni);
}

inline double grid_overlap_min(const stvg::BBox& a, const stvg::BBox& b, double cell) {
  const double lo_x = std::min(a.x1, b.x1), hi_x = std::max(a.x2, b.x2);
  const double lo_y = std::min(a.y1, b.y1), hi_y = std::max(a.y2, b.y2);
  long long in_a = 0, in_b = 0, in_both = 0;
  const int nx = static_cast<int>(std::ceil((hi_x - lo_x) / cell));
  const int ny = static_cast<int>(std::ceil((hi_y - lo_y) / cell));
  for (int iy = 0; iy < ny; ++iy) {
    const double y = lo_y + (iy + 0.5) * cell;
    for (int ix = 0; ix < nx; ++ix) {
      const double x = lo_x + (ix + 0.5) * cell;
      const bool ina = x > a.x1 && x < a.x2 && y > a.y1 && y < a.y2;
      const bool inb = x > b.x1 && x < b.x2 && y > b.y1 && y < b.y2;
      in_a += ina;
      in_b += inb;
      in_both += ina && inb;
    }
  }
  const long long smaller = std::min(in_a, in_b);
  if (smaller == 0) return a == b ? 1.0 : 0.0;
  return static_cast<double>(in_both) / static_cast<double>(smaller);
}

// Dense midpoint sampling at 1 ms; exact for endpoints on the millisecond
// grid.
inline double dense_temporal_iou(const stvg::TemporalInterval& p,
                                 const stvg::TemporalInterval& g) {
  const double step = 0.001;
  const double lo = std::min(p.t_s, g.t_s), hi = std::max(p.t_e, g.t_e);
  long long in_union = 0, in_inter = 0;
  const long long n = std::llround((hi - lo) / step);
  for (long long k = 0; k < n; ++k) {
    const double t = lo + (k + 0.5) * step;
    const bool inp = t > p.t_s && t < p.t_e;
    const bool ing = t > g.t_s && t < g.t_e;
    in_union += inp || ing;
    in_inter += inp && ing;
  }
  if (in_union == 0) return p.t_s == g.t_s ? 1.0 : 0.0;
  return static_cast<double>(in_inter) / static_cast<double>(in_union);
}

inline double naive_mask_iou(const stvg::RasterMask& a, const stvg::RasterMask& b) {
  long long inter = 0, uni = 0;
  for (int r = 0; r < a.height; ++r) {
    for (int c = 0; c < a.width; ++c) {
      const bool va = a.at(r, c), vb = b.at(r, c);
      inter += va && vb;
      uni += va || vb;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

// Enumeration of set bits for bbox/centroid checks.
struct BitStats {
  int min_r = 1 << 30, max_r = -1, min_c = 1 << 30, max_c = -1;
  double sum_r = 0, sum_c = 0;
  long long count = 0;
};

inline BitStats enumerate_bits(const stvg::RasterMask& m) {
  BitStats s;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      s.min_r = std::min(s.min_r, r);
      s.max_r = std::max(s.max_r, r);
      s.min_c = std::min(s.min_c, c);
      s.max_c = std::max(s.max_c, c);
      s.sum_r += r;
      s.sum_c += c;
      ++s.count;
    }
  }
  return s;
}

// Frame-enumeration vIoU, written from the interval definitions alone.
inline double frame_viou(const stvg::TemporalInterval& pred_iv, int pred_id,
                         const stvg::GroundTruthTube& gt, const stvg::MaskDatabase& db) {
  std::vector<int> pred_frames, gt_frames;
  for (int f = 0; f < db.frame_count(); ++f) {
    const long lo_p = std::lround(pred_iv.t_s * db.fps());
    const long hi_p = std::lround(pred_iv.t_e * db.fps());
    const long lo_g = std::lround(gt.interval.t_s * db.fps());
    const long hi_g = std::lround(gt.interval.t_e * db.fps());
    if (f >= lo_p && f <= hi_p) pred_frames.push_back(f);
    if (f >= lo_g && f <= hi_g) gt_frames.push_back(f);
  }
  std::vector<int> uni, inter;
  std::set_union(pred_frames.begin(), pred_frames.end(), gt_frames.begin(), gt_frames.end(),
                 std::back_inserter(uni));
  std::set_intersection(pred_frames.begin(), pred_frames.end(), gt_frames.begin(),
                        gt_frames.end(), std::back_inserter(inter));
  if (uni.empty()) return -1.0;  // caller treats as error case
  double sum = 0.0;
  for (int f : inter) {
    const auto gt_box = gt.box_at(f);
    if (!gt_box) continue;
    for (const stvg::InstanceRecord& rec : db.records(f)) {
      if (rec.instance_id != pred_id || stvg::rle_area(rec.mask) == 0) continue;
      const stvg::BBox box = stvg::rle_to_bbox(rec.mask);
      const double iw = std::min(box.x2, gt_box->x2) - std::max(box.x1, gt_box->x1);
      const double ih = std::min(box.y2, gt_box->y2) - std::max(box.y1, gt_box->y1);
      const double iarea = (iw > 0 && ih > 0) ? iw * ih : 0.0;
      const double uarea = box.area() + gt_box->area() - iarea;
      if (uarea > 0) sum += iarea / uarea;
      break;
    }
  }
  return sum / uni.size();
}

// Generators ------------------------------------------------------------

inline stvg::BBox random_int_box(stvg::Rng& rng, int extent) {
  const int x1 = rng.uniform_int(0, extent - 1);
  const int y1 = rng.uniform_int(0, extent - 1);
  const int x2 = rng.uniform_int(x1 + 1, extent);
  const int y2 = rng.uniform_int(y1 + 1, extent);
  return {static_cast<double>(x1), static_cast<double>(y1), static_cast<double>(x2),
          static_cast<double>(y2)};
}

inline stvg::BBox random_box(stvg::Rng& rng, double extent) {
  const double x1 = rng.uniform(0.0, extent);
  const double y1 = rng.uniform(0.0, extent);
  return {x1, y1, x1 + rng.uniform(0.5, extent / 2), y1 + rng.uniform(0.5, extent / 2)};
}

// Interval with endpoints on the millisecond grid.
inline stvg::TemporalInterval random_ms_interval(stvg::Rng& rng, double horizon) {
  const long a = rng.uniform_int(0, static_cast<int>(horizon * 1000));
  const long b = rng.uniform_int(static_cast<int>(a), static_cast<int>(horizon * 1000));
  return {a / 1000.0, b / 1000.0};
}

inline stvg::RasterMask random_mask(stvg::Rng& rng, int height, int width, double density) {
  stvg::RasterMask m = stvg::RasterMask::zeros(height, width);
  for (auto& bit : m.bits) bit = rng.bernoulli(density) ? 1 : 0;
  return m;
}

}  // namespace oracles
