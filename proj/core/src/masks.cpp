#include "stvg/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stvg/errors.hpp"

namespace stvg {

RasterMask RasterMask::zeros(int height, int width) {
  RasterMask m;
  m.height = height;
  m.width = width;
  m.bits.assign(static_cast<std::size_t>(height) * width, 0);
  return m;
}

int RasterMask::area() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

RleMask rle_encode(const RasterMask& mask) {
  RleMask rle;
  rle.height = mask.height;
  rle.width = mask.width;
  std::uint8_t polarity = 0;
  int run = 0;
  for (std::uint8_t b : mask.bits) {
    const std::uint8_t v = b ? 1 : 0;
    if (v == polarity) {
      ++run;
    } else {
      rle.runs.push_back(run);
      polarity = v;
      run = 1;
    }
  }
  rle.runs.push_back(run);
  return rle;
}

RasterMask rle_decode(const RleMask& rle) {
  if (rle.height <= 0 || rle.width <= 0) throw DataError("rle_decode: non-positive dimensions");
  const long long total = static_cast<long long>(rle.height) * rle.width;
  long long sum = 0;
  for (int r : rle.runs) {
    if (r < 0) throw DataError("rle_decode: negative run length");
    sum += r;
  }
  if (sum != total) throw DataError("rle_decode: runs sum to " + std::to_string(sum) +
                                    ", expected " + std::to_string(total));
  RasterMask mask = RasterMask::zeros(rle.height, rle.width);
  std::size_t pos = 0;
  std::uint8_t polarity = 0;
  for (int r : rle.runs) {
    if (polarity) std::fill_n(mask.bits.begin() + pos, r, std::uint8_t{1});
    pos += static_cast<std::size_t>(r);
    polarity ^= 1;
  }
  return mask;
}

int rle_area(const RleMask& rle) {
  int area = 0;
  for (std::size_t i = 1; i < rle.runs.size(); i += 2) area += rle.runs[i];
  return area;
}

BBox rle_to_bbox(const RleMask& rle) {
  const int w = rle.width;
  long long pos = 0;
  int min_r = rle.height, max_r = -1, min_c = rle.width, max_c = -1;
  bool polarity = false;
  for (int run : rle.runs) {
    if (polarity && run > 0) {
      const long long first = pos;
      const long long last = pos + run - 1;
      const int r0 = static_cast<int>(first / w);
      const int r1 = static_cast<int>(last / w);
      min_r = std::min(min_r, r0);
      max_r = std::max(max_r, r1);
      if (r0 == r1) {
        min_c = std::min(min_c, static_cast<int>(first % w));
        max_c = std::max(max_c, static_cast<int>(last % w));
      } else {
        // A run crossing a row boundary touches both column extremes.
        min_c = 0;
        max_c = w - 1;
      }
    }
    pos += run;
    polarity = !polarity;
  }
  if (max_r < 0) throw DataError("rle_to_bbox: empty mask");
  return BBox{static_cast<double>(min_c), static_cast<double>(min_r),
              static_cast<double>(max_c + 1), static_cast<double>(max_r + 1)};
}

double mask_iou(const RasterMask& a, const RasterMask& b) {
  if (a.height != b.height || a.width != b.width)
    throw DataError("mask_iou: dimension mismatch");
  long long inter = 0, uni = 0;
  const std::size_t n = a.bits.size();
  for (std::size_t i = 0; i < n; ++i) {
    const bool va = a.bits[i] != 0;
    const bool vb = b.bits[i] != 0;
    inter += va && vb;
    uni += va || vb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BBox mask_to_bbox(const RasterMask& mask) {
  int min_r = mask.height, max_r = -1, min_c = mask.width, max_c = -1;
  for (int r = 0; r < mask.height; ++r) {
    const std::uint8_t* row = mask.bits.data() + static_cast<std::size_t>(r) * mask.width;
    for (int c = 0; c < mask.width; ++c) {
      if (!row[c]) continue;
      min_r = std::min(min_r, r);
      max_r = std::max(max_r, r);
      min_c = std::min(min_c, c);
      max_c = std::max(max_c, c);
    }
  }
  if (max_r < 0) throw DataError("mask_to_bbox: empty mask");
  return BBox{static_cast<double>(min_c), static_cast<double>(min_r),
              static_cast<double>(max_c + 1), static_cast<double>(max_r + 1)};
}

std::pair<double, double> centroid(const RasterMask& mask) {
  long long sum_r = 0, sum_c = 0, count = 0;
  for (int r = 0; r < mask.height; ++r) {
    const std::uint8_t* row = mask.bits.data() + static_cast<std::size_t>(r) * mask.width;
    for (int c = 0; c < mask.width; ++c) {
      if (!row[c]) continue;
      sum_r += r;
      sum_c += c;
      ++count;
    }
  }
  if (count == 0) throw DataError("centroid: empty mask");
  return {static_cast<double>(sum_c) / count, static_cast<double>(sum_r) / count};
}

int default_boundary_tolerance(int height, int width) {
  const double diag = std::sqrt(static_cast<double>(height) * height +
                                static_cast<double>(width) * width);
  return std::max(1, static_cast<int>(std::lround(0.008 * diag)));
}

namespace {

// Foreground pixels with a background or out-of-frame 4-neighbor.
RasterMask boundary_of(const RasterMask& m) {
  RasterMask b = RasterMask::zeros(m.height, m.width);
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      const bool edge = r == 0 || r == m.height - 1 || c == 0 || c == m.width - 1 ||
                        !m.at(r - 1, c) || !m.at(r + 1, c) || !m.at(r, c - 1) || !m.at(r, c + 1);
      if (edge) b.set(r, c, true);
    }
  }
  return b;
}

RasterMask dilate_disc(const RasterMask& m, int radius) {
  if (radius <= 0) return m;
  std::vector<std::pair<int, int>> offsets;
  for (int dr = -radius; dr <= radius; ++dr)
    for (int dc = -radius; dc <= radius; ++dc)
      if (dr * dr + dc * dc <= radius * radius) offsets.emplace_back(dr, dc);
  RasterMask out = RasterMask::zeros(m.height, m.width);
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      for (auto [dr, dc] : offsets) {
        const int rr = r + dr, cc = c + dc;
        if (rr >= 0 && rr < m.height && cc >= 0 && cc < m.width) out.set(rr, cc, true);
      }
    }
  }
  return out;
}

// Fraction of `points` covered by `region`; 1 on an empty point set.
double coverage(const RasterMask& points, const RasterMask& region) {
  long long total = 0, hit = 0;
  const std::size_t n = points.bits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!points.bits[i]) continue;
    ++total;
    hit += region.bits[i] != 0;
  }
  return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

double boundary_f(const RasterMask& pred, const RasterMask& gt, int tolerance) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw DataError("boundary_f: dimension mismatch");
  if (tolerance < 0) throw DataError("boundary_f: negative tolerance");
  const RasterMask pb = boundary_of(pred);
  const RasterMask gb = boundary_of(gt);
  const bool pe = pb.area() == 0;
  const bool ge = gb.area() == 0;
  if (pe && ge) return 1.0;
  if (pe || ge) return 0.0;
  const double precision = coverage(pb, dilate_disc(gb, tolerance));
  const double recall = coverage(gb, dilate_disc(pb, tolerance));
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

RasterMask rect_mask(int height, int width, const BBox& box) {
  RasterMask m = RasterMask::zeros(height, width);
  const int r0 = std::max(0, static_cast<int>(std::lround(box.y1)));
  const int r1 = std::min(height, static_cast<int>(std::lround(box.y2)));
  const int c0 = std::max(0, static_cast<int>(std::lround(box.x1)));
  const int c1 = std::min(width, static_cast<int>(std::lround(box.x2)));
  for (int r = r0; r < r1; ++r)
    std::fill_n(m.bits.begin() + static_cast<std::size_t>(r) * width + c0, std::max(0, c1 - c0),
                std::uint8_t{1});
  return m;
}

RasterMask ellipse_mask(int height, int width, double cx, double cy, double rx, double ry) {
  RasterMask m = RasterMask::zeros(height, width);
  if (rx <= 0.0 || ry <= 0.0) return m;
  const int r0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
  const int r1 = std::min(height - 1, static_cast<int>(std::ceil(cy + ry)));
  const int c0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
  const int c1 = std::min(width - 1, static_cast<int>(std::ceil(cx + rx)));
  for (int r = r0; r <= r1; ++r) {
    const double dy = (r + 0.5 - cy) / ry;
    for (int c = c0; c <= c1; ++c) {
      const double dx = (c + 0.5 - cx) / rx;
      if (dx * dx + dy * dy <= 1.0) m.set(r, c, true);
    }
  }
  return m;
}

}  // namespace stvg
