#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stvg/geometry.hpp"

namespace stvg {

// Row-major binary grid, one byte per pixel.
struct RasterMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  static RasterMask zeros(int height, int width);

  bool at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col] != 0; }
  void set(int row, int col, bool value) {
    bits[static_cast<std::size_t>(row) * width + col] = value ? 1 : 0;
  }
  int area() const;

  bool operator==(const RasterMask&) const = default;
};

// Run-length encoded mask. Runs alternate background/foreground in row-major
// order and always start with a background run (possibly zero).
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<int> runs;

  bool operator==(const RleMask&) const = default;
};

// Canonical encoding: a leading background run (zero allowed), no other zero
// runs, strict polarity alternation.
RleMask rle_encode(const RasterMask& mask);

// Throws DataError when the runs are negative or do not sum to height*width.
RasterMask rle_decode(const RleMask& rle);

// Foreground pixel count straight from the runs.
int rle_area(const RleMask& rle);

// Tight box of the foreground without decoding. Throws DataError on an
// empty mask.
BBox rle_to_bbox(const RleMask& rle);

// |a AND b| / |a OR b|; 1 when both masks are empty. Throws DataError on a
// dimension mismatch.
double mask_iou(const RasterMask& a, const RasterMask& b);

// Tight box covering all set pixels, in continuous coordinates (pixel (r,c)
// occupies [c,c+1) x [r,r+1)). Throws DataError on an empty mask.
BBox mask_to_bbox(const RasterMask& mask);

// Arithmetic mean of set-pixel (col,row) coordinates. Throws DataError on an
// empty mask.
std::pair<double, double> centroid(const RasterMask& mask);

// max(1, round(0.008 * image diagonal)): the usual video-segmentation
// boundary tolerance.
int default_boundary_tolerance(int height, int width);

// Boundary F-measure: 4-connected boundaries, disc dilation of the given
// radius, F = 2PR/(P+R). 1 when both boundaries are empty, 0 when exactly
// one is.
double boundary_f(const RasterMask& pred, const RasterMask& gt, int tolerance);

// Filled axis-aligned rectangle; box edges round to the nearest pixel
// boundary and the result is clipped to the grid.
RasterMask rect_mask(int height, int width, const BBox& box);

// Filled axis-aligned ellipse with center (cx,cy) and radii (rx,ry), clipped
// to the grid. A pixel is set when its center lies inside the ellipse.
RasterMask ellipse_mask(int height, int width, double cx, double cy, double rx, double ry);

}  // namespace stvg
