#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stvg/mask_db.hpp"

namespace stvg {

enum class GlyphSet { Numbers, UppercaseLetters, LowercaseLetters, Mixed };

// Marker appearance; defaults follow the strongest observed configuration:
// red numerals at size 20.
struct MarkerStyle {
  GlyphSet glyphs = GlyphSet::Numbers;
  double font_size = 20.0;
  std::array<std::uint8_t, 3> color{255, 0, 0};

  bool operator==(const MarkerStyle&) const = default;
};

// Id-to-label mapping of a glyph set. Numbers are decimal; letters use
// bijective base-26 so id 27 becomes "AA"; mixed is decimal below 10 and
// uppercase letters from 10 on.
std::string label_for_id(GlyphSet set, int id);

// Frame count and per-frame resolution fitting a total element budget.
// Element budget per frame counts all three channels: frames * H * W * 3
// stays within the budget up to even-dimension rounding.
struct FrameBudget {
  int frame_count = 0;
  int height = 0;
  int width = 0;
};

FrameBudget frame_budget(double duration_s, double pixel_budget = 1.6e6, double fps = 2.0,
                         double aspect = 1.0);

// Marker placements for a whole video.
struct PromptPlan {
  struct Marker {
    int instance_id = 0;
    std::string label;
    double anchor_x = 0.0;
    double anchor_y = 0.0;

    bool operator==(const Marker&) const = default;
  };

  int height = 0;
  int width = 0;
  MarkerStyle style;
  std::vector<std::vector<Marker>> frames;

  void save(const std::string& path) const;
  static PromptPlan load(const std::string& path);

  bool operator==(const PromptPlan&) const = default;
};

// Plans one marker per instance surviving the size filter, anchored at the
// mask centroid and clamped so the glyph box stays on-frame.
PromptPlan plan_prompts(const MaskDatabase& db, double theta = 1.0 / 3.0,
                        const MarkerStyle& style = {});

// Interleaved RGB frame, row-major.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  static RgbImage filled(int height, int width, std::array<std::uint8_t, 3> color);

  bool operator==(const RgbImage&) const = default;
};

// Integer scale applied to the 5x7 glyph grid for a font size.
int glyph_scale(double font_size);

// Pixel extent (width, height) of a label at a scale: 5-dot columns plus a
// 1-dot gap between characters.
std::pair<int, int> label_extent(const std::string& label, int scale);

// Stamps every marker onto its frame in ascending-id order, recoloring
// exactly the glyph stencil pixels. Throws DataError when frame dimensions
// disagree with the plan.
std::vector<RgbImage> rasterize(const PromptPlan& plan, std::vector<RgbImage> frames);

// Raw frame dump: one text header line, then tightly packed RGB bytes.
void save_frames(const std::string& path, const std::vector<RgbImage>& frames);
std::vector<RgbImage> load_frames(const std::string& path);

// 7 rows of 5 chars ('#' = dot) for a supported glyph, nullptr otherwise.
const char* const* glyph_bitmap(char c);

}  // namespace stvg
