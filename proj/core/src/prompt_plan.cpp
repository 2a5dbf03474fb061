#include "stvg/prompt_plan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "internal/text.hpp"
#include "stvg/errors.hpp"

namespace stvg {

namespace {

struct GlyphEntry {
  char c;
  const char* rows[7];
};

// clang-format off
const GlyphEntry kFont[] = {
  {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
  {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
  {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
  {'3', {".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."}},
  {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
  {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
  {'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
  {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
  {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
  {'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
  {'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
  {'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
  {'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
  {'D', {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."}},
  {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
  {'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
  {'G', {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."}},
  {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
  {'I', {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
  {'J', {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
  {'K', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
  {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
  {'M', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
  {'N', {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"}},
  {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
  {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
  {'Q', {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"}},
  {'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
  {'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
  {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
  {'U', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
  {'V', {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
  {'W', {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"}},
  {'X', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
  {'Y', {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."}},
  {'Z', {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"}},
  {'a', {".....", ".....", ".###.", "....#", ".####", "#...#", ".####"}},
  {'b', {"#....", "#....", "####.", "#...#", "#...#", "#...#", "####."}},
  {'c', {".....", ".....", ".###.", "#....", "#....", "#...#", ".###."}},
  {'d', {"....#", "....#", ".####", "#...#", "#...#", "#...#", ".####"}},
  {'e', {".....", ".....", ".###.", "#...#", "#####", "#....", ".###."}},
  {'f', {"..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."}},
  {'g', {".....", ".####", "#...#", "#...#", ".####", "....#", ".###."}},
  {'h', {"#....", "#....", "####.", "#...#", "#...#", "#...#", "#...#"}},
  {'i', {"..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."}},
  {'j', {"...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."}},
  {'k', {"#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."}},
  {'l', {".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
  {'m', {".....", ".....", "##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#"}},
  {'n', {".....", ".....", "####.", "#...#", "#...#", "#...#", "#...#"}},
  {'o', {".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."}},
  {'p', {".....", "####.", "#...#", "#...#", "####.", "#....", "#...."}},
  {'q', {".....", ".####", "#...#", "#...#", ".####", "....#", "....#"}},
  {'r', {".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."}},
  {'s', {".....", ".....", ".####", "#....", ".###.", "....#", "####."}},
  {'t', {".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##."}},
  {'u', {".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"}},
  {'v', {".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
  {'w', {".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#."}},
  {'x', {".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"}},
  {'y', {".....", ".....", "#...#", "#...#", ".####", "....#", ".###."}},
  {'z', {".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"}},
};
// clang-format on

std::string letters_label(int id, char base) {
  // Bijective base-26: 1 -> A, 26 -> Z, 27 -> AA.
  std::string label;
  int n = id;
  while (n > 0) {
    --n;
    label.push_back(static_cast<char>(base + n % 26));
    n /= 26;
  }
  std::reverse(label.begin(), label.end());
  return label;
}

const char* glyphset_token(GlyphSet set) {
  switch (set) {
    case GlyphSet::Numbers: return "numbers";
    case GlyphSet::UppercaseLetters: return "upper";
    case GlyphSet::LowercaseLetters: return "lower";
    case GlyphSet::Mixed: return "mixed";
  }
  return "numbers";
}

GlyphSet glyphset_from_token(const std::string& token) {
  if (token == "numbers") return GlyphSet::Numbers;
  if (token == "upper") return GlyphSet::UppercaseLetters;
  if (token == "lower") return GlyphSet::LowercaseLetters;
  if (token == "mixed") return GlyphSet::Mixed;
  throw DataError("unknown glyph set '" + token + "'");
}

}  // namespace

const char* const* glyph_bitmap(char c) {
  for (const GlyphEntry& g : kFont)
    if (g.c == c) return g.rows;
  return nullptr;
}

std::string label_for_id(GlyphSet set, int id) {
  if (id <= 0) throw DataError("labels exist for positive ids only");
  switch (set) {
    case GlyphSet::Numbers:
      return std::to_string(id);
    case GlyphSet::UppercaseLetters:
      return letters_label(id, 'A');
    case GlyphSet::LowercaseLetters:
      return letters_label(id, 'a');
    case GlyphSet::Mixed:
      return id < 10 ? std::to_string(id) : letters_label(id - 9, 'A');
  }
  return std::to_string(id);
}

FrameBudget frame_budget(double duration_s, double pixel_budget, double fps, double aspect) {
  if (duration_s <= 0.0) throw ConfigError("frame_budget: duration must be positive");
  if (pixel_budget <= 0.0 || fps <= 0.0 || aspect <= 0.0)
    throw ConfigError("frame_budget: budget, fps and aspect must be positive");
  FrameBudget out;
  out.frame_count = std::max(1, static_cast<int>(std::lround(duration_s * fps)));
  const double per_frame_elements = pixel_budget / out.frame_count;
  const double pixels = per_frame_elements / 3.0;  // RGB counts against the budget
  const double h = std::sqrt(pixels / aspect);
  const double w = h * aspect;
  const auto round_even = [](double v) {
    return std::max(2, 2 * static_cast<int>(std::lround(v / 2.0)));
  };
  out.height = round_even(h);
  out.width = round_even(w);
  return out;
}

int glyph_scale(double font_size) {
  return std::max(1, static_cast<int>(std::lround(font_size / 7.0)));
}

std::pair<int, int> label_extent(const std::string& label, int scale) {
  if (label.empty()) return {0, 7 * scale};
  const int chars = static_cast<int>(label.size());
  return {(6 * chars - 1) * scale, 7 * scale};
}

PromptPlan plan_prompts(const MaskDatabase& db, double theta, const MarkerStyle& style) {
  const MaskDatabase filtered = db.filter_small(theta);
  PromptPlan plan;
  plan.height = db.height();
  plan.width = db.width();
  plan.style = style;
  plan.frames.resize(db.frame_count());
  const int scale = glyph_scale(style.font_size);
  for (int f = 0; f < filtered.frame_count(); ++f) {
    for (const InstanceRecord& rec : filtered.records(f)) {
      if (rle_area(rec.mask) == 0) continue;
      PromptPlan::Marker marker;
      marker.instance_id = rec.instance_id;
      marker.label = label_for_id(style.glyphs, rec.instance_id);
      const auto [cx, cy] = centroid(rle_decode(rec.mask));
      const auto [gw, gh] = label_extent(marker.label, scale);
      const auto clamp_center = [](double v, int extent, int limit) {
        if (extent >= limit) return limit / 2.0;
        return std::clamp(v, extent / 2.0, limit - extent / 2.0);
      };
      marker.anchor_x = clamp_center(cx, gw, plan.width);
      marker.anchor_y = clamp_center(cy, gh, plan.height);
      plan.frames[f].push_back(std::move(marker));
    }
  }
  return plan;
}

RgbImage RgbImage::filled(int height, int width, std::array<std::uint8_t, 3> color) {
  RgbImage img;
  img.height = height;
  img.width = width;
  img.rgb.resize(static_cast<std::size_t>(height) * width * 3);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = color[0];
    img.rgb[i + 1] = color[1];
    img.rgb[i + 2] = color[2];
  }
  return img;
}

std::vector<RgbImage> rasterize(const PromptPlan& plan, std::vector<RgbImage> frames) {
  if (frames.size() != plan.frames.size())
    throw DataError("rasterize: frame count does not match the plan");
  const int scale = glyph_scale(plan.style.font_size);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    RgbImage& img = frames[f];
    if (img.height != plan.height || img.width != plan.width)
      throw DataError("rasterize: frame dimensions do not match the plan");
    for (const PromptPlan::Marker& marker : plan.frames[f]) {
      const auto [gw, gh] = label_extent(marker.label, scale);
      const int left = static_cast<int>(std::lround(marker.anchor_x - gw / 2.0));
      const int top = static_cast<int>(std::lround(marker.anchor_y - gh / 2.0));
      int cursor = left;
      for (char c : marker.label) {
        const char* const* rows = glyph_bitmap(c);
        if (!rows) throw DataError(std::string("rasterize: no glyph for '") + c + "'");
        for (int r = 0; r < 7; ++r) {
          for (int k = 0; k < 5; ++k) {
            if (rows[r][k] != '#') continue;
            for (int dr = 0; dr < scale; ++dr) {
              const int y = top + r * scale + dr;
              if (y < 0 || y >= img.height) continue;
              for (int dc = 0; dc < scale; ++dc) {
                const int x = cursor + k * scale + dc;
                if (x < 0 || x >= img.width) continue;
                std::uint8_t* px = img.rgb.data() + (static_cast<std::size_t>(y) * img.width + x) * 3;
                px[0] = plan.style.color[0];
                px[1] = plan.style.color[1];
                px[2] = plan.style.color[2];
              }
            }
          }
        }
        cursor += 6 * scale;
      }
    }
  }
  return frames;
}

void PromptPlan::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "promptplan-v1 " << height << ' ' << width << ' ' << frames.size() << ' '
      << glyphset_token(style.glyphs) << ' ' << detail::fmt_double(style.font_size) << ' '
      << int{style.color[0]} << ' ' << int{style.color[1]} << ' ' << int{style.color[2]} << '\n';
  for (std::size_t f = 0; f < frames.size(); ++f) {
    out << f;
    for (const Marker& m : frames[f]) {
      out << '|' << m.instance_id << ',' << m.label << ',' << detail::fmt_double(m.anchor_x) << ','
          << detail::fmt_double(m.anchor_y);
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

PromptPlan PromptPlan::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = detail::split(detail::trim(line), ' ');
  if (header.size() != 9 || header[0] != "promptplan-v1")
    throw DataError(path + ": not a promptplan-v1 file");
  PromptPlan plan;
  plan.height = std::stoi(header[1]);
  plan.width = std::stoi(header[2]);
  const int frame_count = std::stoi(header[3]);
  plan.style.glyphs = glyphset_from_token(header[4]);
  plan.style.font_size = std::stod(header[5]);
  plan.style.color = {static_cast<std::uint8_t>(std::stoi(header[6])),
                      static_cast<std::uint8_t>(std::stoi(header[7])),
                      static_cast<std::uint8_t>(std::stoi(header[8]))};
  plan.frames.resize(frame_count);
  for (int f = 0; f < frame_count; ++f) {
    if (!std::getline(in, line)) throw DataError(path + ": truncated at frame " + std::to_string(f));
    const auto fields = detail::split(detail::trim(line), '|');
    if (std::stoi(fields[0]) != f) throw DataError(path + ": frame indices out of order");
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto parts = detail::split(fields[i], ',');
      if (parts.size() != 4) throw DataError(path + ": malformed marker '" + fields[i] + "'");
      Marker m;
      m.instance_id = std::stoi(parts[0]);
      m.label = parts[1];
      m.anchor_x = std::stod(parts[2]);
      m.anchor_y = std::stod(parts[3]);
      plan.frames[f].push_back(std::move(m));
    }
  }
  return plan;
}

void save_frames(const std::string& path, const std::vector<RgbImage>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  const int h = frames.empty() ? 0 : frames[0].height;
  const int w = frames.empty() ? 0 : frames[0].width;
  out << "rgbframes-v1 " << frames.size() << ' ' << h << ' ' << w << '\n';
  for (const RgbImage& img : frames) {
    if (img.height != h || img.width != w)
      throw DataError("save_frames: frames must share dimensions");
    out.write(reinterpret_cast<const char*>(img.rgb.data()),
              static_cast<std::streamsize>(img.rgb.size()));
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<RgbImage> load_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = detail::split(detail::trim(line), ' ');
  if (header.size() != 4 || header[0] != "rgbframes-v1")
    throw DataError(path + ": not a rgbframes-v1 file");
  const int count = std::stoi(header[1]);
  const int h = std::stoi(header[2]);
  const int w = std::stoi(header[3]);
  std::vector<RgbImage> frames;
  frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    RgbImage img;
    img.height = h;
    img.width = w;
    img.rgb.resize(static_cast<std::size_t>(h) * w * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size()))
      throw DataError(path + ": truncated frame data");
    frames.push_back(std::move(img));
  }
  return frames;
}

}  // namespace stvg
