#include "stvg/mask_db.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "internal/text.hpp"
#include "stvg/errors.hpp"

namespace stvg {

namespace {

constexpr const char* kMagic = "maskdb-v1";

int parse_int(const std::string& s, const std::string& what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("invalid " + what + ": '" + s + "'");
  return value;
}

double parse_dbl(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double value = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty())
    throw DataError("invalid " + what + ": '" + s + "'");
  return value;
}

}  // namespace

void validate_category(const std::string& category) {
  if (category.empty()) throw DataError("empty category");
  for (char c : category) {
    if (c == ',' || c == '|' || static_cast<unsigned char>(c) < 0x20)
      throw DataError("category contains a reserved character: '" + category + "'");
  }
}

MaskDatabase::MaskDatabase(int height, int width, double fps, int frame_count)
    : height_(height), width_(width), fps_(fps) {
  if (height <= 0 || width <= 0) throw DataError("mask database needs positive dimensions");
  if (fps <= 0.0) throw DataError("mask database needs a positive fps");
  frames_.resize(frame_count);
}

void MaskDatabase::ensure_frames(int frame_count) {
  if (frame_count > static_cast<int>(frames_.size())) frames_.resize(frame_count);
}

void MaskDatabase::insert(int frame_index, InstanceRecord record) {
  if (frame_index < 0) throw DataError("negative frame index");
  if (record.instance_id <= 0) throw DataError("instance id must be positive");
  validate_category(record.category);
  if (record.mask.height != height_ || record.mask.width != width_)
    throw DataError("mask dimensions do not match the video frame");
  const auto it = categories_.find(record.instance_id);
  if (it != categories_.end() && it->second != record.category)
    throw DataError("instance " + std::to_string(record.instance_id) +
                    " already registered with category '" + it->second + "'");
  ensure_frames(frame_index + 1);
  auto& frame = frames_[frame_index];
  auto pos = std::lower_bound(frame.begin(), frame.end(), record.instance_id,
                              [](const InstanceRecord& r, int id) { return r.instance_id < id; });
  if (pos != frame.end() && pos->instance_id == record.instance_id) {
    *pos = std::move(record);
  } else {
    categories_.emplace(record.instance_id, record.category);
    frame.insert(pos, std::move(record));
  }
}

const std::vector<InstanceRecord>& MaskDatabase::records(int frame_index) const {
  if (frame_index < 0 || frame_index >= frame_count())
    throw DataError("frame index out of range: " + std::to_string(frame_index));
  return frames_[frame_index];
}

bool MaskDatabase::has_instance(int instance_id) const {
  return categories_.count(instance_id) > 0;
}

const std::string& MaskDatabase::category_of(int instance_id) const {
  const auto it = categories_.find(instance_id);
  if (it == categories_.end())
    throw DataError("unknown instance id: " + std::to_string(instance_id));
  return it->second;
}

std::vector<int> MaskDatabase::instance_ids() const {
  std::vector<int> ids;
  ids.reserve(categories_.size());
  for (const auto& [id, category] : categories_) ids.push_back(id);
  return ids;
}

std::optional<BBox> MaskDatabase::box_of(int frame_index, int instance_id) const {
  if (frame_index < 0 || frame_index >= frame_count()) return std::nullopt;
  for (const InstanceRecord& rec : frames_[frame_index]) {
    if (rec.instance_id != instance_id || rle_area(rec.mask) == 0) continue;
    return rle_to_bbox(rec.mask);
  }
  return std::nullopt;
}

MaskDatabase MaskDatabase::filter_small(double theta) const {
  if (theta < 0.0 || theta > 1.0) throw DataError("filter threshold must lie in [0,1]");
  MaskDatabase out(height_, width_, fps_, frame_count());
  for (int f = 0; f < frame_count(); ++f) {
    std::map<std::string, int> max_area;
    for (const InstanceRecord& rec : frames_[f]) {
      int& m = max_area[rec.category];
      m = std::max(m, rle_area(rec.mask));
    }
    for (const InstanceRecord& rec : frames_[f]) {
      if (static_cast<double>(rle_area(rec.mask)) >= theta * max_area[rec.category])
        out.insert(f, rec);
    }
  }
  return out;
}

InstanceTube MaskDatabase::tube_of(int instance_id) const {
  if (!has_instance(instance_id))
    throw DataError("unknown instance id: " + std::to_string(instance_id));
  InstanceTube tube;
  tube.instance_id = instance_id;
  for (int f = 0; f < frame_count(); ++f) {
    for (const InstanceRecord& rec : frames_[f]) {
      if (rec.instance_id != instance_id) continue;
      tube.entries.push_back({f, rle_to_bbox(rec.mask), rec.mask});
    }
  }
  return tube;
}

void MaskDatabase::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << kMagic << ' ' << height_ << ' ' << width_ << ' ' << detail::fmt_double(fps_) << ' '
      << frame_count() << '\n';
  for (int f = 0; f < frame_count(); ++f) {
    out << f;
    for (const InstanceRecord& rec : frames_[f]) {
      out << '|' << rec.instance_id << ',' << rec.category << ',';
      for (std::size_t i = 0; i < rec.mask.runs.size(); ++i) {
        if (i) out << ' ';
        out << rec.mask.runs[i];
      }
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

MaskDatabase MaskDatabase::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = detail::split(detail::trim(line), ' ');
  if (header.size() != 5 || header[0] != kMagic)
    throw DataError(path + ": not a " + std::string(kMagic) + " file");
  const int height = parse_int(header[1], "height");
  const int width = parse_int(header[2], "width");
  const double fps = parse_dbl(header[3], "fps");
  const int frame_count = parse_int(header[4], "frame count");
  MaskDatabase db(height, width, fps, frame_count);
  for (int f = 0; f < frame_count; ++f) {
    if (!std::getline(in, line))
      throw DataError(path + ": truncated at frame " + std::to_string(f));
    const auto fields = detail::split(detail::trim(line), '|');
    if (parse_int(fields[0], "frame index") != f)
      throw DataError(path + ": expected frame " + std::to_string(f) + ", got '" + fields[0] + "'");
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::string& rec_text = fields[i];
      const std::size_t c1 = rec_text.find(',');
      const std::size_t c2 = rec_text.find(',', c1 == std::string::npos ? c1 : c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        throw DataError(path + ": malformed record '" + rec_text + "' in frame " +
                        std::to_string(f));
      InstanceRecord rec;
      rec.instance_id = parse_int(rec_text.substr(0, c1), "instance id");
      rec.category = rec_text.substr(c1 + 1, c2 - c1 - 1);
      rec.mask.height = height;
      rec.mask.width = width;
      std::istringstream runs(rec_text.substr(c2 + 1));
      long long sum = 0;
      int run = 0;
      while (runs >> run) {
        if (run < 0) throw DataError(path + ": negative run length in frame " + std::to_string(f));
        rec.mask.runs.push_back(run);
        sum += run;
      }
      if (!runs.eof()) throw DataError(path + ": malformed run list in frame " + std::to_string(f));
      if (sum != static_cast<long long>(height) * width)
        throw DataError(path + ": run lengths do not cover frame " + std::to_string(f));
      db.insert(f, std::move(rec));
    }
  }
  return db;
}

}  // namespace stvg
