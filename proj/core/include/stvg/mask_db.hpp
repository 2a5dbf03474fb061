#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stvg/geometry.hpp"
#include "stvg/masks.hpp"

namespace stvg {

// One (instance, category, mask) entry of a frame.
struct InstanceRecord {
  int instance_id = 0;
  std::string category;
  RleMask mask;

  bool operator==(const InstanceRecord&) const = default;
};

// One instance's per-frame boxes and masks, frames strictly increasing.
struct InstanceTube {
  struct Entry {
    int frame_index = 0;
    BBox box;
    RleMask mask;
  };
  int instance_id = 0;
  std::vector<Entry> entries;
};

// Per-frame store of instance records for one video. Frame indices are
// contiguous from 0; an instance keeps a single category across the video.
class MaskDatabase {
 public:
  MaskDatabase() = default;
  MaskDatabase(int height, int width, double fps = 2.0, int frame_count = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  double fps() const { return fps_; }
  int frame_count() const { return static_cast<int>(frames_.size()); }

  double frame_to_seconds(int frame_index) const { return frame_index / fps_; }

  // Extends the video with empty frames so that index `frame_count-1` exists.
  void ensure_frames(int frame_count);

  // Inserts or replaces the (frame, id) record. Throws DataError on a mask
  // dimension mismatch, a category conflict for an existing id, a malformed
  // category, or a non-positive id.
  void insert(int frame_index, InstanceRecord record);

  // Records of one frame, sorted by instance id.
  const std::vector<InstanceRecord>& records(int frame_index) const;

  bool has_instance(int instance_id) const;
  const std::string& category_of(int instance_id) const;

  // All instance ids, ascending.
  std::vector<int> instance_ids() const;

  // Tight box of the instance's mask in one frame, without decoding.
  std::optional<BBox> box_of(int frame_index, int instance_id) const;

  // Drops, per frame and per category, records whose mask area falls below
  // theta times the largest same-category mask area in that frame. Filtering
  // serves prompt placement; keep the unfiltered database for scoring.
  MaskDatabase filter_small(double theta) const;

  // All frames containing the id, in order. Throws DataError on an unknown id.
  InstanceTube tube_of(int instance_id) const;

  void save(const std::string& path) const;
  static MaskDatabase load(const std::string& path);

  bool operator==(const MaskDatabase&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  double fps_ = 2.0;
  std::vector<std::vector<InstanceRecord>> frames_;
  std::map<int, std::string> categories_;
};

// Rejects categories that would break the line formats: empty strings or
// ones containing ',', '|', or control characters.
void validate_category(const std::string& category);

}  // namespace stvg
