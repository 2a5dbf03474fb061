#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stvg/geometry.hpp"
#include "stvg/mask_db.hpp"
#include "stvg/masks.hpp"

namespace stvg {

// One detector output box.
struct Detection {
  int frame_index = 0;
  std::string category;
  double confidence = 0.0;
  BBox box;
};

// Detections for a whole video, frame indices non-decreasing.
struct DetectionStream {
  std::vector<Detection> items;

  // Stable-sorts by frame so the invariant holds regardless of input order.
  void normalize();

  // CSV lines: frame,category,confidence,x1,y1,x2,y2. Parse failures name
  // the offending line.
  static DetectionStream load(const std::string& path);
  void save(const std::string& path) const;
};

// Target annotation: the grounded interval plus per-frame boxes inside it.
struct GroundTruthTube {
  TemporalInterval interval;
  std::map<int, BBox> boxes;

  std::optional<BBox> box_at(int frame_index) const {
    const auto it = boxes.find(frame_index);
    if (it == boxes.end()) return std::nullopt;
    return it->second;
  }
};

// Per-frame winners, the vote histogram, and the voted answer id.
struct AssignmentResult {
  std::map<int, int> per_frame_ids;
  std::map<int, int> histogram;
  int answer_id = 0;
};

// Supplies instance masks across frames. `step` of +1/-1 tracks the mask to
// the adjacent frame; 0 snaps a seed mask (e.g. a detection rectangle) onto
// the underlying segmentation in the same frame. nullopt means the instance
// cannot be followed there.
class MaskPropagator {
 public:
  virtual ~MaskPropagator() = default;
  virtual std::optional<RasterMask> propagate(int frame_index, const RasterMask& mask,
                                              int step) const = 0;
};

// Propagation backed by an existing tracks database: the seed is matched to
// the best-overlapping record, then followed along that instance's tube.
// Owns its copy of the tracks, so temporaries are safe to pass.
class MaskDbPropagator : public MaskPropagator {
 public:
  explicit MaskDbPropagator(MaskDatabase tracks) : tracks_(std::move(tracks)) {}
  std::optional<RasterMask> propagate(int frame_index, const RasterMask& mask,
                                      int step) const override;

 private:
  MaskDatabase tracks_;
};

// Carries the seed mask unchanged from frame to frame; a degenerate tracker
// for detection-only inputs.
class StaticPropagator : public MaskPropagator {
 public:
  explicit StaticPropagator(int frame_count) : frame_count_(frame_count) {}
  std::optional<RasterMask> propagate(int frame_index, const RasterMask& mask,
                                      int step) const override;

 private:
  int frame_count_;
};

// True when the detection clears both gates against every tracked footprint:
// IoU below iou_gate and intersection-over-min-area below overlap_gate.
// Vacuously true on an empty footprint set.
bool is_new_instance(const BBox& detection, const std::vector<BBox>& tracked,
                     double iou_gate = 0.4, double overlap_gate = 0.6);

struct TubeBuildOptions {
  int redetect_every = 15;  // 0 disables re-detection
  double iou_gate = 0.4;
  double overlap_gate = 0.6;
  double confidence_min = 0.25;
  bool backward = true;
  double fps = 2.0;
};

struct TubeBuildDiagnostics {
  int instances = 0;
  int seeded_first_frame = 0;
  int redetected = 0;
  int truncations = 0;
  int skipped_detections = 0;
};

// Builds a mask database from detections: first-frame seeds, periodic
// re-detection behind the two-gate test, forward propagation, and backward
// recovery to frame 0 for late discoveries. Propagation failures truncate
// the trajectory and are counted, not fatal.
MaskDatabase assemble_tubes(const DetectionStream& detections, const MaskPropagator& propagator,
                            int frame_count, int height, int width,
                            const TubeBuildOptions& options = {},
                            TubeBuildDiagnostics* diagnostics = nullptr);

// Candidate id with the highest IoU against the ground-truth box; ties go to
// the smallest id. Throws DataError on an empty candidate list.
int assign_frame_id(const BBox& gt_box, const std::vector<std::pair<int, BBox>>& candidates);

// Most frequent id, ties to the smallest. Throws DataError on an empty list.
int majority_vote(const std::vector<int>& per_frame_ids);

// Per-frame argmax assignment over the annotated frames followed by majority
// voting. Frames without candidates are skipped; if no annotated frame has
// candidates the detection pipeline failed globally and a DataError is thrown.
AssignmentResult derive_answer(const MaskDatabase& db, const GroundTruthTube& gt);

}  // namespace stvg
