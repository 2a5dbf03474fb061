#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "stvg/identity.hpp"
#include "stvg/mask_db.hpp"

namespace stvg {

// One model output for one sample.
struct Prediction {
  std::string sample_id;
  TemporalInterval interval;
  int instance_id = 0;
};

std::vector<Prediction> load_predictions(const std::string& path);
void save_predictions(const std::string& path, const std::vector<Prediction>& preds);

// Ground truth for one sample: the target tube plus optional per-frame
// reference masks for segmentation scoring.
struct GtSample {
  std::string sample_id;
  GroundTruthTube tube;
  std::map<int, RleMask> masks;
};

std::vector<GtSample> load_ground_truth(const std::string& path);
void save_ground_truth(const std::string& path, const std::vector<GtSample>& samples);

// Copy-on-write relabeling over a database: reads fall through to the base
// except in repaired frames. The stored database is never touched.
class RepairedDbView {
 public:
  explicit RepairedDbView(const MaskDatabase& base) : base_(&base) {}

  int height() const { return base_->height(); }
  int width() const { return base_->width(); }
  double fps() const { return base_->fps(); }
  int frame_count() const { return base_->frame_count(); }

  const std::vector<InstanceRecord>& records(int frame_index) const;
  std::optional<BBox> box_of(int frame_index, int instance_id) const;

  // Takes ownership of a rewritten frame.
  void override_frame(int frame_index, std::vector<InstanceRecord> records);

 private:
  const MaskDatabase* base_;
  std::unordered_map<int, std::vector<InstanceRecord>> overrides_;
};

struct RepairStats {
  int frames_processed = 0;
  int reused_corrections = 0;
  int gate_relabels = 0;
  int fallback_relabels = 0;
  int frames_without_boxes = 0;
};

// Restores the target id inside the predicted segment: skip frames that
// already carry it, re-apply accumulated corrections, then match against the
// target's box in the nearest segment frame (ties to the earlier frame)
// under the IoU / intersection-over-min-area gates, persisting each applied
// correction. Frames still missing the target fall back to the largest-area
// box; frames with no boxes at all stay untouched and are counted.
RepairedDbView id_repair(const Prediction& pred, const MaskDatabase& db, int target_id,
                         RepairStats* stats = nullptr, double iou_gate = 0.4,
                         double overlap_gate = 0.6);

// Grounding score of a predicted (interval, id) against the target tube:
// per-frame box IoU summed over the frame intersection of the two intervals
// and divided by the frame union. Frames where either side lacks a box
// contribute zero. Throws DataError when the union is empty.
double viou(const Prediction& pred, const GroundTruthTube& gt, const MaskDatabase& db);
double viou(const Prediction& pred, const GroundTruthTube& gt, const RepairedDbView& db);

// Per-sample metric values, stored as percentages.
struct SampleScore {
  std::string sample_id;
  double tiou = 0.0;
  double viou = 0.0;
  std::optional<double> j;
  std::optional<double> f;
};

struct MetricReport {
  std::vector<SampleScore> rows;
  std::optional<double> m_tiou, m_viou;
  std::optional<double> tiou_at_03, tiou_at_05;
  std::optional<double> viou_at_03, viou_at_05;
  std::optional<double> j_mean, f_mean, jf;
};

// Means and @R fractions over the rows.
MetricReport aggregate(std::vector<SampleScore> rows);

// Scores one prediction against one sample's truth, optionally after
// ID-repair of the predicted id.
SampleScore score_sample(const Prediction& pred, const GtSample& gt, const MaskDatabase& db,
                         bool repair);

// Scores aligned prediction/truth sets against a shared database. Throws
// DataError when a ground-truth sample has no prediction.
MetricReport score_stvg(const std::vector<Prediction>& preds, const std::vector<GtSample>& gts,
                        const MaskDatabase& db, bool repair);

// Mean region similarity J, boundary accuracy F, and their average over
// aligned mask lists (ratios in [0,1]).
std::tuple<double, double, double> score_rvos(std::span<const RasterMask> pred_masks,
                                              std::span<const RasterMask> gt_masks, int tolerance);

// Best achievable score given this database: the interval is taken from the
// truth and the instance id is chosen to maximize vIoU.
MetricReport upper_bound(const MaskDatabase& db, const std::vector<GtSample>& gts);

enum class ReportFormat { Csv, Markdown };

// Deterministic serialization; CSV carries the per-sample rows, markdown
// adds the aggregate table.
std::string emit_report(const MetricReport& report, ReportFormat format);

}  // namespace stvg
