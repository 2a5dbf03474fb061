#include "stvg/identity.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "internal/text.hpp"
#include "stvg/errors.hpp"

namespace stvg {

namespace {

constexpr const char* kMagic = "detections-v1";

double parse_dbl(const std::string& s, int line_no, const std::string& path) {
  char* end = nullptr;
  const double value = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw DataError(path + ":" + std::to_string(line_no) + ": invalid number '" + s + "'");
  return value;
}

int parse_int(const std::string& s, int line_no, const std::string& path) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError(path + ":" + std::to_string(line_no) + ": invalid integer '" + s + "'");
  return value;
}

}  // namespace

void DetectionStream::normalize() {
  std::stable_sort(items.begin(), items.end(),
                   [](const Detection& a, const Detection& b) { return a.frame_index < b.frame_index; });
}

DetectionStream DetectionStream::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kMagic)
    throw DataError(path + ": not a " + std::string(kMagic) + " file");
  DetectionStream stream;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto fields = detail::split(trimmed, ',');
    if (fields.size() != 7)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 7 fields, got " +
                      std::to_string(fields.size()));
    Detection det;
    det.frame_index = parse_int(fields[0], line_no, path);
    det.category = fields[1];
    validate_category(det.category);
    det.confidence = parse_dbl(fields[2], line_no, path);
    det.box = BBox{parse_dbl(fields[3], line_no, path), parse_dbl(fields[4], line_no, path),
                   parse_dbl(fields[5], line_no, path), parse_dbl(fields[6], line_no, path)};
    if (det.frame_index < 0)
      throw DataError(path + ":" + std::to_string(line_no) + ": negative frame index");
    if (det.confidence < 0.0 || det.confidence > 1.0)
      throw DataError(path + ":" + std::to_string(line_no) + ": confidence outside [0,1]");
    if (!det.box.valid())
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid box");
    stream.items.push_back(std::move(det));
  }
  stream.normalize();
  return stream;
}

void DetectionStream::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << kMagic << '\n';
  for (const Detection& det : items) {
    out << det.frame_index << ',' << det.category << ',' << detail::fmt_double(det.confidence)
        << ',' << detail::fmt_double(det.box.x1) << ',' << detail::fmt_double(det.box.y1) << ','
        << detail::fmt_double(det.box.x2) << ',' << detail::fmt_double(det.box.y2) << '\n';
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::optional<RasterMask> MaskDbPropagator::propagate(int frame_index, const RasterMask& mask,
                                                      int step) const {
  if (frame_index < 0 || frame_index >= tracks_.frame_count()) return std::nullopt;
  int best_id = 0;
  double best_iou = 0.0;
  RasterMask best_mask;
  for (const InstanceRecord& rec : tracks_.records(frame_index)) {
    RasterMask candidate = rle_decode(rec.mask);
    const double iou = mask_iou(candidate, mask);
    if (iou > best_iou) {
      best_iou = iou;
      best_id = rec.instance_id;
      best_mask = std::move(candidate);
    }
  }
  if (best_id == 0) return std::nullopt;
  if (step == 0) return best_mask;
  const int target = frame_index + step;
  if (target < 0 || target >= tracks_.frame_count()) return std::nullopt;
  for (const InstanceRecord& rec : tracks_.records(target)) {
    if (rec.instance_id == best_id) return rle_decode(rec.mask);
  }
  return std::nullopt;
}

std::optional<RasterMask> StaticPropagator::propagate(int frame_index, const RasterMask& mask,
                                                      int step) const {
  const int target = frame_index + step;
  if (target < 0 || target >= frame_count_) return std::nullopt;
  return mask;
}

bool is_new_instance(const BBox& detection, const std::vector<BBox>& tracked, double iou_gate,
                     double overlap_gate) {
  for (const BBox& t : tracked) {
    if (box_iou(detection, t) >= iou_gate) return false;
    if (overlap_ratio_min(detection, t) >= overlap_gate) return false;
  }
  return true;
}

namespace {

struct TubeBuilder {
  MaskDatabase db;
  const MaskPropagator& propagator;
  const TubeBuildOptions& options;
  TubeBuildDiagnostics& diag;
  int next_id = 1;

  // Seeds an instance at its discovery frame and follows it forward, and
  // backward when enabled. Returns false when the detection is unusable.
  bool spawn(int frame, const Detection& det) {
    BBox clipped{std::max(0.0, det.box.x1), std::max(0.0, det.box.y1),
                 std::min<double>(db.width(), det.box.x2), std::min<double>(db.height(), det.box.y2)};
    RasterMask seed;
    if (clipped.valid() && clipped.area() > 0.0)
      seed = rect_mask(db.height(), db.width(), clipped);
    if (seed.area() == 0) {
      ++diag.skipped_detections;
      return false;
    }
    if (auto snapped = propagator.propagate(frame, seed, 0); snapped && snapped->area() > 0)
      seed = std::move(*snapped);
    const int id = next_id++;
    ++diag.instances;
    db.insert(frame, InstanceRecord{id, det.category, rle_encode(seed)});
    walk(frame, seed, id, det.category, +1);
    if (options.backward) walk(frame, seed, id, det.category, -1);
    return true;
  }

  void walk(int from, RasterMask mask, int id, const std::string& category, int step) {
    int frame = from;
    while (true) {
      const int target = frame + step;
      if (target < 0 || target >= db.frame_count()) return;
      auto next = propagator.propagate(frame, mask, step);
      if (!next || next->area() == 0) {
        ++diag.truncations;
        return;
      }
      mask = std::move(*next);
      db.insert(target, InstanceRecord{id, category, rle_encode(mask)});
      frame = target;
    }
  }

  std::vector<BBox> footprints(int frame) const {
    std::vector<BBox> boxes;
    for (const InstanceRecord& rec : db.records(frame)) {
      if (rle_area(rec.mask) > 0) boxes.push_back(rle_to_bbox(rec.mask));
    }
    return boxes;
  }
};

}  // namespace

MaskDatabase assemble_tubes(const DetectionStream& detections, const MaskPropagator& propagator,
                            int frame_count, int height, int width,
                            const TubeBuildOptions& options, TubeBuildDiagnostics* diagnostics) {
  if (frame_count <= 0) throw DataError("assemble_tubes: need at least one frame");
  TubeBuildDiagnostics local;
  TubeBuildDiagnostics& diag = diagnostics ? *diagnostics : local;
  diag = {};
  TubeBuilder builder{MaskDatabase(height, width, options.fps, frame_count), propagator, options,
                      diag};

  std::vector<std::vector<const Detection*>> by_frame(frame_count);
  for (const Detection& det : detections.items) {
    if (det.frame_index < 0 || det.frame_index >= frame_count) continue;
    by_frame[det.frame_index].push_back(&det);
  }

  for (const Detection* det : by_frame[0]) {
    if (det->confidence < options.confidence_min) {
      ++diag.skipped_detections;
      continue;
    }
    if (builder.spawn(0, *det)) ++diag.seeded_first_frame;
  }

  if (options.redetect_every > 0) {
    for (int frame = options.redetect_every; frame < frame_count; frame += options.redetect_every) {
      std::vector<BBox> tracked = builder.footprints(frame);
      for (const Detection* det : by_frame[frame]) {
        if (det->confidence < options.confidence_min) {
          ++diag.skipped_detections;
          continue;
        }
        if (!is_new_instance(det->box, tracked, options.iou_gate, options.overlap_gate)) continue;
        const int id = builder.next_id;
        if (!builder.spawn(frame, *det)) continue;
        ++diag.redetected;
        // Gate later detections in this pass against the newcomer as well.
        if (auto box = builder.db.box_of(frame, id)) tracked.push_back(*box);
      }
    }
  }

  return std::move(builder.db);
}

int assign_frame_id(const BBox& gt_box, const std::vector<std::pair<int, BBox>>& candidates) {
  if (candidates.empty()) throw DataError("assign_frame_id: no candidates");
  int best_id = 0;
  double best_iou = -1.0;
  for (const auto& [id, box] : candidates) {
    const double iou = box_iou(gt_box, box);
    if (iou > best_iou || (iou == best_iou && id < best_id)) {
      best_iou = iou;
      best_id = id;
    }
  }
  return best_id;
}

int majority_vote(const std::vector<int>& per_frame_ids) {
  if (per_frame_ids.empty()) throw DataError("majority_vote: empty id list");
  std::map<int, int> histogram;
  for (int id : per_frame_ids) ++histogram[id];
  int best_id = 0, best_count = -1;
  for (const auto& [id, count] : histogram) {
    if (count > best_count) {
      best_count = count;
      best_id = id;
    }
  }
  return best_id;
}

AssignmentResult derive_answer(const MaskDatabase& db, const GroundTruthTube& gt) {
  AssignmentResult result;
  std::vector<int> votes;
  for (const auto& [frame, gt_box] : gt.boxes) {
    if (frame < 0 || frame >= db.frame_count()) continue;
    std::vector<std::pair<int, BBox>> candidates;
    for (const InstanceRecord& rec : db.records(frame)) {
      if (rle_area(rec.mask) == 0) continue;
      candidates.emplace_back(rec.instance_id, rle_to_bbox(rec.mask));
    }
    if (candidates.empty()) continue;
    const int id = assign_frame_id(gt_box, candidates);
    result.per_frame_ids[frame] = id;
    votes.push_back(id);
  }
  if (votes.empty())
    throw DataError("derive_answer: no candidate instances in any annotated frame");
  for (int id : votes) ++result.histogram[id];
  result.answer_id = majority_vote(votes);
  return result;
}

}  // namespace stvg
