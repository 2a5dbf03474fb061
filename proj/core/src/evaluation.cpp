#include "stvg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "internal/text.hpp"
#include "stvg/errors.hpp"

namespace stvg {

namespace {

constexpr const char* kPredMagic = "predictions-v1";
constexpr const char* kGtMagic = "groundtruth-v1";

double parse_dbl(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw DataError(context + ": invalid number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(context + ": invalid integer '" + s + "'");
  }
}

}  // namespace

std::vector<Prediction> load_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kPredMagic)
    throw DataError(path + ": not a " + std::string(kPredMagic) + " file");
  std::vector<Prediction> preds;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const std::string context = path + ":" + std::to_string(line_no);
    const auto fields = detail::split(trimmed, ' ');
    if (fields.size() != 4) throw DataError(context + ": expected 4 fields");
    Prediction p;
    p.sample_id = fields[0];
    p.interval = TemporalInterval{parse_dbl(fields[1], context), parse_dbl(fields[2], context)};
    p.instance_id = parse_int(fields[3], context);
    if (!p.interval.valid()) throw DataError(context + ": interval start exceeds end");
    preds.push_back(std::move(p));
  }
  return preds;
}

void save_predictions(const std::string& path, const std::vector<Prediction>& preds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << kPredMagic << '\n';
  for (const Prediction& p : preds) {
    out << p.sample_id << ' ' << detail::fmt_double(p.interval.t_s) << ' '
        << detail::fmt_double(p.interval.t_e) << ' ' << p.instance_id << '\n';
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<GtSample> load_ground_truth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kGtMagic)
    throw DataError(path + ": not a " + std::string(kGtMagic) + " file");
  std::vector<GtSample> samples;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const std::string context = path + ":" + std::to_string(line_no);
    std::istringstream ss(trimmed);
    std::string keyword;
    ss >> keyword;
    if (keyword == "sample") {
      std::string id, ts, te;
      if (!(ss >> id >> ts >> te)) throw DataError(context + ": malformed sample line");
      GtSample s;
      s.sample_id = id;
      s.tube.interval = TemporalInterval{parse_dbl(ts, context), parse_dbl(te, context)};
      if (!s.tube.interval.valid()) throw DataError(context + ": interval start exceeds end");
      samples.push_back(std::move(s));
    } else if (keyword == "box") {
      if (samples.empty()) throw DataError(context + ": box before any sample");
      std::string f, x1, y1, x2, y2;
      if (!(ss >> f >> x1 >> y1 >> x2 >> y2)) throw DataError(context + ": malformed box line");
      const BBox box{parse_dbl(x1, context), parse_dbl(y1, context), parse_dbl(x2, context),
                     parse_dbl(y2, context)};
      if (!box.valid()) throw DataError(context + ": invalid box");
      samples.back().tube.boxes[parse_int(f, context)] = box;
    } else if (keyword == "mask") {
      if (samples.empty()) throw DataError(context + ": mask before any sample");
      int f = 0, h = 0, w = 0;
      if (!(ss >> f >> h >> w)) throw DataError(context + ": malformed mask line");
      RleMask m;
      m.height = h;
      m.width = w;
      long long sum = 0;
      int run = 0;
      while (ss >> run) {
        if (run < 0) throw DataError(context + ": negative run");
        m.runs.push_back(run);
        sum += run;
      }
      if (sum != static_cast<long long>(h) * w)
        throw DataError(context + ": run lengths do not cover the mask");
      samples.back().masks[f] = std::move(m);
    } else {
      throw DataError(context + ": unknown keyword '" + keyword + "'");
    }
  }
  return samples;
}

void save_ground_truth(const std::string& path, const std::vector<GtSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << kGtMagic << '\n';
  for (const GtSample& s : samples) {
    out << "sample " << s.sample_id << ' ' << detail::fmt_double(s.tube.interval.t_s) << ' '
        << detail::fmt_double(s.tube.interval.t_e) << '\n';
    for (const auto& [f, box] : s.tube.boxes) {
      out << "box " << f << ' ' << detail::fmt_double(box.x1) << ' ' << detail::fmt_double(box.y1)
          << ' ' << detail::fmt_double(box.x2) << ' ' << detail::fmt_double(box.y2) << '\n';
    }
    for (const auto& [f, mask] : s.masks) {
      out << "mask " << f << ' ' << mask.height << ' ' << mask.width;
      for (int run : mask.runs) out << ' ' << run;
      out << '\n';
    }
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

const std::vector<InstanceRecord>& RepairedDbView::records(int frame_index) const {
  const auto it = overrides_.find(frame_index);
  if (it != overrides_.end()) return it->second;
  return base_->records(frame_index);
}

std::optional<BBox> RepairedDbView::box_of(int frame_index, int instance_id) const {
  if (frame_index < 0 || frame_index >= frame_count()) return std::nullopt;
  for (const InstanceRecord& rec : records(frame_index)) {
    if (rec.instance_id != instance_id || rle_area(rec.mask) == 0) continue;
    return rle_to_bbox(rec.mask);
  }
  return std::nullopt;
}

void RepairedDbView::override_frame(int frame_index, std::vector<InstanceRecord> records) {
  overrides_[frame_index] = std::move(records);
}

namespace {

// Presence means a positive-area record; empty masks cannot anchor repair.
bool has_id(const std::vector<InstanceRecord>& records, int id) {
  for (const InstanceRecord& rec : records)
    if (rec.instance_id == id && rle_area(rec.mask) > 0) return true;
  return false;
}

}  // namespace

RepairedDbView id_repair(const Prediction& pred, const MaskDatabase& db, int target_id,
                         RepairStats* stats, double iou_gate, double overlap_gate) {
  RepairedDbView view(db);
  RepairStats local;
  RepairStats& st = stats ? *stats : local;
  st = {};

  const FrameSpan segment = frame_span(pred.interval, db.fps(), db.frame_count());
  if (segment.empty()) return view;

  std::vector<int> corrections;  // applied old ids, in discovery order
  for (int t = segment.lo; t <= segment.hi; ++t) {
    ++st.frames_processed;
    if (has_id(view.records(t), target_id)) continue;

    std::vector<InstanceRecord> frame = view.records(t);

    // Re-apply the accumulated corrections; the first hit settles the frame
    // (a frame holds one record per id).
    bool corrected = false;
    for (int old_id : corrections) {
      if (corrected) break;
      for (InstanceRecord& rec : frame) {
        if (rec.instance_id == old_id && rle_area(rec.mask) > 0) {
          rec.instance_id = target_id;
          corrected = true;
          ++st.reused_corrections;
          break;
        }
      }
    }
    if (corrected) {
      view.override_frame(t, std::move(frame));
      continue;
    }

    if (frame.empty()) {
      ++st.frames_without_boxes;
      continue;
    }

    // Nearest segment frame that already carries the target, earlier frame
    // on distance ties.
    int t_ref = -1;
    for (int d = 1; d <= segment.hi - segment.lo; ++d) {
      const int earlier = t - d, later = t + d;
      if (earlier >= segment.lo && has_id(view.records(earlier), target_id)) {
        t_ref = earlier;
        break;
      }
      if (later <= segment.hi && has_id(view.records(later), target_id)) {
        t_ref = later;
        break;
      }
    }

    bool placed = false;
    if (t_ref >= 0) {
      const BBox b_ref = *view.box_of(t_ref, target_id);
      std::size_t best = frame.size();
      double best_iou = -1.0;
      for (std::size_t i = 0; i < frame.size(); ++i) {
        if (rle_area(frame[i].mask) == 0) continue;
        const double iou = box_iou(b_ref, rle_to_bbox(frame[i].mask));
        if (iou > best_iou) {
          best_iou = iou;
          best = i;
        }
      }
      if (best < frame.size()) {
        const BBox b_best = rle_to_bbox(frame[best].mask);
        if (box_iou(b_ref, b_best) >= iou_gate ||
            overlap_ratio_min(b_ref, b_best) >= overlap_gate) {
          corrections.push_back(frame[best].instance_id);
          frame[best].instance_id = target_id;
          placed = true;
          ++st.gate_relabels;
        }
      }
    }

    if (!placed) {
      // Largest box area wins; ascending-id order makes ties deterministic.
      std::size_t best = frame.size();
      double best_area = -1.0;
      for (std::size_t i = 0; i < frame.size(); ++i) {
        if (rle_area(frame[i].mask) == 0) continue;
        const double area = rle_to_bbox(frame[i].mask).area();
        if (area > best_area) {
          best_area = area;
          best = i;
        }
      }
      if (best < frame.size()) {
        frame[best].instance_id = target_id;
        placed = true;
        ++st.fallback_relabels;
      }
    }

    if (placed) {
      view.override_frame(t, std::move(frame));
    } else {
      ++st.frames_without_boxes;
    }
  }
  return view;
}

namespace {

template <typename Db>
double viou_impl(const Prediction& pred, const GroundTruthTube& gt, const Db& db) {
  const FrameSpan p = frame_span(pred.interval, db.fps(), db.frame_count());
  const FrameSpan g = frame_span(gt.interval, db.fps(), db.frame_count());
  const int union_count = p.count() + g.count() -
                          std::max(0, std::min(p.hi, g.hi) - std::max(p.lo, g.lo) + 1);
  if (union_count <= 0) throw DataError("viou: empty frame union");
  const int lo = std::max(p.lo, g.lo);
  const int hi = std::min(p.hi, g.hi);
  double sum = 0.0;
  for (int f = lo; f <= hi; ++f) {
    const auto pred_box = db.box_of(f, pred.instance_id);
    const auto gt_box = gt.box_at(f);
    if (pred_box && gt_box) sum += box_iou(*pred_box, *gt_box);
  }
  return sum / union_count;
}

}  // namespace

double viou(const Prediction& pred, const GroundTruthTube& gt, const MaskDatabase& db) {
  return viou_impl(pred, gt, db);
}

double viou(const Prediction& pred, const GroundTruthTube& gt, const RepairedDbView& db) {
  return viou_impl(pred, gt, db);
}

MetricReport aggregate(std::vector<SampleScore> rows) {
  MetricReport report;
  report.rows = std::move(rows);
  const std::size_t n = report.rows.size();
  if (n == 0) return report;
  double sum_t = 0.0, sum_v = 0.0, sum_j = 0.0, sum_f = 0.0;
  int t03 = 0, t05 = 0, v03 = 0, v05 = 0;
  bool all_jf = true;
  for (const SampleScore& row : report.rows) {
    sum_t += row.tiou;
    sum_v += row.viou;
    t03 += row.tiou >= 30.0;
    t05 += row.tiou >= 50.0;
    v03 += row.viou >= 30.0;
    v05 += row.viou >= 50.0;
    if (row.j && row.f) {
      sum_j += *row.j;
      sum_f += *row.f;
    } else {
      all_jf = false;
    }
  }
  report.m_tiou = sum_t / n;
  report.m_viou = sum_v / n;
  report.tiou_at_03 = 100.0 * t03 / n;
  report.tiou_at_05 = 100.0 * t05 / n;
  report.viou_at_03 = 100.0 * v03 / n;
  report.viou_at_05 = 100.0 * v05 / n;
  if (all_jf) {
    report.j_mean = sum_j / n;
    report.f_mean = sum_f / n;
    report.jf = (*report.j_mean + *report.f_mean) / 2.0;
  }
  return report;
}

SampleScore score_sample(const Prediction& pred, const GtSample& gt, const MaskDatabase& db,
                         bool repair) {
  SampleScore score;
  score.sample_id = gt.sample_id;
  score.tiou = 100.0 * temporal_iou(pred.interval, gt.tube.interval);
  if (repair) {
    const RepairedDbView view = id_repair(pred, db, pred.instance_id);
    score.viou = 100.0 * viou(pred, gt.tube, view);
  } else {
    score.viou = 100.0 * viou(pred, gt.tube, db);
  }
  return score;
}

MetricReport score_stvg(const std::vector<Prediction>& preds, const std::vector<GtSample>& gts,
                        const MaskDatabase& db, bool repair) {
  std::map<std::string, const Prediction*> by_id;
  for (const Prediction& p : preds) by_id[p.sample_id] = &p;
  std::vector<SampleScore> rows;
  rows.reserve(gts.size());
  for (const GtSample& gt : gts) {
    const auto it = by_id.find(gt.sample_id);
    if (it == by_id.end()) throw DataError("no prediction for sample '" + gt.sample_id + "'");
    rows.push_back(score_sample(*it->second, gt, db, repair));
  }
  return aggregate(std::move(rows));
}

std::tuple<double, double, double> score_rvos(std::span<const RasterMask> pred_masks,
                                              std::span<const RasterMask> gt_masks, int tolerance) {
  if (pred_masks.size() != gt_masks.size())
    throw DataError("score_rvos: frame counts differ");
  if (pred_masks.empty()) return {0.0, 0.0, 0.0};
  double j = 0.0, f = 0.0;
  for (std::size_t i = 0; i < pred_masks.size(); ++i) {
    j += mask_iou(pred_masks[i], gt_masks[i]);
    f += boundary_f(pred_masks[i], gt_masks[i], tolerance);
  }
  j /= pred_masks.size();
  f /= pred_masks.size();
  return {j, f, (j + f) / 2.0};
}

MetricReport upper_bound(const MaskDatabase& db, const std::vector<GtSample>& gts) {
  const std::vector<int> ids = db.instance_ids();
  std::vector<SampleScore> rows;
  rows.reserve(gts.size());
  for (const GtSample& gt : gts) {
    SampleScore score;
    score.sample_id = gt.sample_id;
    score.tiou = 100.0;
    double best = 0.0;
    for (int id : ids) {
      const Prediction pred{gt.sample_id, gt.tube.interval, id};
      best = std::max(best, viou(pred, gt.tube, db));
    }
    score.viou = 100.0 * best;
    rows.push_back(std::move(score));
  }
  return aggregate(std::move(rows));
}

namespace {

std::string fmt_fixed(double v, int decimals) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string opt_cell(const std::optional<double>& v, int decimals) {
  return v ? fmt_fixed(*v, decimals) : std::string("-");
}

}  // namespace

std::string emit_report(const MetricReport& report, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    out << "sample_id,tiou,viou,j,f\n";
    for (const SampleScore& row : report.rows) {
      out << row.sample_id << ',' << fmt_fixed(row.tiou, 6) << ',' << fmt_fixed(row.viou, 6) << ','
          << (row.j ? fmt_fixed(*row.j, 6) : "") << ',' << (row.f ? fmt_fixed(*row.f, 6) : "")
          << '\n';
    }
    return out.str();
  }

  out << "# Grounding report\n\n";
  out << "Samples: " << report.rows.size() << "\n\n";
  out << "| m_tIoU | m_vIoU | vIoU@0.3 | vIoU@0.5 | tIoU@0.3 | tIoU@0.5 | J | F | J&F |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  out << "| " << opt_cell(report.m_tiou, 2) << " | " << opt_cell(report.m_viou, 2) << " | "
      << opt_cell(report.viou_at_03, 2) << " | " << opt_cell(report.viou_at_05, 2) << " | "
      << opt_cell(report.tiou_at_03, 2) << " | " << opt_cell(report.tiou_at_05, 2) << " | "
      << opt_cell(report.j_mean, 2) << " | " << opt_cell(report.f_mean, 2) << " | "
      << opt_cell(report.jf, 2) << " |\n\n";
  out << "| sample_id | tIoU | vIoU | J | F |\n";
  out << "|---|---|---|---|---|\n";
  for (const SampleScore& row : report.rows) {
    out << "| " << row.sample_id << " | " << fmt_fixed(row.tiou, 4) << " | "
        << fmt_fixed(row.viou, 4) << " | " << opt_cell(row.j, 4) << " | " << opt_cell(row.f, 4)
        << " |\n";
  }
  return out.str();
}

}  // namespace stvg
