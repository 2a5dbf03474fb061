#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "stvg/errors.hpp"
#include "stvg/evaluation.hpp"
#include "stvg/simulator.hpp"

using namespace stvg;

namespace {

RleMask solid(int h, int w, const BBox& box) { return rle_encode(rect_mask(h, w, box)); }

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("prediction and ground-truth files round trip") {
  const std::string ppath = temp_path("stvg_preds.txt");
  std::vector<Prediction> preds = {{"a", {1.5, 7.0}, 3}, {"b", {0.0, 2.5}, 12}};
  save_predictions(ppath, preds);
  const auto back = load_predictions(ppath);
  REQUIRE(back.size() == 2);
  CHECK(back[0].sample_id == "a");
  CHECK(back[0].interval == TemporalInterval{1.5, 7.0});
  CHECK(back[1].instance_id == 12);

  std::ofstream bad(ppath, std::ios::binary);
  bad << "predictions-v1\nx 5 1 3\n";  // reversed interval
  bad.close();
  CHECK_THROWS_AS(load_predictions(ppath), DataError);
  std::remove(ppath.c_str());

  const std::string gpath = temp_path("stvg_gt.txt");
  std::vector<GtSample> gts(1);
  gts[0].sample_id = "a";
  gts[0].tube.interval = {2.0, 6.0};
  gts[0].tube.boxes[4] = BBox{1, 2, 3, 4};
  gts[0].tube.boxes[5] = BBox{1.5, 2.5, 3.5, 4.25};
  gts[0].masks[4] = solid(8, 8, {0, 0, 4, 4});
  save_ground_truth(gpath, gts);
  const auto gt_back = load_ground_truth(gpath);
  REQUIRE(gt_back.size() == 1);
  CHECK(gt_back[0].tube.boxes.at(5) == BBox{1.5, 2.5, 3.5, 4.25});
  CHECK(gt_back[0].masks.at(4) == gts[0].masks.at(4));
  std::remove(gpath.c_str());
}

TEST_CASE("id_repair leaves intact segments alone") {
  MaskDatabase db(32, 32, 2.0, 10);
  for (int f = 0; f < 10; ++f) db.insert(f, {3, "person", solid(32, 32, {4, 4, 12, 12})});
  RepairStats stats;
  const RepairedDbView view = id_repair({"s", {0.0, 4.5}, 3}, db, 3, &stats);
  CHECK(stats.gate_relabels == 0);
  CHECK(stats.fallback_relabels == 0);
  CHECK(stats.reused_corrections == 0);
  for (int f = 0; f < 10; ++f) CHECK(&view.records(f) == &db.records(f));  // no copies made
}

TEST_CASE("id_repair relabels a fragmented tube and persists the fix") {
  // id 3 for frames 0..4, then the same object continues as id 9
  MaskDatabase db(32, 32, 2.0, 10);
  for (int f = 0; f < 5; ++f)
    db.insert(f, {3, "person", solid(32, 32, {4.0 + f, 4, 12.0 + f, 12})});
  for (int f = 5; f < 10; ++f)
    db.insert(f, {9, "person", solid(32, 32, {4.0 + f, 4, 12.0 + f, 12})});
  // a distractor far away
  for (int f = 0; f < 10; ++f) db.insert(f, {5, "dog", solid(32, 32, {24, 24, 30, 30})});

  RepairStats stats;
  const RepairedDbView view = id_repair({"s", {0.0, 4.5}, 3}, db, 3, &stats);
  for (int f = 0; f < 10; ++f) {
    bool has3 = false;
    for (const auto& rec : view.records(f)) has3 |= rec.instance_id == 3;
    CHECK(has3);
  }
  CHECK(stats.gate_relabels == 1);       // the first broken frame matches via the gate
  CHECK(stats.reused_corrections == 4);  // the persistent set covers the rest
  CHECK(stats.fallback_relabels == 0);

  // geometry untouched: per-frame mask multisets are identical
  for (int f = 0; f < 10; ++f) {
    std::multiset<std::vector<int>> before, after;
    for (const auto& rec : db.records(f)) before.insert(rec.mask.runs);
    for (const auto& rec : view.records(f)) after.insert(rec.mask.runs);
    CHECK(before == after);
  }
  // the base database is untouched
  for (int f = 5; f < 10; ++f) CHECK(!db.box_of(f, 3));
}

TEST_CASE("id_repair falls back to the largest box when no gate passes") {
  MaskDatabase db(64, 64, 2.0, 4);
  db.insert(0, {3, "person", solid(64, 64, {0, 0, 8, 8})});
  // frame 1 has two boxes far from the reference; the bigger one wins
  db.insert(1, {5, "person", solid(64, 64, {40, 40, 60, 60})});
  db.insert(1, {6, "person", solid(64, 64, {30, 10, 34, 14})});
  RepairStats stats;
  const RepairedDbView view = id_repair({"s", {0.0, 0.5}, 3}, db, 3, &stats);
  CHECK(stats.fallback_relabels == 1);
  CHECK(view.box_of(1, 3) == BBox{40, 40, 60, 60});
}

TEST_CASE("id_repair leaves empty frames empty and reports them") {
  MaskDatabase db(32, 32, 2.0, 6);
  db.insert(0, {3, "person", solid(32, 32, {4, 4, 12, 12})});
  RepairStats stats;
  const RepairedDbView view = id_repair({"s", {0.0, 2.5}, 3}, db, 3, &stats);
  CHECK(stats.frames_without_boxes == 5);
  for (int f = 1; f < 6; ++f) CHECK(view.records(f).empty());
}

TEST_CASE("viou hand cases and oracle agreement") {
  // pred frames {1..4}, gt frames {3..6}, per-frame IoU 0.5 on the overlap
  MaskDatabase db(64, 64, 2.0, 8);
  for (int f = 1; f <= 4; ++f) db.insert(f, {2, "person", solid(64, 64, {0, 0, 10, 10})});
  GroundTruthTube gt;
  gt.interval = {1.5, 3.0};  // frames 3..6
  for (int f = 3; f <= 6; ++f) gt.boxes[f] = BBox{0, 0, 10, 20};
  const double v = viou({"s", {0.5, 2.0}, 2}, gt, db);
  CHECK(v == doctest::Approx(1.0 / 6).epsilon(1e-12));

  // identity
  MaskDatabase own(64, 64, 2.0, 6);
  GroundTruthTube self;
  self.interval = {0.0, 2.5};
  for (int f = 0; f < 6; ++f) {
    own.insert(f, {1, "person", solid(64, 64, {5, 5, 25, 25})});
    self.boxes[f] = BBox{5, 5, 25, 25};
  }
  CHECK(viou({"s", {0.0, 2.5}, 1}, self, own) == doctest::Approx(1.0));
  // disjoint intervals
  CHECK(viou({"s", {10.0, 12.0}, 1}, self, own) == 0.0);

  // random agreement with the frame-enumeration oracle
  Rng rng(15);
  for (int trial = 0; trial < 120; ++trial) {
    WorldConfig wc;
    wc.seed = 800 + trial;
    wc.min_objects = 2;
    wc.max_objects = 4;
    Episode ep;
    try {
      ep = gen_episode(gen_world(wc), 900 + trial);
    } catch (const DataError&) {
      continue;
    }
    const int id = ep.db.instance_ids()[rng.uniform_int(
        0, static_cast<int>(ep.db.instance_ids().size()) - 1)];
    const TemporalInterval iv = oracles::random_ms_interval(rng, wc.duration_s);
    const Prediction pred{"s", iv, id};
    double mine = 0.0;
    bool threw = false;
    try {
      mine = viou(pred, ep.gt, ep.db);
    } catch (const DataError&) {
      threw = true;
    }
    const double ref = oracles::frame_viou(iv, id, ep.gt, ep.db);
    if (threw) {
      CHECK(ref == -1.0);
    } else {
      CHECK(mine == doctest::Approx(ref).epsilon(1e-9));
      // each summand is at most 1, so viou cannot exceed |Pi|/|Pu|
      const FrameSpan p = frame_span(iv, ep.db.fps(), ep.db.frame_count());
      const FrameSpan g = frame_span(ep.gt.interval, ep.db.fps(), ep.db.frame_count());
      const int inter = std::max(0, std::min(p.hi, g.hi) - std::max(p.lo, g.lo) + 1);
      const int uni = p.count() + g.count() - inter;
      CHECK(mine <= static_cast<double>(inter) / uni + 1e-12);
    }
  }
}

TEST_CASE("score_stvg aggregates and aligns") {
  MaskDatabase db(64, 64, 2.0, 10);
  GroundTruthTube tube;
  tube.interval = {0.0, 4.5};
  for (int f = 0; f < 10; ++f) {
    db.insert(f, {1, "person", solid(64, 64, {5, 5, 25, 25})});
    tube.boxes[f] = BBox{5, 5, 25, 25};
  }
  const GtSample gt{"s0", tube, {}};

  const MetricReport perfect = score_stvg({{"s0", {0.0, 4.5}, 1}}, {gt}, db, false);
  CHECK(*perfect.m_tiou == doctest::Approx(100.0));
  CHECK(*perfect.m_viou == doctest::Approx(100.0));
  CHECK(*perfect.viou_at_03 == 100.0);
  CHECK(*perfect.viou_at_05 == 100.0);

  // single sample with tIoU 1/3: interval [0,4.5] vs [0,13.5] gives 4.5/13.5
  const MetricReport third = score_stvg({{"s0", {0.0, 13.5}, 1}}, {gt}, db, false);
  CHECK(*third.m_tiou == doctest::Approx(100.0 / 3).epsilon(1e-9));
  CHECK(*third.tiou_at_03 == 100.0);
  CHECK(*third.tiou_at_05 == 0.0);

  CHECK_THROWS_AS(score_stvg({{"other", {0.0, 1.0}, 1}}, {gt}, db, false), DataError);
}

TEST_CASE("repair never lowers viou, pointwise") {
  int repaired_samples = 0;
  for (int trial = 0; trial < 30; ++trial) {
    WorldConfig wc;
    wc.seed = 1200 + trial;
    wc.min_objects = 2;
    wc.max_objects = 4;
    Episode ep;
    try {
      ep = gen_episode(gen_world(wc), 1300 + trial);
    } catch (const DataError&) {
      continue;
    }
    const MaskDatabase broken = corrupt_tracks(ep.db, 0.3, 77 + trial);
    const AssignmentResult res = derive_answer(broken, ep.gt);
    const Prediction pred{"s", ep.gt.interval, res.answer_id};
    const GtSample gt{"s", ep.gt, {}};
    const SampleScore off = score_sample(pred, gt, broken, false);
    const SampleScore on = score_sample(pred, gt, broken, true);
    CHECK(on.viou >= off.viou - 1e-9);
    if (on.viou > off.viou + 1e-9) ++repaired_samples;

    // postcondition: target present in every segment frame that has boxes
    const RepairedDbView view = id_repair(pred, broken, pred.instance_id);
    const FrameSpan span = frame_span(pred.interval, broken.fps(), broken.frame_count());
    for (int f = span.lo; f <= span.hi; ++f) {
      bool any_box = false, has_target = false;
      for (const auto& rec : view.records(f)) {
        if (rle_area(rec.mask) == 0) continue;
        any_box = true;
        has_target |= rec.instance_id == pred.instance_id;
      }
      if (any_box) CHECK(has_target);
    }
  }
  CHECK(repaired_samples > 0);  // fragmentation at p=0.3 must have bitten somewhere
}

TEST_CASE("score_rvos") {
  std::vector<RasterMask> gt, same, empty;
  for (int i = 0; i < 4; ++i) {
    RasterMask m = RasterMask::zeros(24, 24);
    for (int r = 6; r < 14; ++r)
      for (int c = 6; c < 14; ++c) m.set(r, c, true);
    gt.push_back(m);
    same.push_back(m);
    empty.push_back(RasterMask::zeros(24, 24));
  }
  const auto [j1, f1, jf1] = score_rvos(same, gt, 2);
  CHECK(j1 == doctest::Approx(1.0));
  CHECK(f1 == doctest::Approx(1.0));
  CHECK(jf1 == doctest::Approx(1.0));

  const auto [j0, f0, jf0] = score_rvos(empty, gt, 2);
  CHECK(j0 == 0.0);
  CHECK(f0 == 0.0);
  CHECK(jf0 == 0.0);

  // half-overlap fixture against the naive oracles
  std::vector<RasterMask> half;
  for (int i = 0; i < 4; ++i) {
    RasterMask m = RasterMask::zeros(24, 24);
    for (int r = 6; r < 14; ++r)
      for (int c = 10; c < 18; ++c) m.set(r, c, true);
    half.push_back(m);
  }
  const auto [j2, f2, jf2] = score_rvos(half, gt, 2);
  CHECK(j2 == doctest::Approx(oracles::naive_mask_iou(half[0], gt[0])).epsilon(1e-12));
  CHECK(f2 == doctest::Approx(boundary_f(half[0], gt[0], 2)).epsilon(1e-12));
  CHECK(jf2 == doctest::Approx((j2 + f2) / 2));
}

TEST_CASE("upper_bound picks the best id and handles an empty database") {
  const MaskDatabase empty(16, 16, 2.0, 4);
  GtSample gt;
  gt.sample_id = "s";
  gt.tube.interval = {0.0, 1.5};
  gt.tube.boxes[0] = BBox{1, 1, 5, 5};
  const MetricReport report = upper_bound(empty, {gt});
  CHECK(*report.m_viou == 0.0);
  CHECK(*report.m_tiou == 100.0);

  MaskDatabase db(16, 16, 2.0, 4);
  for (int f = 0; f < 4; ++f) {
    db.insert(f, {1, "person", solid(16, 16, {8, 8, 12, 12})});
    db.insert(f, {2, "person", solid(16, 16, {1, 1, 5, 5})});
  }
  GtSample gt2 = gt;
  for (int f = 0; f < 4; ++f) gt2.tube.boxes[f] = BBox{1, 1, 5, 5};
  CHECK(*upper_bound(db, {gt2}).m_viou == doctest::Approx(100.0));
}

TEST_CASE("report emission is deterministic and consistent across formats") {
  MetricReport report = aggregate({{"s0", 33.333333, 12.5, std::nullopt, std::nullopt},
                                   {"s1", 80.0, 55.0, std::nullopt, std::nullopt}});
  const std::string csv = emit_report(report, ReportFormat::Csv);
  const std::string expected_csv =
      "sample_id,tiou,viou,j,f\n"
      "s0,33.333333,12.500000,,\n"
      "s1,80.000000,55.000000,,\n";
  CHECK(csv == expected_csv);

  const std::string md = emit_report(report, ReportFormat::Markdown);
  CHECK(md.find("| 56.67 |") != std::string::npos);   // m_tIoU
  CHECK(md.find("| 33.75 |") != std::string::npos);   // m_vIoU
  CHECK(md.find("| s0 | 33.3333 | 12.5000 |") != std::string::npos);
  CHECK(emit_report(report, ReportFormat::Markdown) == md);

  // vIoU@0.5 <= vIoU@0.3 always
  CHECK(*report.viou_at_05 <= *report.viou_at_03);

  const MetricReport none = aggregate({});
  CHECK(emit_report(none, ReportFormat::Csv) == "sample_id,tiou,viou,j,f\n");
}
