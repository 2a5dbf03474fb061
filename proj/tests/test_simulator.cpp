#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "stvg/errors.hpp"
#include "stvg/simulator.hpp"

using namespace stvg;

TEST_CASE("gen_world is deterministic and honors lifetimes") {
  WorldConfig wc;
  wc.seed = 5;
  const World a = gen_world(wc);
  const World b = gen_world(wc);
  CHECK(a.ground_truth_db() == b.ground_truth_db());

  wc.seed = 6;
  CHECK(!(gen_world(wc).ground_truth_db() == a.ground_truth_db()));

  WorldConfig none = wc;
  none.min_objects = 0;
  none.max_objects = 0;
  const World empty = gen_world(none);
  for (int f = 0; f < empty.frame_count(); ++f) CHECK(empty.frames[f].empty());

  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    const SimObject& obj = a.objects[i];
    for (int f = 0; f < a.frame_count(); ++f) {
      if (f < obj.entry_frame || f > obj.exit_frame)
        CHECK(rle_area(a.frames[f][i].visible) == 0);
    }
  }
}

TEST_CASE("config validation") {
  WorldConfig wc;
  wc.duration_s = 0.0;
  CHECK_THROWS_AS(gen_world(wc), ConfigError);
  wc = {};
  wc.min_objects = 5;
  wc.max_objects = 2;
  CHECK_THROWS_AS(gen_world(wc), ConfigError);
  wc = {};
  wc.noise.miss_p = 1.5;
  CHECK_THROWS_AS(gen_world(wc), ConfigError);
}

TEST_CASE("noiseless detections reproduce the visible boxes") {
  WorldConfig wc;
  wc.seed = 9;
  wc.lanes = true;
  wc.min_objects = 3;
  wc.max_objects = 3;
  const World world = gen_world(wc);
  const DetectionStream dets = render_detections(world, NoiseModel{}, 10);
  std::size_t expected = 0;
  for (int f = 0; f < world.frame_count(); ++f)
    for (std::size_t i = 0; i < world.objects.size(); ++i) expected += world.is_visible(f, i);
  CHECK(dets.items.size() == expected);
  for (const Detection& det : dets.items) {
    bool matches = false;
    for (std::size_t i = 0; i < world.objects.size(); ++i) {
      const auto box = world.visible_box(det.frame_index, static_cast<int>(i));
      if (box && *box == det.box) matches = true;
    }
    CHECK(matches);
    CHECK(det.confidence >= 0.5);
  }

  NoiseModel all_missed;
  all_missed.miss_p = 1.0;
  CHECK(render_detections(world, all_missed, 10).items.empty());
}

TEST_CASE("jitter statistics match the configured sigma") {
  WorldConfig wc;
  wc.seed = 12;
  wc.height = 400;
  wc.width = 400;
  wc.duration_s = 50.0;  // 100 frames
  wc.min_objects = 2;
  wc.max_objects = 2;
  wc.min_size = 20;
  wc.max_size = 30;
  wc.lanes = true;  // keeps objects far from the borders
  const World world = gen_world(wc);

  NoiseModel noise;
  noise.jitter_sigma = 2.0;
  double sum_dx = 0, sum_dy = 0, sum_sq = 0;
  long long n = 0;
  for (std::uint64_t s = 0; s < 60; ++s) {
    const DetectionStream dets = render_detections(world, noise, 1000 + s);
    for (const Detection& det : dets.items) {
      // match to the nearest gt box center
      double best = 1e18, dx = 0, dy = 0;
      for (std::size_t i = 0; i < world.objects.size(); ++i) {
        const auto box = world.visible_box(det.frame_index, static_cast<int>(i));
        if (!box) continue;
        const double ddx = (det.box.x1 + det.box.x2) / 2 - (box->x1 + box->x2) / 2;
        const double ddy = (det.box.y1 + det.box.y2) / 2 - (box->y1 + box->y2) / 2;
        if (ddx * ddx + ddy * ddy < best) {
          best = ddx * ddx + ddy * ddy;
          dx = ddx;
          dy = ddy;
        }
      }
      sum_dx += dx;
      sum_dy += dy;
      sum_sq += dx * dx + dy * dy;
      ++n;
    }
  }
  REQUIRE(n > 10000);
  CHECK(std::abs(sum_dx / n) < 0.1);
  CHECK(std::abs(sum_dy / n) < 0.1);
  const double std_est = std::sqrt(sum_sq / (2.0 * n));
  CHECK(std_est == doctest::Approx(2.0).epsilon(0.10));
}

TEST_CASE("episodes single out exactly one object") {
  WorldConfig wc;
  wc.seed = 31;
  wc.min_objects = 1;
  wc.max_objects = 1;
  const World solo = gen_world(wc);
  const Episode ep = gen_episode(solo, 1);
  CHECK(ep.target_id == 1);
  CHECK(!ep.query.empty());
  CHECK(ep.correct_index >= 0);

  for (std::uint64_t seed = 40; seed < 60; ++seed) {
    WorldConfig multi;
    multi.seed = seed;
    multi.min_objects = 3;
    multi.max_objects = 5;
    const World world = gen_world(multi);
    Episode e;
    try {
      e = gen_episode(world, seed * 3 + 1);
    } catch (const DataError&) {
      continue;  // identical twins are a legal generator outcome
    }
    // the correct candidate is present, and its features are maximal
    REQUIRE(e.correct_index >= 0);
    const EpisodeCandidate& correct = e.candidates[e.correct_index];
    CHECK(correct.instance_id == e.target_id);
    CHECK(correct.interval == e.gt.interval);
    CHECK(correct.features[0] == doctest::Approx(1.0));  // all predicates hold
    // every decoy misses on id or interval
    for (int i = 0; i < static_cast<int>(e.candidates.size()); ++i) {
      if (i == e.correct_index) continue;
      const bool same = e.candidates[i].instance_id == e.target_id &&
                        e.candidates[i].interval == e.gt.interval;
      CHECK(!same);
    }
    // decoys with full predicate match share the target id
    for (const EpisodeCandidate& c : e.candidates) {
      if (c.features[0] == 1.0) CHECK(c.instance_id == e.target_id);
    }
  }
}

TEST_CASE("episode candidate count and determinism") {
  WorldConfig wc;
  wc.seed = 77;
  wc.min_objects = 2;
  wc.max_objects = 4;
  const World world = gen_world(wc);
  EpisodeOptions opts;
  opts.candidate_count = 7;
  const Episode a = gen_episode(world, 5, opts);
  const Episode b = gen_episode(world, 5, opts);
  CHECK(a.candidates.size() == 7);
  CHECK(a.target_id == b.target_id);
  CHECK(a.correct_index == b.correct_index);
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    CHECK(a.candidates[i].instance_id == b.candidates[i].instance_id);
    CHECK(a.candidates[i].interval == b.candidates[i].interval);
  }

  // subspan mode keeps the truth inside the lifespan
  EpisodeOptions sub;
  sub.subspan = true;
  const Episode c = gen_episode(world, 6, sub);
  std::size_t target_idx = 0;
  for (std::size_t i = 0; i < world.objects.size(); ++i)
    if (world.objects[i].object_id == c.target_id) target_idx = i;
  const auto vis = world.visible_frames(static_cast<int>(target_idx));
  CHECK(c.gt.interval.t_s >= vis.front() / wc.fps - 1e-9);
  CHECK(c.gt.interval.t_e <= vis.back() / wc.fps + 1e-9);
}

TEST_CASE("corrupt_tracks fragments ids but never geometry") {
  WorldConfig wc;
  wc.seed = 50;
  wc.min_objects = 2;
  wc.max_objects = 3;
  const World world = gen_world(wc);
  const MaskDatabase db = world.ground_truth_db();

  CHECK(corrupt_tracks(db, 0.0, 9) == db);

  const MaskDatabase broken = corrupt_tracks(db, 1.0, 9);
  // per-frame mask multisets are identical
  for (int f = 0; f < db.frame_count(); ++f) {
    std::multiset<std::vector<int>> before, after;
    for (const auto& rec : db.records(f)) before.insert(rec.mask.runs);
    for (const auto& rec : broken.records(f)) after.insert(rec.mask.runs);
    CHECK(before == after);
  }
  // p=1: a fresh id at every transition, so every tube has length 1
  for (int id : broken.instance_ids()) CHECK(broken.tube_of(id).entries.size() == 1);

  // fragment count concentrates around binomial expectation
  MaskDatabase single(16, 16, 2.0, 11);
  for (int f = 0; f <= 10; ++f)
    single.insert(f, {1, "person", rle_encode(rect_mask(16, 16, {2, 2, 9, 9}))});
  const double p = 0.3;
  long long fragments = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const MaskDatabase c = corrupt_tracks(single, p, 100 + t);
    fragments += static_cast<long long>(c.instance_ids().size()) - 1;
  }
  const double mean = 10.0 * p * trials;
  const double sigma = std::sqrt(10.0 * p * (1 - p) * trials);
  CHECK(std::abs(fragments - mean) < 3.0 * sigma);
}

TEST_CASE("zero-noise pipeline closure on a plain world") {
  WorldConfig wc;
  wc.seed = 404;
  wc.lanes = true;
  wc.min_objects = 4;
  wc.max_objects = 4;
  wc.late_entry_p = 0.5;
  wc.early_exit_p = 0.0;
  const World world = gen_world(wc);
  const DetectionStream dets = render_detections(world, NoiseModel{}, 405);
  MaskDbPropagator prop(world.ground_truth_db());
  const MaskDatabase built =
      assemble_tubes(dets, prop, world.frame_count(), wc.height, wc.width, {});
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const auto vis = world.visible_frames(static_cast<int>(i));
    if (vis.empty()) continue;
    int tube_id = -1;
    for (const auto& rec : built.records(vis.front()))
      if (rec.mask == world.frames[vis.front()][i].visible) tube_id = rec.instance_id;
    REQUIRE(tube_id > 0);
    for (int f : vis) {
      bool found = false;
      for (const auto& rec : built.records(f))
        if (rec.instance_id == tube_id && rec.mask == world.frames[f][i].visible) found = true;
      CHECK(found);
    }
  }
}
