#include "stvg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "internal/text.hpp"
#include "stvg/errors.hpp"
#include "stvg/rng.hpp"

namespace stvg {

namespace {

const std::vector<std::string> kColorTags = {"red", "green", "blue", "yellow", "purple", "orange"};

void check_prob(double p, const char* name) {
  if (p < 0.0 || p > 1.0) throw ConfigError(std::string(name) + " must lie in [0,1]");
}

}  // namespace

void NoiseModel::validate() const {
  check_prob(miss_p, "miss_p");
  check_prob(confusion_p, "confusion_p");
  check_prob(fragmentation_p, "fragmentation_p");
  if (jitter_sigma < 0.0) throw ConfigError("jitter_sigma must be non-negative");
  if (fp_rate < 0.0) throw ConfigError("fp_rate must be non-negative");
}

int WorldConfig::frame_count() const {
  return std::max(1, static_cast<int>(std::lround(duration_s * fps)));
}

void WorldConfig::validate() const {
  if (height <= 0 || width <= 0) throw ConfigError("frame dimensions must be positive");
  if (duration_s <= 0.0) throw ConfigError("duration must be positive");
  if (fps <= 0.0) throw ConfigError("fps must be positive");
  if (min_objects < 0 || max_objects < min_objects)
    throw ConfigError("object count range is invalid");
  if (min_size <= 0.0 || max_size < min_size) throw ConfigError("size range is invalid");
  if (categories.empty()) throw ConfigError("need at least one category");
  for (const std::string& c : categories) validate_category(c);
  check_prob(late_entry_p, "late_entry_p");
  check_prob(early_exit_p, "early_exit_p");
  check_prob(sinusoidal_p, "sinusoidal_p");
  check_prob(ellipse_p, "ellipse_p");
  noise.validate();
}

std::pair<double, double> SimObject::center_at(int frame) const {
  const double t = frame - entry_frame;
  double x = x0 + vx * t;
  double y = y0 + vy * t;
  if (trajectory == TrajectoryKind::Sinusoidal)
    y += amp * std::sin(2.0 * M_PI * t / period + phase);
  return {x, y};
}

std::optional<BBox> World::visible_box(int frame, int object_index) const {
  const FrameObject& fo = frames[frame][object_index];
  if (!fo.visible_flag) return std::nullopt;
  return rle_to_bbox(fo.visible);
}

std::vector<int> World::visible_frames(int object_index) const {
  std::vector<int> out;
  for (int f = 0; f < frame_count(); ++f)
    if (frames[f][object_index].visible_flag) out.push_back(f);
  return out;
}

MaskDatabase World::ground_truth_db() const {
  MaskDatabase db(config.height, config.width, config.fps, frame_count());
  for (int f = 0; f < frame_count(); ++f) {
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const FrameObject& fo = frames[f][i];
      if (!fo.visible_flag) continue;
      db.insert(f, InstanceRecord{objects[i].object_id, objects[i].category, fo.visible});
    }
  }
  return db;
}

namespace {

RasterMask shape_mask(const WorldConfig& cfg, const SimObject& obj, int frame) {
  const auto [cx, cy] = obj.center_at(frame);
  if (obj.shape == ShapeKind::Rectangle) {
    return rect_mask(cfg.height, cfg.width,
                     BBox{cx - obj.size_w / 2, cy - obj.size_h / 2, cx + obj.size_w / 2,
                          cy + obj.size_h / 2});
  }
  return ellipse_mask(cfg.height, cfg.width, cx, cy, obj.size_w / 2, obj.size_h / 2);
}

SimObject sample_object(const WorldConfig& cfg, Rng& rng, int id, int object_count) {
  const int T = cfg.frame_count();
  SimObject obj;
  obj.object_id = id;
  obj.category = cfg.categories[rng.uniform_int(0, static_cast<int>(cfg.categories.size()) - 1)];
  obj.color_tag = kColorTags[rng.uniform_int(0, static_cast<int>(kColorTags.size()) - 1)];
  obj.shape = rng.bernoulli(cfg.ellipse_p) ? ShapeKind::Ellipse : ShapeKind::Rectangle;
  obj.size_w = rng.uniform(cfg.min_size, cfg.max_size);
  obj.size_h = rng.uniform(cfg.min_size, cfg.max_size);

  obj.entry_frame = rng.bernoulli(cfg.late_entry_p) && T > 2 ? rng.uniform_int(1, T / 2) : 0;
  obj.exit_frame = T - 1;
  if (rng.bernoulli(cfg.early_exit_p) && obj.entry_frame + 1 < T - 1)
    obj.exit_frame = rng.uniform_int(obj.entry_frame + 1, T - 1);

  if (cfg.lanes) {
    const double lane_h = static_cast<double>(cfg.height) / object_count;
    obj.size_h = std::min(obj.size_h, std::max(2.0, lane_h * 0.8));
    obj.size_w = std::min(obj.size_w, cfg.width / 3.0);
    obj.y0 = lane_h * (id - 0.5);
    obj.vy = 0.0;
    obj.trajectory = TrajectoryKind::Linear;
    obj.x0 = rng.uniform(obj.size_w / 2 + 1, cfg.width - obj.size_w / 2 - 1);
    const int lifespan = std::max(1, obj.exit_frame - obj.entry_frame);
    const double dir = obj.x0 < cfg.width / 2.0 ? 1.0 : -1.0;
    const double room = dir > 0 ? cfg.width - obj.size_w / 2 - 1 - obj.x0
                                : obj.x0 - obj.size_w / 2 - 1;
    const double vmax = std::clamp(room / lifespan, 0.05, 1.2);
    obj.vx = dir * rng.uniform(0.3 * vmax, vmax);
    return obj;
  }

  obj.x0 = rng.uniform(obj.size_w / 2, cfg.width - obj.size_w / 2);
  obj.y0 = rng.uniform(obj.size_h / 2, cfg.height - obj.size_h / 2);
  obj.vx = rng.uniform(-0.8, 0.8);
  obj.vy = rng.uniform(-0.8, 0.8);
  if (rng.bernoulli(cfg.sinusoidal_p)) {
    obj.trajectory = TrajectoryKind::Sinusoidal;
    obj.amp = rng.uniform(2.0, 8.0);
    obj.period = rng.uniform(10.0, 40.0);
    obj.phase = rng.uniform(0.0, 2.0 * M_PI);
  }
  return obj;
}

}  // namespace

World gen_world(const WorldConfig& config) {
  config.validate();
  World world;
  world.config = config;
  Rng rng(config.seed);

  const int count = config.min_objects == config.max_objects
                        ? config.min_objects
                        : rng.uniform_int(config.min_objects, config.max_objects);
  for (int i = 1; i <= count; ++i)
    world.objects.push_back(sample_object(config, rng, i, std::max(count, 1)));

  const int T = config.frame_count();
  world.frames.assign(T, {});
  for (int f = 0; f < T; ++f) {
    auto& layer = world.frames[f];
    layer.resize(world.objects.size());
    std::vector<RasterMask> unoccluded(world.objects.size());
    for (std::size_t i = 0; i < world.objects.size(); ++i) {
      const SimObject& obj = world.objects[i];
      if (f < obj.entry_frame || f > obj.exit_frame) {
        unoccluded[i] = RasterMask::zeros(config.height, config.width);
      } else {
        unoccluded[i] = shape_mask(config, obj, f);
      }
      layer[i].unoccluded_area = unoccluded[i].area();
    }
    // Higher ids occlude lower ones.
    RasterMask covered = RasterMask::zeros(config.height, config.width);
    for (std::size_t i = world.objects.size(); i-- > 0;) {
      RasterMask visible = unoccluded[i];
      int area = 0;
      for (std::size_t p = 0; p < visible.bits.size(); ++p) {
        if (covered.bits[p]) visible.bits[p] = 0;
        area += visible.bits[p];
      }
      for (std::size_t p = 0; p < covered.bits.size(); ++p)
        covered.bits[p] |= unoccluded[i].bits[p];
      layer[i].visible_flag =
          layer[i].unoccluded_area > 0 && area >= 0.3 * layer[i].unoccluded_area && area > 0;
      layer[i].visible = rle_encode(visible);
    }
  }
  return world;
}

DetectionStream render_detections(const World& world, const NoiseModel& noise,
                                  std::uint64_t seed) {
  noise.validate();
  const WorldConfig& cfg = world.config;
  Rng rng(seed);
  DetectionStream stream;
  for (int f = 0; f < world.frame_count(); ++f) {
    for (std::size_t i = 0; i < world.objects.size(); ++i) {
      if (!world.is_visible(f, static_cast<int>(i))) continue;
      if (rng.bernoulli(noise.miss_p)) continue;
      BBox box = *world.visible_box(f, static_cast<int>(i));
      if (noise.jitter_sigma > 0.0) {
        const double dx = rng.normal(0.0, noise.jitter_sigma);
        const double dy = rng.normal(0.0, noise.jitter_sigma);
        box = BBox{box.x1 + dx, box.y1 + dy, box.x2 + dx, box.y2 + dy};
      }
      box.x1 = std::clamp(box.x1, 0.0, static_cast<double>(cfg.width));
      box.x2 = std::clamp(box.x2, 0.0, static_cast<double>(cfg.width));
      box.y1 = std::clamp(box.y1, 0.0, static_cast<double>(cfg.height));
      box.y2 = std::clamp(box.y2, 0.0, static_cast<double>(cfg.height));
      if (box.area() <= 0.0) continue;
      std::string category = world.objects[i].category;
      const int ncat = static_cast<int>(cfg.categories.size());
      if (ncat > 1 && rng.bernoulli(noise.confusion_p)) {
        // Relabel to a different category, the way taxonomy gaps surface.
        int idx = 0;
        for (int k = 0; k < ncat; ++k)
          if (cfg.categories[k] == category) idx = k;
        category = cfg.categories[(idx + 1 + rng.uniform_int(0, ncat - 2)) % ncat];
      }
      stream.items.push_back(Detection{f, category, rng.uniform(0.5, 1.0), box});
    }
    const int fp_count = rng.poisson(noise.fp_rate);
    for (int k = 0; k < fp_count; ++k) {
      const double w = rng.uniform(cfg.min_size, cfg.max_size);
      const double h = rng.uniform(cfg.min_size, cfg.max_size);
      const double cx = rng.uniform(0.0, cfg.width);
      const double cy = rng.uniform(0.0, cfg.height);
      BBox box{std::max(0.0, cx - w / 2), std::max(0.0, cy - h / 2),
               std::min<double>(cfg.width, cx + w / 2), std::min<double>(cfg.height, cy + h / 2)};
      if (box.area() <= 0.0) continue;
      const std::string& category =
          cfg.categories[rng.uniform_int(0, static_cast<int>(cfg.categories.size()) - 1)];
      stream.items.push_back(Detection{f, category, rng.uniform(0.3, 0.9), box});
    }
  }
  stream.normalize();
  return stream;
}

namespace {

struct ObjectAttrs {
  std::vector<std::pair<std::string, std::string>> pairs;  // attribute -> value

  const std::string& value_of(const std::string& attr) const {
    static const std::string empty;
    for (const auto& [a, v] : pairs)
      if (a == attr) return v;
    return empty;
  }
};

std::string motion_of(const SimObject& obj) {
  const double ax = std::abs(obj.vx), ay = std::abs(obj.vy);
  if (std::max(ax, ay) < 0.15) return "static";
  if (ax >= ay) return obj.vx > 0 ? "right" : "left";
  return obj.vy > 0 ? "down" : "up";
}

std::string region_of(const WorldConfig& cfg, const SimObject& obj) {
  const auto [cx, cy] = obj.center_at(obj.entry_frame);
  if (cx < cfg.width / 3.0) return "left";
  if (cx > 2.0 * cfg.width / 3.0) return "right";
  if (cy < cfg.height / 3.0) return "top";
  if (cy > 2.0 * cfg.height / 3.0) return "bottom";
  return "center";
}

std::vector<ObjectAttrs> compute_attrs(const World& world) {
  const auto& objs = world.objects;
  std::vector<std::size_t> order(objs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return objs[a].size_w * objs[a].size_h < objs[b].size_w * objs[b].size_h;
  });
  std::vector<std::string> size_q(objs.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const double p = (rank + 0.5) / order.size();
    size_q[order[rank]] = p < 1.0 / 3 ? "small" : (p > 2.0 / 3 ? "large" : "medium");
  }
  std::vector<ObjectAttrs> attrs(objs.size());
  for (std::size_t i = 0; i < objs.size(); ++i) {
    attrs[i].pairs = {{"category", objs[i].category},
                      {"color", objs[i].color_tag},
                      {"size", size_q[i]},
                      {"motion", motion_of(objs[i])},
                      {"region", region_of(world.config, objs[i])}};
  }
  return attrs;
}

// Smallest predicate subset (by size, then enumeration order) true for the
// target and false somewhere for every other object.
std::optional<std::vector<QueryPredicate>> unique_query(const std::vector<ObjectAttrs>& attrs,
                                                        std::size_t target) {
  const auto& tp = attrs[target].pairs;
  const int n = static_cast<int>(tp.size());
  for (int size = 1; size <= n; ++size) {
    std::vector<int> pick(size);
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
      bool unique = true;
      for (std::size_t o = 0; o < attrs.size() && unique; ++o) {
        if (o == target) continue;
        bool differs = false;
        for (int idx : pick)
          if (attrs[o].value_of(tp[idx].first) != tp[idx].second) differs = true;
        unique = differs;
      }
      if (unique) {
        std::vector<QueryPredicate> query;
        for (int idx : pick) query.push_back({tp[idx].first, tp[idx].second});
        return query;
      }
      int i = size - 1;
      while (i >= 0 && pick[i] == n - size + i) --i;
      if (i < 0) break;
      ++pick[i];
      for (int j = i + 1; j < size; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  return std::nullopt;
}

std::string render_query_text(const std::vector<QueryPredicate>& query) {
  std::string size, color, category = "object", motion, region;
  for (const QueryPredicate& p : query) {
    if (p.attribute == "size") size = p.value;
    if (p.attribute == "color") color = p.value;
    if (p.attribute == "category") category = p.value;
    if (p.attribute == "motion") motion = p.value;
    if (p.attribute == "region") region = p.value;
  }
  std::string text = "the";
  if (!size.empty()) text += " " + size;
  if (!color.empty()) text += " " + color;
  text += " " + category;
  if (!motion.empty()) text += motion == "static" ? " that stays put" : " moving " + motion;
  if (!region.empty()) text += " starting in the " + region + (region == "center" ? "" : " third");
  return text;
}

}  // namespace

Episode gen_episode(const World& world, std::uint64_t seed, const EpisodeOptions& options) {
  if (world.objects.empty()) throw DataError("gen_episode: world has no objects");
  if (options.candidate_count < 1) throw ConfigError("candidate_count must be positive");
  Rng rng(seed);
  const int T = world.frame_count();
  const double fps = world.config.fps;

  const std::vector<ObjectAttrs> attrs = compute_attrs(world);

  // Deterministically shuffled target preference.
  std::vector<std::size_t> order(world.objects.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);

  std::size_t target_index = order.size();
  std::vector<QueryPredicate> query;
  for (std::size_t idx : order) {
    if (world.visible_frames(static_cast<int>(idx)).empty()) continue;
    if (auto q = unique_query(attrs, idx)) {
      target_index = idx;
      query = std::move(*q);
      break;
    }
  }
  if (target_index == order.size())
    throw DataError("gen_episode: no uniquely identifiable object");

  Episode ep;
  ep.db = world.ground_truth_db();
  ep.target_id = world.objects[target_index].object_id;
  ep.query = query;
  ep.query_text = render_query_text(query);

  const std::vector<int> vis = world.visible_frames(static_cast<int>(target_index));
  int lo = vis.front(), hi = vis.back();
  if (options.subspan && hi > lo) {
    const int len = hi - lo + 1;
    const int min_len = std::max(1, len / 3);
    const int start = rng.uniform_int(lo, hi - min_len + 1);
    const int end = rng.uniform_int(start + min_len - 1, hi);
    lo = start;
    hi = end;
  }
  ep.gt.interval = TemporalInterval{lo / fps, hi / fps};
  for (int f : vis)
    if (f >= lo && f <= hi) ep.gt.boxes[f] = *world.visible_box(f, static_cast<int>(target_index));

  // Candidate answers: the correct pair plus decoys over wrong ids and
  // perturbed intervals.
  auto key_of = [&](const EpisodeCandidate& c) {
    return std::to_string(c.instance_id) + ":" + std::to_string(std::lround(c.interval.t_s * fps)) +
           ":" + std::to_string(std::lround(c.interval.t_e * fps));
  };
  auto lifespan_of = [&](std::size_t idx) {
    const std::vector<int> f = world.visible_frames(static_cast<int>(idx));
    if (f.empty()) return TemporalInterval{0.0, 0.0};
    return TemporalInterval{f.front() / fps, f.back() / fps};
  };

  std::vector<EpisodeCandidate> cands;
  std::set<std::string> seen;
  auto push = [&](int id, TemporalInterval iv) {
    EpisodeCandidate c{id, iv, {}};
    if (seen.insert(key_of(c)).second) cands.push_back(c);
  };
  push(ep.target_id, ep.gt.interval);

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < world.objects.size(); ++i)
    if (i != target_index && !world.visible_frames(static_cast<int>(i)).empty()) others.push_back(i);

  const TemporalInterval full{0.0, (T - 1) / fps};
  const double mid = (ep.gt.interval.t_s + ep.gt.interval.t_e) / 2.0;
  int guard = 0;
  while (static_cast<int>(cands.size()) < options.candidate_count && guard < 200) {
    switch (guard % 5) {
      case 0:
        if (!others.empty()) {
          const std::size_t o = others[rng.uniform_int(0, static_cast<int>(others.size()) - 1)];
          push(world.objects[o].object_id, lifespan_of(o));
        }
        break;
      case 1:
        push(ep.target_id, TemporalInterval{ep.gt.interval.t_s, mid});
        break;
      case 2:
        if (!others.empty()) {
          const std::size_t o = others[rng.uniform_int(0, static_cast<int>(others.size()) - 1)];
          push(world.objects[o].object_id, ep.gt.interval);
        }
        break;
      case 3:
        push(ep.target_id,
             TemporalInterval{mid, std::min(full.t_e, ep.gt.interval.t_e + mid / 2.0 + 0.5)});
        break;
      case 4: {
        const int a = rng.uniform_int(0, T - 1);
        const int b = rng.uniform_int(a, T - 1);
        const int id = others.empty()
                           ? ep.target_id
                           : world.objects[others[rng.uniform_int(
                                 0, static_cast<int>(others.size()) - 1)]].object_id;
        push(id, TemporalInterval{a / fps, b / fps});
        break;
      }
    }
    ++guard;
  }
  if (static_cast<int>(cands.size()) < options.candidate_count)
    throw DataError("gen_episode: could not assemble a distinct candidate set");

  // Shuffle answer slots so position carries no signal.
  for (std::size_t i = cands.size(); i > 1; --i)
    std::swap(cands[i - 1], cands[rng.uniform_int(0, static_cast<int>(i) - 1)]);

  for (EpisodeCandidate& c : cands) {
    std::size_t obj_idx = world.objects.size();
    for (std::size_t i = 0; i < world.objects.size(); ++i)
      if (world.objects[i].object_id == c.instance_id) obj_idx = i;
    if (obj_idx == world.objects.size()) {
      c.features = {0.0, 0.0, 0.0};
      continue;
    }
    int matched = 0;
    for (const QueryPredicate& p : query)
      if (attrs[obj_idx].value_of(p.attribute) == p.value) ++matched;
    const double match = query.empty() ? 0.0 : static_cast<double>(matched) / query.size();
    const double span_tiou = temporal_iou(c.interval, lifespan_of(obj_idx));
    const double len =
        static_cast<double>(world.visible_frames(static_cast<int>(obj_idx)).size()) / T;
    c.features = {match, span_tiou, len};
  }

  ep.candidates = std::move(cands);
  for (std::size_t i = 0; i < ep.candidates.size(); ++i) {
    if (ep.candidates[i].instance_id == ep.target_id &&
        ep.candidates[i].interval == ep.gt.interval)
      ep.correct_index = static_cast<int>(i);
  }
  return ep;
}

MaskDatabase corrupt_tracks(const MaskDatabase& db, double fragmentation_p, std::uint64_t seed) {
  check_prob(fragmentation_p, "fragmentation_p");
  Rng rng(seed);
  const std::vector<int> ids = db.instance_ids();
  int fresh = ids.empty() ? 1 : ids.back() + 1;

  MaskDatabase out(db.height(), db.width(), db.fps(), db.frame_count());
  for (int id : ids) {
    const InstanceTube tube = db.tube_of(id);
    int current = id;
    const std::string& category = db.category_of(id);
    for (std::size_t k = 0; k < tube.entries.size(); ++k) {
      if (k > 0 && rng.bernoulli(fragmentation_p)) current = fresh++;
      out.insert(tube.entries[k].frame_index,
                 InstanceRecord{current, category, tube.entries[k].mask});
    }
  }
  return out;
}

}  // namespace stvg
