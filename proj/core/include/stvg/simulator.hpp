#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stvg/identity.hpp"
#include "stvg/mask_db.hpp"

namespace stvg {

enum class ShapeKind { Rectangle, Ellipse };
enum class TrajectoryKind { Linear, Sinusoidal };

// Detector/tracker imperfection knobs.
struct NoiseModel {
  double miss_p = 0.0;
  double jitter_sigma = 0.0;   // pixels, applied to the box center
  double fp_rate = 0.0;        // expected false positives per frame
  double confusion_p = 0.0;    // category relabeling probability
  double fragmentation_p = 0.0;

  void validate() const;
};

struct WorldConfig {
  std::uint64_t seed = 1;
  int height = 96;
  int width = 96;
  double duration_s = 30.0;
  double fps = 2.0;
  int min_objects = 2;
  int max_objects = 5;
  double min_size = 10.0;
  double max_size = 30.0;
  std::vector<std::string> categories = {"person", "car", "dog", "ball"};
  double late_entry_p = 0.35;
  double early_exit_p = 0.15;
  double sinusoidal_p = 0.4;
  double ellipse_p = 0.5;
  // Pins every object to its own horizontal lane with horizontal motion, so
  // nothing ever occludes anything. Late entries are still sampled.
  bool lanes = false;
  NoiseModel noise;

  int frame_count() const;
  void validate() const;
};

struct SimObject {
  int object_id = 0;
  std::string category;
  std::string color_tag;
  ShapeKind shape = ShapeKind::Rectangle;
  double size_w = 0.0, size_h = 0.0;
  int entry_frame = 0, exit_frame = 0;
  TrajectoryKind trajectory = TrajectoryKind::Linear;
  double x0 = 0.0, y0 = 0.0;   // center at entry
  double vx = 0.0, vy = 0.0;   // px per frame
  double amp = 0.0, period = 1.0, phase = 0.0;

  // Center at a frame, before any clipping.
  std::pair<double, double> center_at(int frame) const;
};

// Fully rendered world: per frame and per object, the unoccluded-area count
// and the visible mask after z-order occlusion (higher ids occlude lower).
class World {
 public:
  struct FrameObject {
    RleMask visible;
    int unoccluded_area = 0;
    bool visible_flag = false;
  };

  WorldConfig config;
  std::vector<SimObject> objects;
  std::vector<std::vector<FrameObject>> frames;  // [frame][object index]

  int frame_count() const { return static_cast<int>(frames.size()); }

  bool is_visible(int frame, int object_index) const {
    return frames[frame][object_index].visible_flag;
  }
  std::optional<BBox> visible_box(int frame, int object_index) const;
  std::vector<int> visible_frames(int object_index) const;

  // Ground-truth database: instance id = object id, visible frames only.
  MaskDatabase ground_truth_db() const;
};

// Deterministic per config.seed. Throws ConfigError on an invalid config.
World gen_world(const WorldConfig& config);

// Noisy detector pass over the visible objects: misses, center jitter,
// category confusion, and uniformly placed false positives.
DetectionStream render_detections(const World& world, const NoiseModel& noise,
                                  std::uint64_t seed);

// One query attribute test, e.g. {"category","dog"} or {"motion","left"}.
struct QueryPredicate {
  std::string attribute;
  std::string value;
};

struct EpisodeCandidate {
  int instance_id = 0;
  TemporalInterval interval;
  // {query attribute match ratio, interval-vs-lifespan tIoU, tube length
  // fraction}: everything a policy may look at.
  std::array<double, 3> features{};
};

// One grounding task: a video's database, the target annotation, a query
// that exactly one object satisfies, and a discrete candidate answer set
// containing the correct (id, interval) pair.
struct Episode {
  std::string sample_id;
  MaskDatabase db;
  GroundTruthTube gt;
  int target_id = 0;
  std::vector<QueryPredicate> query;
  std::string query_text;
  std::vector<EpisodeCandidate> candidates;
  int correct_index = -1;
};

struct EpisodeOptions {
  int candidate_count = 5;
  // When set, the ground-truth interval is a random sub-span of the target's
  // visible lifespan instead of the full lifespan.
  bool subspan = false;
};

// Deterministic per (world, seed). Throws DataError when no object can be
// singled out by the predicate set.
Episode gen_episode(const World& world, std::uint64_t seed, const EpisodeOptions& options = {});

// Identity fragmentation: at each frame transition of a tube, with the given
// probability the instance continues under a fresh id. Geometry is untouched.
MaskDatabase corrupt_tracks(const MaskDatabase& db, double fragmentation_p, std::uint64_t seed);

}  // namespace stvg
