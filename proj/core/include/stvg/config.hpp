#pragma once

#include <string>

#include "stvg/grpo.hpp"
#include "stvg/identity.hpp"
#include "stvg/prompt_plan.hpp"
#include "stvg/rewards.hpp"
#include "stvg/simulator.hpp"

namespace stvg {

struct PromptConfig {
  double theta = 1.0 / 3.0;
  MarkerStyle style;
  double pixel_budget = 1.6e6;
};

struct EvalConfig {
  bool repair = false;
  double theta = 0.0;          // evaluation-side filtering; 0 keeps everything
  int boundary_tolerance = 0;  // 0 picks the diagonal-based default
};

struct PathsConfig {
  std::string out_dir = "out";
};

// Everything a run needs, one section per subsystem. Defaults carry the
// reported operating point: re-detection every 15 frames behind 0.4/0.6
// gates, detector confidence 0.25, filter threshold 1/3, red size-20 numeric
// markers, groups of 8.
struct RunConfig {
  WorldConfig simulator;
  EpisodeOptions episode;
  TubeBuildOptions identity;
  PromptConfig prompt;
  RewardVariant reward_variant = RewardVariant::Decoupled;
  GrpoConfig grpo;
  int grpo_pool_size = 64;
  EvalConfig evaluation;
  PathsConfig paths;

  static RunConfig from_file(const std::string& path);
  // Parses a JSON document; unknown keys are rejected so typos surface.
  static RunConfig from_json_text(const std::string& text, const std::string& origin);
  std::string to_json_text() const;
};

}  // namespace stvg
