#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stvg/rewards.hpp"
#include "stvg/rng.hpp"
#include "stvg/simulator.hpp"

namespace stvg {

// Group-relative advantages: (R_i - mean) / population std. A zero-spread
// group yields all-zero advantages. Throws DataError for fewer than two
// rewards.
std::vector<double> normalize_advantages(const std::vector<double>& rewards);

// min(ratio * A, clip(ratio, 1-eps, 1+eps) * A).
double surrogate_term(double ratio, double advantage, double epsilon);

// Sum p ln(p/q). Throws DataError on a size mismatch or whenever q vanishes
// where p does not.
double exact_kl(std::span<const double> p, std::span<const double> q);

// Softmax policy over an episode's candidate answers. Logits are a shared
// linear map of the candidate features plus a per-slot bias.
struct ToyPolicy {
  std::vector<double> weights;
  std::vector<double> bias;
  double temperature = 1.0;

  static ToyPolicy init(int feature_count, int candidate_count, double temperature = 1.0);

  std::vector<double> logits(const Episode& episode) const;
  std::vector<double> probs(const Episode& episode) const;

  void save(const std::string& path) const;
  static ToyPolicy load(const std::string& path);
};

struct GrpoConfig {
  int group_size = 8;
  double clip_epsilon = 0.2;
  double kl_beta = 0.04;
  double learning_rate = 0.3;
  int update_count = 2000;
  std::uint64_t seed = 7;
  double temperature = 1.0;
  // How many updates the sampling policy stays frozen; 1 is pure on-policy.
  int refresh_interval = 1;
  RewardVariant variant = RewardVariant::Decoupled;
  // Drop r_f from the optimized total (it stays in the diagnostics).
  bool include_format_reward = true;
  // Probability of emitting a transcript with broken tags, to exercise the
  // format-reward path.
  double corrupt_format_p = 0.0;

  void validate() const;
};

struct GrpoStepStats {
  double objective = 0.0;
  double mean_reward = 0.0;
  double mean_r_t = 0.0;
  double mean_r_s = 0.0;
  double mean_r_f = 0.0;
  double kl = 0.0;
  int clipped = 0;
};

// Renders a sampled candidate as a canonical (or deliberately broken)
// transcript.
std::string render_transcript(const Episode& episode, int candidate_index, bool corrupt_format);

// One ascent step on the clipped-surrogate-minus-KL objective: samples a
// group from old_policy, scores the transcripts, normalizes advantages, and
// applies the analytic gradient to `policy`.
GrpoStepStats grpo_step(ToyPolicy& policy, const ToyPolicy& old_policy,
                        const ToyPolicy& ref_policy, const Episode& episode,
                        const GrpoConfig& config, Rng& rng);

// Episode source for the trainer: a deterministic pool generated up front
// and cycled across updates.
class ToyEnv {
 public:
  struct Options {
    WorldConfig world;
    EpisodeOptions episode;
    int pool_size = 64;
    std::uint64_t seed = 7;
  };

  explicit ToyEnv(const Options& options);

  const Episode& episode_for_update(int update) const;
  int candidate_count() const { return candidate_count_; }
  int pool_size() const { return static_cast<int>(pool_.size()); }

 private:
  std::vector<Episode> pool_;
  int candidate_count_ = 0;
};

struct CurvePoint {
  int update = 0;
  double mean_reward = 0.0;
  double mean_r_t = 0.0;
  double mean_r_s = 0.0;
  double mean_r_f = 0.0;
  double kl = 0.0;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  ToyPolicy policy;
};

// Runs update_count GRPO steps: the reference policy freezes at
// initialization, the sampling policy refreshes on the configured cadence.
// Bit-deterministic for a fixed (env, config).
TrainResult train_toy(const ToyEnv& env, const GrpoConfig& config);

// CSV: update,mean_reward,mean_r_t,mean_r_s,mean_r_f,kl.
void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve);

}  // namespace stvg
