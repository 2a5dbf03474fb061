#include "stvg/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "internal/text.hpp"
#include "stvg/errors.hpp"

namespace stvg {

std::vector<double> normalize_advantages(const std::vector<double>& rewards) {
  const int n = static_cast<int>(rewards.size());
  if (n < 2) throw DataError("normalize_advantages: need at least two rewards");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  const double std_dev = std::sqrt(var);
  std::vector<double> advantages(n, 0.0);
  if (std_dev == 0.0) return advantages;
  for (int i = 0; i < n; ++i) advantages[i] = (rewards[i] - mean) / std_dev;
  return advantages;
}

double surrogate_term(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

double exact_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DataError("exact_kl: distribution sizes differ");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw DataError("exact_kl: q vanishes on p's support");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

ToyPolicy ToyPolicy::init(int feature_count, int candidate_count, double temperature) {
  ToyPolicy p;
  p.weights.assign(feature_count, 0.0);
  p.bias.assign(candidate_count, 0.0);
  p.temperature = temperature;
  return p;
}

std::vector<double> ToyPolicy::logits(const Episode& episode) const {
  const std::size_t k = episode.candidates.size();
  if (bias.size() != k)
    throw DataError("policy sized for " + std::to_string(bias.size()) + " candidates, episode has " +
                    std::to_string(k));
  std::vector<double> z(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& f = episode.candidates[i].features;
    double v = bias[i];
    for (std::size_t j = 0; j < weights.size() && j < f.size(); ++j) v += weights[j] * f[j];
    z[i] = v / temperature;
  }
  return z;
}

std::vector<double> ToyPolicy::probs(const Episode& episode) const {
  std::vector<double> z = logits(episode);
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

void ToyPolicy::save(const std::string& path) const {
  nlohmann::json j;
  j["weights"] = weights;
  j["bias"] = bias;
  j["temperature"] = temperature;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

ToyPolicy ToyPolicy::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
    ToyPolicy p;
    p.weights = j.at("weights").get<std::vector<double>>();
    p.bias = j.at("bias").get<std::vector<double>>();
    p.temperature = j.at("temperature").get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

void GrpoConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be at least 2");
  if (clip_epsilon <= 0.0) throw ConfigError("clip_epsilon must be positive");
  if (kl_beta < 0.0) throw ConfigError("kl_beta must be non-negative");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (update_count < 0) throw ConfigError("update_count must be non-negative");
  if (temperature <= 0.0) throw ConfigError("temperature must be positive");
  if (refresh_interval < 1) throw ConfigError("refresh_interval must be at least 1");
  if (corrupt_format_p < 0.0 || corrupt_format_p > 1.0)
    throw ConfigError("corrupt_format_p must lie in [0,1]");
}

std::string render_transcript(const Episode& episode, int candidate_index, bool corrupt_format) {
  const EpisodeCandidate& c = episode.candidates[candidate_index];
  char body[96];
  std::snprintf(body, sizeof(body), "start=%.3f end=%.3f id=%d", c.interval.t_s, c.interval.t_e,
                c.instance_id);
  if (corrupt_format) return std::string("<answer>") + body + "</answer>";
  return std::string("<think>candidate ") + std::to_string(candidate_index + 1) + " fits " +
         episode.query_text + "</think><answer>" + body + "</answer>";
}

GrpoStepStats grpo_step(ToyPolicy& policy, const ToyPolicy& old_policy,
                        const ToyPolicy& ref_policy, const Episode& episode,
                        const GrpoConfig& config, Rng& rng) {
  config.validate();
  if (episode.candidates.empty()) throw DataError("grpo_step: episode has no candidates");
  const int n = config.group_size;
  const std::size_t k = episode.candidates.size();

  const std::vector<double> probs_old = old_policy.probs(episode);
  const std::vector<double> probs_ref = ref_policy.probs(episode);
  const std::vector<double> probs_cur = policy.probs(episode);

  // Sample the response group from the frozen sampling policy.
  std::vector<int> picks(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = static_cast<int>(k) - 1;
    for (std::size_t j = 0; j < k; ++j) {
      acc += probs_old[j];
      if (u < acc) {
        pick = static_cast<int>(j);
        break;
      }
    }
    picks[i] = pick;
  }

  GrpoStepStats stats;
  std::vector<double> rewards(n);
  for (int i = 0; i < n; ++i) {
    const bool corrupt = config.corrupt_format_p > 0.0 && rng.bernoulli(config.corrupt_format_p);
    const Transcript t = parse_transcript(render_transcript(episode, picks[i], corrupt));
    const RewardBreakdown b =
        reward_total(t, episode.gt, episode.target_id, episode.db, config.variant);
    rewards[i] = config.include_format_reward ? b.total : b.total - b.r_f;
    stats.mean_reward += rewards[i];
    stats.mean_r_t += b.r_t;
    stats.mean_r_s += b.r_s;
    stats.mean_r_f += b.r_f;
  }
  stats.mean_reward /= n;
  stats.mean_r_t /= n;
  stats.mean_r_s /= n;
  stats.mean_r_f /= n;

  const std::vector<double> advantages = normalize_advantages(rewards);
  stats.kl = exact_kl(probs_cur, probs_ref);

  // Surrogate value and the per-logit gradient. The min picks the unclipped
  // branch exactly when ratio*A <= clipped*A; only that branch carries a
  // gradient.
  double surrogate = 0.0;
  std::vector<double> dj_dz(k, 0.0);
  const double tau = policy.temperature;
  for (int i = 0; i < n; ++i) {
    const int c = picks[i];
    const double ratio = probs_cur[c] / probs_old[c];
    surrogate += surrogate_term(ratio, advantages[i], config.clip_epsilon);
    const double clipped = std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
    const bool unclipped_active = ratio * advantages[i] <= clipped * advantages[i];
    if (!unclipped_active) {
      ++stats.clipped;
      continue;
    }
    const double coeff = advantages[i] / (static_cast<double>(n) * probs_old[c]);
    for (std::size_t j = 0; j < k; ++j) {
      const double dpc_dzj = probs_cur[c] * ((static_cast<int>(j) == c ? 1.0 : 0.0) - probs_cur[j]) / tau;
      dj_dz[j] += coeff * dpc_dzj;
    }
  }
  surrogate /= n;
  stats.objective = surrogate - config.kl_beta * stats.kl;

  if (config.kl_beta > 0.0) {
    for (std::size_t j = 0; j < k; ++j) {
      const double dkl_dzj =
          probs_cur[j] / tau * (std::log(probs_cur[j] / probs_ref[j]) - stats.kl);
      dj_dz[j] -= config.kl_beta * dkl_dzj;
    }
  }

  for (std::size_t j = 0; j < k; ++j) {
    const auto& f = episode.candidates[j].features;
    for (std::size_t w = 0; w < policy.weights.size() && w < f.size(); ++w)
      policy.weights[w] += config.learning_rate * dj_dz[j] * f[w];
    policy.bias[j] += config.learning_rate * dj_dz[j];
  }
  return stats;
}

ToyEnv::ToyEnv(const Options& options) {
  if (options.pool_size < 1) throw ConfigError("ToyEnv: pool_size must be positive");
  pool_.reserve(options.pool_size);
  for (int i = 0; i < options.pool_size; ++i) {
    WorldConfig wc = options.world;
    wc.seed = options.world.seed + static_cast<std::uint64_t>(i) * 1000003ULL;
    const World world = gen_world(wc);
    Episode ep = gen_episode(world, options.seed + static_cast<std::uint64_t>(i) * 7919ULL,
                             options.episode);
    ep.sample_id = "env" + std::to_string(i);
    if (candidate_count_ == 0) candidate_count_ = static_cast<int>(ep.candidates.size());
    if (static_cast<int>(ep.candidates.size()) != candidate_count_)
      throw DataError("ToyEnv: episodes disagree on candidate count");
    pool_.push_back(std::move(ep));
  }
}

const Episode& ToyEnv::episode_for_update(int update) const {
  return pool_[static_cast<std::size_t>(update) % pool_.size()];
}

TrainResult train_toy(const ToyEnv& env, const GrpoConfig& config) {
  config.validate();
  TrainResult result;
  result.policy = ToyPolicy::init(3, env.candidate_count(), config.temperature);
  const ToyPolicy ref = result.policy;
  ToyPolicy old = result.policy;
  Rng rng(config.seed);
  result.curve.reserve(config.update_count);
  for (int u = 0; u < config.update_count; ++u) {
    if (u % config.refresh_interval == 0) old = result.policy;
    const Episode& ep = env.episode_for_update(u);
    const GrpoStepStats stats = grpo_step(result.policy, old, ref, ep, config, rng);
    result.curve.push_back(
        {u, stats.mean_reward, stats.mean_r_t, stats.mean_r_s, stats.mean_r_f, stats.kl});
  }
  return result;
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "update,mean_reward,mean_r_t,mean_r_s,mean_r_f,kl\n";
  char buf[192];
  for (const CurvePoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", p.update, p.mean_reward,
                  p.mean_r_t, p.mean_r_s, p.mean_r_f, p.kl);
    out << buf;
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace stvg
