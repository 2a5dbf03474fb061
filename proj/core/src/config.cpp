#include "stvg/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stvg/errors.hpp"

namespace stvg {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in config section '" + section + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

GlyphSet glyphset_from(const std::string& token) {
  if (token == "numbers") return GlyphSet::Numbers;
  if (token == "upper") return GlyphSet::UppercaseLetters;
  if (token == "lower") return GlyphSet::LowercaseLetters;
  if (token == "mixed") return GlyphSet::Mixed;
  throw ConfigError("unknown glyph set '" + token + "'");
}

std::string glyphset_token(GlyphSet set) {
  switch (set) {
    case GlyphSet::Numbers: return "numbers";
    case GlyphSet::UppercaseLetters: return "upper";
    case GlyphSet::LowercaseLetters: return "lower";
    case GlyphSet::Mixed: return "mixed";
  }
  return "numbers";
}

void parse_noise(const json& j, NoiseModel& noise) {
  check_keys(j, {"miss_p", "jitter_sigma", "fp_rate", "confusion_p", "fragmentation_p"},
             "simulator.noise");
  read(j, "miss_p", noise.miss_p);
  read(j, "jitter_sigma", noise.jitter_sigma);
  read(j, "fp_rate", noise.fp_rate);
  read(j, "confusion_p", noise.confusion_p);
  read(j, "fragmentation_p", noise.fragmentation_p);
}

void parse_simulator(const json& j, WorldConfig& cfg, EpisodeOptions& episode) {
  check_keys(j,
             {"seed", "height", "width", "duration_s", "fps", "min_objects", "max_objects",
              "min_size", "max_size", "categories", "late_entry_p", "early_exit_p", "sinusoidal_p",
              "ellipse_p", "lanes", "noise", "candidates", "subspan"},
             "simulator");
  read(j, "candidates", episode.candidate_count);
  read(j, "subspan", episode.subspan);
  read(j, "seed", cfg.seed);
  read(j, "height", cfg.height);
  read(j, "width", cfg.width);
  read(j, "duration_s", cfg.duration_s);
  read(j, "fps", cfg.fps);
  read(j, "min_objects", cfg.min_objects);
  read(j, "max_objects", cfg.max_objects);
  read(j, "min_size", cfg.min_size);
  read(j, "max_size", cfg.max_size);
  read(j, "categories", cfg.categories);
  read(j, "late_entry_p", cfg.late_entry_p);
  read(j, "early_exit_p", cfg.early_exit_p);
  read(j, "sinusoidal_p", cfg.sinusoidal_p);
  read(j, "ellipse_p", cfg.ellipse_p);
  read(j, "lanes", cfg.lanes);
  if (j.contains("noise")) parse_noise(j.at("noise"), cfg.noise);
}

void parse_identity(const json& j, TubeBuildOptions& cfg) {
  check_keys(j,
             {"redetect_every", "iou_gate", "overlap_gate", "detector_confidence", "backward",
              "fps"},
             "identity");
  read(j, "redetect_every", cfg.redetect_every);
  read(j, "iou_gate", cfg.iou_gate);
  read(j, "overlap_gate", cfg.overlap_gate);
  read(j, "detector_confidence", cfg.confidence_min);
  read(j, "backward", cfg.backward);
  read(j, "fps", cfg.fps);
}

void parse_prompt(const json& j, PromptConfig& cfg) {
  check_keys(j, {"theta", "glyphs", "font_size", "color", "pixel_budget"}, "prompt");
  read(j, "theta", cfg.theta);
  if (j.contains("glyphs")) cfg.style.glyphs = glyphset_from(j.at("glyphs").get<std::string>());
  read(j, "font_size", cfg.style.font_size);
  if (j.contains("color")) {
    const auto rgb = j.at("color").get<std::vector<int>>();
    if (rgb.size() != 3) throw ConfigError("prompt.color needs exactly three components");
    for (int v : rgb)
      if (v < 0 || v > 255) throw ConfigError("prompt.color components must lie in [0,255]");
    cfg.style.color = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                       static_cast<std::uint8_t>(rgb[2])};
  }
  read(j, "pixel_budget", cfg.pixel_budget);
}

void parse_grpo(const json& j, GrpoConfig& cfg, int& pool_size) {
  check_keys(j,
             {"group_size", "clip_epsilon", "kl_beta", "learning_rate", "update_count", "seed",
              "temperature", "refresh_interval", "include_format_reward", "corrupt_format_p",
              "pool_size"},
             "grpo");
  read(j, "group_size", cfg.group_size);
  read(j, "clip_epsilon", cfg.clip_epsilon);
  read(j, "kl_beta", cfg.kl_beta);
  read(j, "learning_rate", cfg.learning_rate);
  read(j, "update_count", cfg.update_count);
  read(j, "seed", cfg.seed);
  read(j, "temperature", cfg.temperature);
  read(j, "refresh_interval", cfg.refresh_interval);
  read(j, "include_format_reward", cfg.include_format_reward);
  read(j, "corrupt_format_p", cfg.corrupt_format_p);
  read(j, "pool_size", pool_size);
}

void parse_evaluation(const json& j, EvalConfig& cfg) {
  check_keys(j, {"repair", "theta", "boundary_tolerance"}, "evaluation");
  read(j, "repair", cfg.repair);
  read(j, "theta", cfg.theta);
  read(j, "boundary_tolerance", cfg.boundary_tolerance);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str(), path);
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  check_keys(j, {"simulator", "identity", "prompt", "rewards", "grpo", "evaluation", "paths"},
             "(root)");
  RunConfig cfg;
  if (j.contains("simulator")) parse_simulator(j.at("simulator"), cfg.simulator, cfg.episode);
  if (j.contains("identity")) parse_identity(j.at("identity"), cfg.identity);
  if (j.contains("prompt")) parse_prompt(j.at("prompt"), cfg.prompt);
  if (j.contains("rewards")) {
    check_keys(j.at("rewards"), {"variant"}, "rewards");
    if (j.at("rewards").contains("variant"))
      cfg.reward_variant = reward_variant_from_token(j.at("rewards").at("variant"));
  }
  if (j.contains("grpo")) parse_grpo(j.at("grpo"), cfg.grpo, cfg.grpo_pool_size);
  if (j.contains("evaluation")) parse_evaluation(j.at("evaluation"), cfg.evaluation);
  if (j.contains("paths")) {
    check_keys(j.at("paths"), {"out_dir"}, "paths");
    read(j.at("paths"), "out_dir", cfg.paths.out_dir);
  }
  cfg.grpo.variant = cfg.reward_variant;
  return cfg;
}

std::string RunConfig::to_json_text() const {
  json j;
  j["simulator"] = {{"seed", simulator.seed},
                    {"height", simulator.height},
                    {"width", simulator.width},
                    {"duration_s", simulator.duration_s},
                    {"fps", simulator.fps},
                    {"min_objects", simulator.min_objects},
                    {"max_objects", simulator.max_objects},
                    {"min_size", simulator.min_size},
                    {"max_size", simulator.max_size},
                    {"categories", simulator.categories},
                    {"late_entry_p", simulator.late_entry_p},
                    {"early_exit_p", simulator.early_exit_p},
                    {"sinusoidal_p", simulator.sinusoidal_p},
                    {"ellipse_p", simulator.ellipse_p},
                    {"lanes", simulator.lanes},
                    {"candidates", episode.candidate_count},
                    {"subspan", episode.subspan},
                    {"noise",
                     {{"miss_p", simulator.noise.miss_p},
                      {"jitter_sigma", simulator.noise.jitter_sigma},
                      {"fp_rate", simulator.noise.fp_rate},
                      {"confusion_p", simulator.noise.confusion_p},
                      {"fragmentation_p", simulator.noise.fragmentation_p}}}};
  j["identity"] = {{"redetect_every", identity.redetect_every},
                   {"iou_gate", identity.iou_gate},
                   {"overlap_gate", identity.overlap_gate},
                   {"detector_confidence", identity.confidence_min},
                   {"backward", identity.backward},
                   {"fps", identity.fps}};
  j["prompt"] = {{"theta", prompt.theta},
                 {"glyphs", glyphset_token(prompt.style.glyphs)},
                 {"font_size", prompt.style.font_size},
                 {"color", {prompt.style.color[0], prompt.style.color[1], prompt.style.color[2]}},
                 {"pixel_budget", prompt.pixel_budget}};
  j["rewards"] = {{"variant", reward_variant_token(reward_variant)}};
  j["grpo"] = {{"group_size", grpo.group_size},
               {"clip_epsilon", grpo.clip_epsilon},
               {"kl_beta", grpo.kl_beta},
               {"learning_rate", grpo.learning_rate},
               {"update_count", grpo.update_count},
               {"seed", grpo.seed},
               {"temperature", grpo.temperature},
               {"refresh_interval", grpo.refresh_interval},
               {"include_format_reward", grpo.include_format_reward},
               {"corrupt_format_p", grpo.corrupt_format_p},
               {"pool_size", grpo_pool_size}};
  j["evaluation"] = {{"repair", evaluation.repair},
                     {"theta", evaluation.theta},
                     {"boundary_tolerance", evaluation.boundary_tolerance}};
  j["paths"] = {{"out_dir", paths.out_dir}};
  return j.dump(2) + "\n";
}

}  // namespace stvg
