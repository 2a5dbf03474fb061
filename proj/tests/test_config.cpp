#include <doctest.h>

#include "stvg/config.hpp"
#include "stvg/errors.hpp"

using namespace stvg;

TEST_CASE("defaults carry the reported operating point") {
  const RunConfig cfg;
  CHECK(cfg.identity.redetect_every == 15);
  CHECK(cfg.identity.iou_gate == 0.4);
  CHECK(cfg.identity.overlap_gate == 0.6);
  CHECK(cfg.identity.confidence_min == 0.25);
  CHECK(cfg.prompt.theta == doctest::Approx(1.0 / 3));
  CHECK(cfg.prompt.style.glyphs == GlyphSet::Numbers);
  CHECK(cfg.prompt.style.font_size == 20.0);
  CHECK(cfg.prompt.style.color == std::array<std::uint8_t, 3>{255, 0, 0});
  CHECK(cfg.prompt.pixel_budget == 1.6e6);
  CHECK(cfg.simulator.fps == 2.0);
  CHECK(cfg.grpo.group_size == 8);
  CHECK(cfg.grpo.clip_epsilon == 0.2);
  CHECK(cfg.grpo.kl_beta == 0.04);
}

TEST_CASE("config text round trips and rejects unknown keys") {
  RunConfig cfg;
  cfg.simulator.seed = 99;
  cfg.identity.redetect_every = 7;
  cfg.prompt.style.glyphs = GlyphSet::Mixed;
  cfg.reward_variant = RewardVariant::Coupled;
  cfg.grpo.kl_beta = 0.5;
  cfg.grpo_pool_size = 5;
  cfg.episode.candidate_count = 9;

  const RunConfig back = RunConfig::from_json_text(cfg.to_json_text(), "(test)");
  CHECK(back.simulator.seed == 99);
  CHECK(back.identity.redetect_every == 7);
  CHECK(back.prompt.style.glyphs == GlyphSet::Mixed);
  CHECK(back.reward_variant == RewardVariant::Coupled);
  CHECK(back.grpo.variant == RewardVariant::Coupled);
  CHECK(back.grpo.kl_beta == 0.5);
  CHECK(back.grpo_pool_size == 5);
  CHECK(back.episode.candidate_count == 9);

  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"identity":{"redetect":15}})", "(test)"),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"nope":{}})", "(test)"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text("{broken", "(test)"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"rewards":{"variant":"xyz"}})", "(test)"),
                  ConfigError);
}

TEST_CASE("partial configs keep defaults elsewhere") {
  const RunConfig cfg =
      RunConfig::from_json_text(R"({"grpo":{"learning_rate":0.05},"prompt":{"theta":0.5}})",
                                "(test)");
  CHECK(cfg.grpo.learning_rate == 0.05);
  CHECK(cfg.prompt.theta == 0.5);
  CHECK(cfg.identity.redetect_every == 15);
  CHECK(cfg.grpo.group_size == 8);
}
