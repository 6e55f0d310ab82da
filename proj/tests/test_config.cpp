#include <gtest/gtest.h>

#include <fstream>

#include "hwdnet/config.hpp"
#include "hwdnet/error.hpp"
#include "support.hpp"

using namespace hwdnet;

TEST(Config, SettingsRoundTrip) {
  for (const auto& base : {TrainConfig{}, desk_preset()}) {
    const auto settings = to_settings(base);
    TrainConfig other;
    other.epochs = 3;
    other.lr_steps = {1};
    other.plan = RelationPlan(4);
    apply_settings(other, settings);
    EXPECT_EQ(to_settings(other), settings);
  }
}

TEST(Config, KeysAreUniqueAndListed) {
  const auto keys = known_setting_keys();
  EXPECT_EQ(std::set<std::string>(keys.begin(), keys.end()).size(), keys.size());
  EXPECT_EQ(keys.size(), to_settings(TrainConfig{}).size());
  for (const auto& k : {"train.lr", "plan.stage", "loss.enable.orient", "decouple.variant", "eval.seeds"}) {
    EXPECT_NE(std::find(keys.begin(), keys.end(), k), keys.end()) << k;
  }
}

TEST(Config, ApplyParsesTypes) {
  TrainConfig cfg;
  apply_setting(cfg, "train.lr", "0.05");
  apply_setting(cfg, "train.lr_steps", "5,9");
  apply_setting(cfg, "plan.stage", "s3");
  apply_setting(cfg, "loss.enable.wr", "false");
  apply_setting(cfg, "decouple.variant", "subtraction");
  apply_setting(cfg, "train.seed", "18446744073709551615");
  EXPECT_DOUBLE_EQ(cfg.lr, 0.05);
  EXPECT_EQ(cfg.lr_steps, (std::vector<int>{5, 9}));
  EXPECT_EQ(cfg.plan, RelationPlan(3));
  EXPECT_FALSE(cfg.loss.enable.wr);
  EXPECT_EQ(cfg.decouple.variant, DecoupleVariant::subtraction);
  EXPECT_EQ(cfg.seed, 18446744073709551615ull);
}

TEST(Config, RejectsBadInput) {
  TrainConfig cfg;
  EXPECT_THROW(apply_setting(cfg, "train.learning_rate", "1"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "train.epochs", "ten"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "train.epochs", "3.5"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "train.lr", "nan"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "augment.flip", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "train.lr_schedule", "cosine"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "plan.stage", "s7"), ConfigError);
}

TEST(Config, Validate) {
  EXPECT_NO_THROW(TrainConfig{}.validate());
  EXPECT_NO_THROW(desk_preset().validate());
  auto bad = [](auto mutate) {
    TrainConfig cfg;
    mutate(cfg);
    return cfg;
  };
  EXPECT_THROW(bad([](TrainConfig& c) { c.epochs = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.lr = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.momentum = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.augment.erase_probability = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.encoder.dim = 1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.eval.single_shot_seeds = 0; }).validate(), ConfigError);
}

TEST(Config, StepSchedule) {
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.lr_steps = {40, 70};
  EXPECT_DOUBLE_EQ(cfg.lr_at(0), 0.01);
  EXPECT_DOUBLE_EQ(cfg.lr_at(39), 0.01);
  EXPECT_NEAR(cfg.lr_at(40), 0.001, 1e-15);
  EXPECT_NEAR(cfg.lr_at(99), 0.0001, 1e-16);
  cfg.lr_schedule = LrSchedule::constant;
  EXPECT_DOUBLE_EQ(cfg.lr_at(99), 0.01);
}

TEST(Config, ParseSettingsText) {
  const auto s = parse_settings("# comment\n\ntrain.lr = 0.5  # trailing\n  plan.stage=s1\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], (std::pair<std::string, std::string>{"train.lr", "0.5"}));
  EXPECT_EQ(s[1], (std::pair<std::string, std::string>{"plan.stage", "s1"}));
  EXPECT_THROW(parse_settings("train.lr 0.5\n"), ConfigError);
  EXPECT_EQ(parse_settings(format_settings(s)), s);
}

TEST(Config, ReadSettingsFile) {
  testing_support::TempDir dir;
  std::ofstream(dir / "run.cfg") << "train.epochs = 7\n";
  const auto s = read_settings_file(dir / "run.cfg");
  TrainConfig cfg;
  apply_settings(cfg, s);
  EXPECT_EQ(cfg.epochs, 7);
  EXPECT_THROW(read_settings_file(dir / "missing.cfg"), ConfigError);
}

TEST(Config, DeskPreset) {
  const auto cfg = desk_preset();
  EXPECT_EQ(cfg.epochs, 30);
  EXPECT_EQ(cfg.encoder.arch, EncoderArch::desk);
  EXPECT_EQ(cfg.plan, RelationPlan(2));
  EXPECT_EQ(cfg.decouple.variant, DecoupleVariant::split);
  EXPECT_TRUE(cfg.loss.enable.wr && cfg.loss.enable.id && cfg.loss.enable.tri && cfg.loss.enable.orient &&
              cfg.loss.enable.centroid);
  EXPECT_EQ(cfg.batch.images_per_modality(), 48);
}
