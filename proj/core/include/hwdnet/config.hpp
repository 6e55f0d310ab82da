#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hwdnet/backbone.hpp"
#include "hwdnet/decouple.hpp"
#include "hwdnet/losses.hpp"
#include "hwdnet/sampler.hpp"

namespace hwdnet {

enum class LrSchedule { step, constant };

struct EvalSettings {
  int max_rank = 20;
  int single_shot_seeds = 10;  // gallery draws 0 .. n-1, averaged
  bool exclude_same_camera = false;
};

struct TrainConfig {
  int epochs = 100;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  LrSchedule lr_schedule = LrSchedule::step;
  std::vector<int> lr_steps{40, 70};
  double lr_gamma = 0.1;
  // Learning rate of the restrainer scalars relative to `lr`.
  double restrainer_lr_scale = 1.0;
  int checkpoint_every = 10;
  int eval_every = 0;  // 0: evaluate once, after the last epoch
  bool deterministic = true;

  BatchSpec batch;
  AugmentConfig augment;
  EncoderConfig encoder;
  RelationPlan plan;  // s2
  RestrainerConfig restrainer;
  DecoupleConfig decouple;
  LossConfig loss;
  EvalSettings eval;

  void validate() const;
  double lr_at(int epoch) const;  // epoch is 0-based
};

using Settings = std::vector<std::pair<std::string, std::string>>;

// Desk-scale recipe used by the synthetic experiments: small encoder, 64x48
// inputs, 30 epochs, mean-reduced losses with a matching learning rate, and
// slowed restrainer scalars.
TrainConfig desk_preset();

// Every key with its current value, in a fixed order. Feeding the result
// back through apply_settings reproduces the config.
Settings to_settings(const TrainConfig& cfg);

void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value);
void apply_settings(TrainConfig& cfg, const Settings& settings);

// Flat `key = value` lines; `#` starts a comment.
Settings read_settings_file(const std::filesystem::path& file);
Settings parse_settings(const std::string& text, const std::string& origin = "<string>");
std::string format_settings(const Settings& settings);

// All keys accepted by apply_setting.
std::vector<std::string> known_setting_keys();

}  // namespace hwdnet
