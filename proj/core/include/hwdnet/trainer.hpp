#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/optim/sgd.h>

#include "hwdnet/checkpoint.hpp"
#include "hwdnet/config.hpp"
#include "hwdnet/evaluate.hpp"
#include "hwdnet/model.hpp"
#include "hwdnet/sampler.hpp"

namespace hwdnet {

struct StepRecord {
  std::int64_t step = 0;  // 1-based global step
  int epoch = 0;          // 1-based
  double lr = 0.0;
  std::vector<std::pair<std::string, double>> losses;  // weighted, enabled terms only
  double total = 0.0;

  std::string to_json() const;
};

// Every enabled loss term for one batch. Identity labels must already be
// mapped to class indices for the identity head.
LossTerms compute_loss_terms(HwdNetImpl& model, const Batch& batch, const torch::Tensor& rgb_classes,
                             const torch::Tensor& ir_classes, const LossConfig& cfg);

ModelSpec model_spec(const TrainConfig& cfg, int num_identities);

class Trainer {
 public:
  // `train_index` must hold only training records.
  Trainer(TrainConfig cfg, const DatasetIndex& train_index);
  // Continues from `ckpt`; `overrides` are applied on top of its config.
  Trainer(const Checkpoint& ckpt, const DatasetIndex& train_index, const Settings& overrides = {});

  StepRecord step();
  std::vector<StepRecord> run_epoch();
  bool finished() const { return epoch_ >= cfg_.epochs; }

  Checkpoint checkpoint() const;

  const TrainConfig& config() const { return cfg_; }
  HwdNetImpl& model() { return *model_; }
  HwdNet model_holder() const { return model_; }
  int epoch() const { return epoch_; }
  std::int64_t global_step() const { return step_; }
  int steps_per_epoch() const { return steps_per_epoch_; }
  const std::vector<std::int64_t>& identity_classes() const { return classes_; }
  torch::Tensor to_classes(const torch::Tensor& identities) const;

 private:
  void init(const DatasetIndex& train_index);
  void apply_lr(double lr);

  TrainConfig cfg_;
  DatasetIndex index_;
  std::unique_ptr<ImageStore> store_;
  std::vector<std::int64_t> classes_;
  std::map<std::int64_t, std::int64_t> class_of_;
  HwdNet model_{nullptr};
  std::unique_ptr<torch::optim::SGD> optimizer_;
  Rng rng_;
  int epoch_ = 0;
  std::int64_t step_ = 0;
  int steps_per_epoch_ = 1;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  bool write_checkpoints = true;
  bool final_eval = true;
  std::function<void(const std::string&)> progress;
};

struct TrainResult {
  Checkpoint final_checkpoint;
  std::vector<EvalReport> reports;  // ir2rgb/rgb2ir x single/multi, on the test split
};

// Trains on the train split of `index` and evaluates on its test split.
// Writes train_log.jsonl, checkpoints and eval_<direction>_<shot>.json to
// options.out_dir.
TrainResult train(const TrainConfig& cfg, const DatasetIndex& index, const TrainOptions& options);
TrainResult resume(const Checkpoint& ckpt, const Settings& overrides, const DatasetIndex& index,
                   const TrainOptions& options);

// Evaluates every (direction, shot) pair on the test split of `index`.
std::vector<EvalReport> evaluate_all(HwdNetImpl& model, const DatasetIndex& test_index, const TrainConfig& cfg,
                                     Embeddings* embeddings = nullptr);

std::string report_file_name(const EvalReport& report);

}  // namespace hwdnet
