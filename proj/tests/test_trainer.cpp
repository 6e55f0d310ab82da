#include <gtest/gtest.h>

#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "hwdnet/ablation.hpp"
#include "hwdnet/error.hpp"
#include "hwdnet/synthetic.hpp"
#include "hwdnet/trainer.hpp"
#include "support.hpp"

using namespace hwdnet;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

// 4 train + 2 test identities at 32x24, shared by every test in this file.
class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    SyntheticSpec spec;
    spec.num_ids = 4;
    spec.test_ids = 2;
    spec.samples_per_id_per_modality = 4;
    spec.height = 32;
    spec.width = 24;
    index_ = new DatasetIndex(generate_synthetic_dataset(spec, *dir_ / "data"));
  }
  static void TearDownTestSuite() {
    delete index_;
    delete dir_;
  }

  static TrainConfig small_config() {
    auto cfg = desk_preset();
    cfg.epochs = 1;
    cfg.batch.ids_per_batch = 2;
    cfg.batch.images_per_id_per_modality = 2;
    cfg.batch.image_height = 32;
    cfg.batch.image_width = 24;
    cfg.augment.crop_padding = 2;
    cfg.encoder.dim = 16;
    cfg.encoder.base_channels = 4;
    cfg.lr_steps = {};
    cfg.eval.single_shot_seeds = 2;
    return cfg;
  }

  static std::vector<nlohmann::json> read_log(const fs::path& file) {
    std::vector<nlohmann::json> out;
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
    return out;
  }

  static TempDir* dir_;
  static DatasetIndex* index_;
};

TempDir* TrainerTest::dir_ = nullptr;
DatasetIndex* TrainerTest::index_ = nullptr;

}  // namespace

TEST_F(TrainerTest, OneEpochSmoke) {
  TempDir out;
  TrainOptions opts;
  opts.out_dir = out.path();
  const auto cfg = small_config();
  const auto result = train(cfg, *index_, opts);
  EXPECT_TRUE(fs::exists(out / "checkpoint.bin"));
  EXPECT_FALSE(fs::exists(out / "checkpoint_epoch1.bin"));
  const auto log = read_log(out / "train_log.jsonl");
  Trainer probe(cfg, index_->train_subset());
  EXPECT_EQ(static_cast<int>(log.size()), probe.steps_per_epoch());
  EXPECT_EQ(result.final_checkpoint.epoch, 1);
  EXPECT_EQ(result.reports.size(), 4u);
  for (const auto& r : result.reports) {
    EXPECT_TRUE(fs::exists(out / report_file_name(r)));
    EXPECT_EQ(r.num_gallery, r.shot == Shot::single ? 2u : 8u);
  }
  EXPECT_TRUE(fs::exists(out / "embeddings.tsv"));
}

TEST_F(TrainerTest, LogHasFiniteEnabledTermsOnly) {
  TempDir out;
  TrainOptions opts;
  opts.out_dir = out.path();
  opts.final_eval = false;
  auto cfg = small_config();
  for (const auto& v : component_grid()) {
    if (v.name == "baseline") cfg.loss.enable = v.enable;
  }
  train(cfg, *index_, opts);
  std::int64_t step = 0;
  for (const auto& line : read_log(out / "train_log.jsonl")) {
    EXPECT_EQ(line.at("step").get<std::int64_t>(), ++step);
    std::vector<std::string> keys;
    for (const auto& [k, v] : line.at("losses").items()) {
      keys.push_back(k);
      EXPECT_TRUE(std::isfinite(v.get<double>()));
    }
    EXPECT_EQ(keys, (std::vector<std::string>{"id", "tri"}));
    EXPECT_TRUE(std::isfinite(line.at("total").get<double>()));
  }
  EXPECT_GT(step, 0);
}

TEST_F(TrainerTest, ResumeMatchesUnbrokenRun) {
  auto cfg = small_config();
  cfg.epochs = 2;
  cfg.checkpoint_every = 1;
  TempDir straight, broken;
  TrainOptions opts;
  opts.final_eval = false;
  opts.out_dir = straight.path();
  const auto a = train(cfg, *index_, opts);
  ASSERT_TRUE(fs::exists(straight / "checkpoint_epoch1.bin"));

  opts.out_dir = broken.path();
  const auto b = resume(load_checkpoint(straight / "checkpoint_epoch1.bin"), {}, *index_, opts);
  EXPECT_EQ(serialize_checkpoint(a.final_checkpoint), serialize_checkpoint(b.final_checkpoint));
}

TEST_F(TrainerTest, ResumeOverrideShowsInLog) {
  auto cfg = small_config();
  cfg.epochs = 2;
  cfg.checkpoint_every = 1;
  TempDir out;
  TrainOptions opts;
  opts.final_eval = false;
  opts.out_dir = out.path();
  train(cfg, *index_, opts);
  const auto first = read_log(out / "train_log.jsonl").size();

  const auto ckpt = load_checkpoint(out / "checkpoint_epoch1.bin");
  resume(ckpt, {{"train.lr", "0.0123"}}, *index_, opts);
  const auto log = read_log(out / "train_log.jsonl");
  ASSERT_GT(log.size(), first);
  EXPECT_DOUBLE_EQ(log.back().at("lr").get<double>(), 0.0123);
  EXPECT_EQ(log.back().at("epoch").get<int>(), 2);
}

TEST_F(TrainerTest, ResumeRejectsOtherIdentities) {
  auto cfg = small_config();
  Trainer t(cfg, index_->train_subset());
  auto ckpt = t.checkpoint();
  ckpt.identity_classes.back() += 1000;
  EXPECT_THROW(Trainer(ckpt, index_->train_subset()), ValidationError);
}

TEST_F(TrainerTest, RejectsTestRecords) {
  EXPECT_THROW(Trainer(small_config(), *index_), ValidationError);
}

TEST_F(TrainerTest, StepsReduceTheBatchLoss) {
  auto cfg = small_config();
  cfg.augment.flip = cfg.augment.crop = cfg.augment.erase = false;
  Trainer t(cfg, index_->train_subset());
  auto& model = t.model();
  model.train();
  // same grouping as the trainer: restrainer scalars move at a scaled rate
  std::vector<torch::Tensor> weights, scalars;
  for (const auto& p : model.named_parameters()) {
    (p.key().rfind("restrainer.", 0) == 0 ? scalars : weights).push_back(p.value());
  }
  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(weights, std::make_unique<torch::optim::SGDOptions>(1e-3));
  groups.emplace_back(scalars, std::make_unique<torch::optim::SGDOptions>(1e-3 * cfg.restrainer_lr_scale));
  torch::optim::SGD sgd(groups, torch::optim::SGDOptions(1e-3));
  const auto train_index = index_->train_subset();
  ImageStore store(train_index, 32, 24);
  Rng rng(5);
  int decreased = 0;
  for (int i = 0; i < 20; ++i) {
    const auto batch = sample_balanced_batch(train_index, cfg.batch, rng, store, cfg.augment);
    const auto rc = t.to_classes(batch.rgb_labels), ic = t.to_classes(batch.ir_labels);
    auto loss = total_loss(compute_loss_terms(model, batch, rc, ic, cfg.loss), cfg.loss).total;
    const double before = loss.item<double>();
    sgd.zero_grad();
    loss.backward();
    sgd.step();
    const double after = total_loss(compute_loss_terms(model, batch, rc, ic, cfg.loss), cfg.loss).total.item<double>();
    decreased += after < before;
  }
  EXPECT_GE(decreased, 19);
}

TEST_F(TrainerTest, DivergenceIsReported) {
  auto cfg = small_config();
  cfg.loss.weights.id = std::numeric_limits<double>::max();
  Trainer t(cfg, index_->train_subset());
  EXPECT_THROW(t.step(), DivergenceError);
}

TEST_F(TrainerTest, CheckpointCapturesProgress) {
  Trainer t(small_config(), index_->train_subset());
  t.step();
  t.step();
  const auto c = t.checkpoint();
  EXPECT_EQ(c.step, 2);
  EXPECT_EQ(c.epoch, 0);
  EXPECT_EQ(c.identity_classes, t.identity_classes());
  EXPECT_FALSE(c.optimizer.empty());
  EXPECT_FALSE(c.rng_state.empty());
}

TEST_F(TrainerTest, ClassMappingIsDense) {
  Trainer t(small_config(), index_->train_subset());
  const auto ids = index_->train_subset().identities();
  const auto classes = t.to_classes(torch::tensor(ids, torch::kInt64));
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(classes[static_cast<long>(i)].item<std::int64_t>(), static_cast<std::int64_t>(i));
  EXPECT_THROW(t.to_classes(torch::tensor({999999}, torch::kInt64)), ValidationError);
}
