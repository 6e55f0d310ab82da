#include <gtest/gtest.h>

#include <cmath>

#include "hwdnet/backbone.hpp"
#include "hwdnet/error.hpp"

using namespace hwdnet;

namespace {

EncoderConfig tiny_encoder(int dim = 16) {
  EncoderConfig cfg;
  cfg.dim = dim;
  cfg.base_channels = 4;
  return cfg;
}

}  // namespace

TEST(RelationPlan, PrefixFromCount) {
  const RelationPlan s2(2);
  EXPECT_EQ(s2.alpha(), (std::vector<bool>{true, true, false, false, false}));
  EXPECT_EQ(s2.shared_stages(), (std::vector<int>{2, 3, 4}));
  EXPECT_EQ(s2.name(), "s2");
  EXPECT_EQ(RelationPlan::parse("s4"), RelationPlan(4));
  EXPECT_EQ(RelationPlan(0).num_related(), 0);
  EXPECT_TRUE(RelationPlan(0).shared_stages().size() == 5);
}

TEST(RelationPlan, RejectsNonPrefix) {
  EXPECT_THROW(RelationPlan::from_alpha({true, false, true, false, false}), ConfigError);
  EXPECT_THROW(RelationPlan::from_alpha({false, true, false, false, false}), ConfigError);
  EXPECT_EQ(RelationPlan::from_alpha({true, true, true, false, false}), RelationPlan(3));
  EXPECT_THROW(RelationPlan(6), ConfigError);
  EXPECT_THROW(RelationPlan::parse("x2"), ConfigError);
  EXPECT_THROW(RelationPlan::parse("s9"), ConfigError);
}

TEST(Encoder, OutputShape) {
  TwoStreamEncoder enc(tiny_encoder(512), RelationPlan(2));
  enc->eval();
  torch::NoGradGuard g;
  EXPECT_EQ(enc->forward(torch::randn({48, 3, 32, 24}), Modality::rgb).features.sizes(),
            (std::vector<int64_t>{48, 512}));
}

TEST(Encoder, PlanS0IsOneFunction) {
  TwoStreamEncoder enc(tiny_encoder(), RelationPlan(0));
  enc->eval();
  torch::NoGradGuard g;
  for (int i = 0; i < 3; ++i) {
    const auto x = torch::randn({2, 3, 32, 24});
    EXPECT_TRUE(torch::equal(enc->forward(x, Modality::rgb).features, enc->forward(x, Modality::ir).features));
  }
}

TEST(Encoder, EqualInitGivesEqualStreams) {
  TwoStreamEncoder enc(tiny_encoder(), RelationPlan(3));
  enc->eval();
  torch::NoGradGuard g;
  const auto x = torch::randn({2, 3, 32, 24});
  EXPECT_TRUE(torch::equal(enc->forward(x, Modality::rgb).features, enc->forward(x, Modality::ir).features));
  for (auto& p : enc->stage(0, Modality::ir)->parameters()) p.add_(0.5);
  EXPECT_FALSE(torch::equal(enc->forward(x, Modality::rgb).features, enc->forward(x, Modality::ir).features));
}

TEST(Encoder, SharedStagesShareStorage) {
  TwoStreamEncoder enc(tiny_encoder(), RelationPlan(2));
  for (int s = 0; s < kNumStages; ++s) {
    const auto rgb = enc->stage_spec(s, Modality::rgb).parameter_tensors;
    const auto ir = enc->stage_spec(s, Modality::ir).parameter_tensors;
    ASSERT_EQ(rgb.size(), ir.size());
    for (std::size_t t = 0; t < rgb.size(); ++t) {
      const bool same = rgb[t].second.data_ptr() == ir[t].second.data_ptr();
      EXPECT_EQ(same, s >= 2) << "stage " << s << " " << rgb[t].first;
    }
  }
}

TEST(Encoder, PairMatchesSeparateForwards) {
  TwoStreamEncoder enc(tiny_encoder(), RelationPlan(2));
  enc->eval();
  torch::NoGradGuard g;
  for (auto& p : enc->stage(1, Modality::ir)->parameters()) p.mul_(1.1);
  const auto a = torch::randn({3, 3, 32, 24}), b = torch::randn({2, 3, 32, 24});
  auto [ra, rb] = enc->forward_pair(a, b);
  EXPECT_TRUE(torch::allclose(ra.features, enc->forward(a, Modality::rgb).features, 1e-5, 1e-5));
  EXPECT_TRUE(torch::allclose(rb.features, enc->forward(b, Modality::ir).features, 1e-5, 1e-5));
}

TEST(Encoder, RejectsBadShapes) {
  TwoStreamEncoder enc(tiny_encoder(), RelationPlan(2));
  EXPECT_THROW(enc->forward(torch::randn({3, 32, 24}), Modality::rgb), DimensionError);
  EXPECT_THROW(enc->forward(torch::randn({2, 1, 32, 24}), Modality::rgb), DimensionError);
  EXPECT_THROW(enc->forward_pair(torch::randn({2, 3, 32, 24}), torch::randn({2, 3, 16, 24})), DimensionError);
}

TEST(Restrainer, TransformExamples) {
  const auto eye = torch::eye(2, torch::kFloat64);
  const auto one = torch::tensor(1.0, torch::kFloat64), zero = torch::tensor(0.0, torch::kFloat64);
  EXPECT_TRUE(torch::equal(restrainer_transform(one, zero, eye), eye));
  EXPECT_TRUE(torch::equal(restrainer_transform(torch::tensor(2.0, torch::kFloat64), zero, eye), 2 * eye));
  const auto w = torch::randn({3, 4}, torch::kFloat64);
  EXPECT_TRUE(torch::equal(restrainer_transform(zero, torch::tensor(3.0, torch::kFloat64), w), torch::full({3, 4}, 3.0, torch::kFloat64)));
  EXPECT_THROW(restrainer_transform(torch::ones({2}), zero, eye), DimensionError);
}

TEST(Restrainer, WeightDistanceExamples) {
  const auto eye = torch::eye(2, torch::kFloat64);
  EXPECT_EQ(weight_distance(eye, eye).item<double>(), 0.0);
  EXPECT_NEAR(weight_distance(eye, torch::zeros({2, 2}, torch::kFloat64)).item<double>(), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(weight_distance(eye, torch::zeros({2, 3}, torch::kFloat64)), DimensionError);
}

TEST(Restrainer, LossExamples) {
  TwoStreamEncoder s0(tiny_encoder(), RelationPlan(0));
  Restrainer r0(*s0, RestrainerConfig{});
  EXPECT_EQ(weight_restrainer_loss(*s0, *r0).item<double>(), 0.0);
  EXPECT_TRUE(r0->parameters().empty());

  TwoStreamEncoder enc(tiny_encoder(), RelationPlan(1));
  enc->to(torch::kFloat64);
  Restrainer r(*enc, RestrainerConfig{});
  r->to(torch::kFloat64);
  EXPECT_EQ(weight_restrainer_loss(*enc, *r).item<double>(), 0.0);

  // one related tensor differs by two unit entries
  auto w_ir = enc->stage_spec(0, Modality::ir).parameter_tensors.front().second;
  {
    torch::NoGradGuard g;
    auto flat = w_ir.view(-1);
    flat[0] -= 1.0;
    flat[3] -= 1.0;
  }
  EXPECT_NEAR(weight_restrainer_loss(*enc, *r).item<double>(), std::sqrt(2.0), 1e-12);
}

TEST(Restrainer, GranularityAndGradientAtZero) {
  TwoStreamEncoder enc(tiny_encoder(), RelationPlan(2));
  Restrainer per_tensor(*enc, RestrainerConfig{});
  RestrainerConfig stage_cfg;
  stage_cfg.granularity = RestrainerGranularity::stage;
  Restrainer per_stage(*enc, stage_cfg);
  const auto n0 = enc->stage_spec(0, Modality::rgb).parameter_tensors.size();
  const auto n1 = enc->stage_spec(1, Modality::rgb).parameter_tensors.size();
  EXPECT_EQ(per_tensor->parameters().size(), 2 * (n0 + n1));
  EXPECT_EQ(per_stage->parameters().size(), 4u);
  EXPECT_THROW(per_tensor->pair(2, "0.weight"), ContractViolation);

  const auto loss = weight_restrainer_loss(*enc, *per_tensor);
  EXPECT_EQ(loss.item<double>(), 0.0);
  loss.backward();
  for (const auto& p : per_tensor->parameters()) {
    ASSERT_TRUE(p.grad().defined());
    EXPECT_TRUE(torch::isfinite(p.grad()).all().item<bool>());
  }
}
