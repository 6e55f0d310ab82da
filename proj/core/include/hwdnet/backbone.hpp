#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/batchnorm.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/pimpl.h>
#include <torch/types.h>

#include "hwdnet/dataset.hpp"

namespace hwdnet {

enum class EncoderArch { desk, resnet50 };
std::string_view to_string(EncoderArch a);
EncoderArch parse_encoder_arch(std::string_view text);

struct EncoderConfig {
  EncoderArch arch = EncoderArch::desk;
  int dim = 128;          // output feature width d
  int base_channels = 16; // desk encoder only

  void validate() const;
};

inline constexpr int kNumStages = 5;

// Which encoder stages carry per-modality ("related") weights. Related stages
// always form a prefix: stage j related implies every stage before j is too.
class RelationPlan {
 public:
  RelationPlan() : RelationPlan(2) {}
  explicit RelationPlan(int num_related, int num_stages = kNumStages);

  static RelationPlan from_alpha(const std::vector<bool>& alpha);
  // "s0" .. "s5"
  static RelationPlan parse(std::string_view name, int num_stages = kNumStages);

  bool related(int stage) const { return alpha_.at(static_cast<std::size_t>(stage)); }
  int num_related() const { return num_related_; }
  int num_stages() const { return static_cast<int>(alpha_.size()); }
  const std::vector<bool>& alpha() const { return alpha_; }
  std::vector<int> shared_stages() const;
  std::string name() const { return "s" + std::to_string(num_related_); }

  friend bool operator==(const RelationPlan&, const RelationPlan&) = default;

 private:
  std::vector<bool> alpha_;
  int num_related_ = 0;
};

struct StageSpec {
  int stage_index = 0;
  std::vector<std::pair<std::string, torch::Tensor>> parameter_tensors;
};

struct EncoderOutput {
  torch::Tensor features;  // [batch, d], after the BN neck
  torch::Tensor pre_bn;    // [batch, d], pooled
};

// ResNet basic block (two 3x3 convolutions) with a projection shortcut when
// the shape changes.
class BasicBlockImpl : public torch::nn::Module {
 public:
  BasicBlockImpl(int in_channels, int out_channels, int stride);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::Sequential body_{nullptr};
  torch::nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(BasicBlock);

class BottleneckImpl : public torch::nn::Module {
 public:
  BottleneckImpl(int in_channels, int width, int stride);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::Sequential body_{nullptr};
  torch::nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(Bottleneck);

std::vector<torch::nn::Sequential> build_stages(const EncoderConfig& cfg);

// Two-stream encoder. Related stages exist once per modality; shared stages
// and the BN neck are single modules used by both streams, so their tensors
// are literally the same storage.
class TwoStreamEncoderImpl : public torch::nn::Module {
 public:
  TwoStreamEncoderImpl(EncoderConfig cfg, RelationPlan plan);

  EncoderOutput forward(const torch::Tensor& images, Modality modality);
  // Training path: related stages per stream, then shared stages and the
  // neck over the concatenated batch so BN statistics cover both modalities.
  std::pair<EncoderOutput, EncoderOutput> forward_pair(const torch::Tensor& rgb, const torch::Tensor& ir);

  StageSpec stage_spec(int stage, Modality modality) const;
  torch::nn::Sequential stage(int stage, Modality modality) const;

  // Makes the IR copy of every related stage equal to the RGB copy.
  void copy_rgb_to_ir();

  const EncoderConfig& config() const { return cfg_; }
  const RelationPlan& plan() const { return plan_; }
  int dim() const { return cfg_.dim; }

 private:
  torch::Tensor run_stages(torch::Tensor x, Modality modality, int begin, int end);
  EncoderOutput head(const torch::Tensor& x);
  void check_input(const torch::Tensor& images) const;

  EncoderConfig cfg_;
  RelationPlan plan_;
  std::vector<torch::nn::Sequential> rgb_;
  std::vector<torch::nn::Sequential> ir_;
  torch::nn::BatchNorm1d neck_{nullptr};
};
TORCH_MODULE(TwoStreamEncoder);

enum class RestrainerGranularity { stage, tensor };
std::string_view to_string(RestrainerGranularity g);
RestrainerGranularity parse_restrainer_granularity(std::string_view text);

struct RestrainerConfig {
  RestrainerGranularity granularity = RestrainerGranularity::tensor;
  double init_a = 1.0;
  double init_b = 0.0;
};

struct AffinePair {
  torch::Tensor a;  // 0-dim
  torch::Tensor b;  // 0-dim
};

// Learned scalar affine maps W -> a * W + b coupling each related RGB tensor
// to its IR counterpart. One pair per tensor, or one per stage shared by all
// of the stage's tensors.
class RestrainerImpl : public torch::nn::Module {
 public:
  RestrainerImpl(const TwoStreamEncoderImpl& encoder, RestrainerConfig cfg);

  // Throws ContractViolation when the stage is shared.
  AffinePair pair(int stage, const std::string& tensor_name) const;
  torch::Tensor transform(int stage, const std::string& tensor_name, const torch::Tensor& w_rgb) const;

  const RestrainerConfig& config() const { return cfg_; }
  const RelationPlan& plan() const { return plan_; }
  std::vector<torch::Tensor> scalars() const;

 private:
  static std::string key(int stage, const std::string& tensor_name);

  RestrainerConfig cfg_;
  RelationPlan plan_;
  std::map<std::string, AffinePair> pairs_;
};
TORCH_MODULE(Restrainer);

// a * W + b, elementwise.
torch::Tensor restrainer_transform(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& w_rgb);

// Frobenius norm of the difference; gradient 0 where the tensors coincide.
torch::Tensor weight_distance(const torch::Tensor& w_hat, const torch::Tensor& w_ir);

// Sum over related stages and their tensors of ||a W_rgb + b - W_ir||_F.
torch::Tensor weight_restrainer_loss(const TwoStreamEncoderImpl& encoder, const RestrainerImpl& restrainer);

}  // namespace hwdnet
