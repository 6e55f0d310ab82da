#include "hwdnet/backbone.hpp"

#include <algorithm>
#include <charconv>

#include <torch/torch.h>

#include "hwdnet/error.hpp"

namespace nn = torch::nn;

namespace hwdnet {

std::string_view to_string(EncoderArch a) { return a == EncoderArch::desk ? "desk" : "resnet50"; }

EncoderArch parse_encoder_arch(std::string_view text) {
  if (text == "desk") return EncoderArch::desk;
  if (text == "resnet50") return EncoderArch::resnet50;
  throw ConfigError("unknown encoder.arch '" + std::string(text) + "' (expected desk or resnet50)");
}

std::string_view to_string(RestrainerGranularity g) {
  return g == RestrainerGranularity::stage ? "stage" : "tensor";
}

RestrainerGranularity parse_restrainer_granularity(std::string_view text) {
  if (text == "stage") return RestrainerGranularity::stage;
  if (text == "tensor") return RestrainerGranularity::tensor;
  throw ConfigError("unknown restrainer.granularity '" + std::string(text) + "'");
}

void EncoderConfig::validate() const {
  if (dim < 1) throw ConfigError("encoder.dim must be >= 1");
  if (arch == EncoderArch::desk && base_channels < 1) throw ConfigError("encoder.base_channels must be >= 1");
  if (arch == EncoderArch::resnet50 && dim != 2048) {
    throw ConfigError("encoder.arch=resnet50 produces 2048-d features; got encoder.dim=" + std::to_string(dim));
  }
}

// ---------------------------------------------------------------- plan

RelationPlan::RelationPlan(int num_related, int num_stages) {
  if (num_stages < 1) throw ConfigError("relation plan needs at least one stage");
  if (num_related < 0 || num_related > num_stages) {
    throw ConfigError("relation plan s" + std::to_string(num_related) + " is outside s0..s" +
                      std::to_string(num_stages));
  }
  alpha_.assign(static_cast<std::size_t>(num_stages), false);
  std::fill_n(alpha_.begin(), num_related, true);
  num_related_ = num_related;
}

RelationPlan RelationPlan::from_alpha(const std::vector<bool>& alpha) {
  int related = 0;
  bool seen_shared = false;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i]) {
      if (seen_shared) {
        throw ConfigError("related stage " + std::to_string(i) + " follows a shared stage; related stages must form a prefix");
      }
      ++related;
    } else {
      seen_shared = true;
    }
  }
  return RelationPlan(related, static_cast<int>(alpha.size()));
}

RelationPlan RelationPlan::parse(std::string_view name, int num_stages) {
  int n = -1;
  if (name.size() >= 2 && (name[0] == 's' || name[0] == 'S')) {
    auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), n);
    if (ec != std::errc() || ptr != name.data() + name.size()) n = -1;
  }
  if (n < 0) throw ConfigError("plan.stage must look like s0..s" + std::to_string(num_stages) + ", got '" + std::string(name) + "'");
  return RelationPlan(n, num_stages);
}

std::vector<int> RelationPlan::shared_stages() const {
  std::vector<int> out;
  for (int i = 0; i < num_stages(); ++i) {
    if (!related(i)) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------- blocks

namespace {

nn::Conv2d conv(int in, int out, int k, int stride, int pad) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(pad).bias(false));
}

void init_weights(nn::Module& m) {
  torch::NoGradGuard guard;
  for (auto& mod : m.modules(/*include_self=*/true)) {
    if (auto* c = mod->as<nn::Conv2d>()) {
      nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanIn, torch::kReLU);
    }
  }
}

}  // namespace

BasicBlockImpl::BasicBlockImpl(int in_channels, int out_channels, int stride) {
  body_ = register_module("body", nn::Sequential(conv(in_channels, out_channels, 3, stride, 1),
                                                 nn::BatchNorm2d(out_channels), nn::ReLU(),
                                                 conv(out_channels, out_channels, 3, 1, 1),
                                                 nn::BatchNorm2d(out_channels)));
  if (stride != 1 || in_channels != out_channels) {
    shortcut_ = register_module("shortcut", nn::Sequential(conv(in_channels, out_channels, 1, stride, 0),
                                                           nn::BatchNorm2d(out_channels)));
  }
}

torch::Tensor BasicBlockImpl::forward(torch::Tensor x) {
  auto identity = shortcut_ ? shortcut_->forward(x) : x;
  return torch::relu(body_->forward(x) + identity);
}

BottleneckImpl::BottleneckImpl(int in_channels, int width, int stride) {
  const int out_channels = width * 4;
  body_ = register_module("body", nn::Sequential(conv(in_channels, width, 1, 1, 0), nn::BatchNorm2d(width),
                                                 nn::ReLU(), conv(width, width, 3, stride, 1),
                                                 nn::BatchNorm2d(width), nn::ReLU(),
                                                 conv(width, out_channels, 1, 1, 0),
                                                 nn::BatchNorm2d(out_channels)));
  if (stride != 1 || in_channels != out_channels) {
    shortcut_ = register_module("shortcut", nn::Sequential(conv(in_channels, out_channels, 1, stride, 0),
                                                           nn::BatchNorm2d(out_channels)));
  }
}

torch::Tensor BottleneckImpl::forward(torch::Tensor x) {
  auto identity = shortcut_ ? shortcut_->forward(x) : x;
  return torch::relu(body_->forward(x) + identity);
}

std::vector<nn::Sequential> build_stages(const EncoderConfig& cfg) {
  cfg.validate();
  std::vector<nn::Sequential> stages;
  if (cfg.arch == EncoderArch::desk) {
    const int c = cfg.base_channels;
    stages.push_back(nn::Sequential(conv(3, c, 3, 2, 1), nn::BatchNorm2d(c), nn::ReLU()));
    stages.push_back(nn::Sequential(BasicBlock(c, 2 * c, 2)));
    stages.push_back(nn::Sequential(BasicBlock(2 * c, 4 * c, 2)));
    stages.push_back(nn::Sequential(BasicBlock(4 * c, 8 * c, 2)));
    stages.push_back(nn::Sequential(BasicBlock(8 * c, cfg.dim, 1)));
  } else {
    // ResNet-50 layout with last stride 1, as usual for re-identification.
    stages.push_back(nn::Sequential(conv(3, 64, 7, 2, 3), nn::BatchNorm2d(64), nn::ReLU(),
                                    nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1))));
    const int blocks[4] = {3, 4, 6, 3};
    const int widths[4] = {64, 128, 256, 512};
    const int strides[4] = {1, 2, 2, 1};
    int in = 64;
    for (int s = 0; s < 4; ++s) {
      nn::Sequential layer;
      for (int b = 0; b < blocks[s]; ++b) {
        layer->push_back(Bottleneck(in, widths[s], b == 0 ? strides[s] : 1));
        in = widths[s] * 4;
      }
      stages.push_back(layer);
    }
  }
  for (auto& s : stages) init_weights(*s);
  return stages;
}

// ---------------------------------------------------------------- encoder

TwoStreamEncoderImpl::TwoStreamEncoderImpl(EncoderConfig cfg, RelationPlan plan)
    : cfg_(cfg), plan_(std::move(plan)) {
  if (plan_.num_stages() != kNumStages) throw ConfigError("relation plan must cover 5 encoder stages");
  auto rgb_stages = build_stages(cfg_);
  auto ir_stages = build_stages(cfg_);
  for (int i = 0; i < kNumStages; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (plan_.related(i)) {
      rgb_.push_back(register_module("rgb_stage" + std::to_string(i), rgb_stages[idx]));
      ir_.push_back(register_module("ir_stage" + std::to_string(i), ir_stages[idx]));
    } else {
      auto shared = register_module("shared_stage" + std::to_string(i), rgb_stages[idx]);
      rgb_.push_back(shared);
      ir_.push_back(shared);
    }
  }
  neck_ = register_module("neck", nn::BatchNorm1d(cfg_.dim));
  copy_rgb_to_ir();
}

void TwoStreamEncoderImpl::copy_rgb_to_ir() {
  torch::NoGradGuard guard;
  for (int i = 0; i < plan_.num_related(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    auto src = rgb_[idx]->named_parameters();
    auto dst = ir_[idx]->named_parameters();
    for (const auto& item : src) dst[item.key()].copy_(item.value());
    auto src_buf = rgb_[idx]->named_buffers();
    auto dst_buf = ir_[idx]->named_buffers();
    for (const auto& item : src_buf) dst_buf[item.key()].copy_(item.value());
  }
}

void TwoStreamEncoderImpl::check_input(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw DimensionError("encoder expects images shaped [batch, 3, H, W], got " + std::to_string(images.dim()) +
                         "-d tensor" + (images.dim() >= 2 ? " with " + std::to_string(images.size(1)) + " channels" : ""));
  }
  if (images.size(0) < 1) throw DimensionError("encoder got an empty batch");
}

torch::Tensor TwoStreamEncoderImpl::run_stages(torch::Tensor x, Modality modality, int begin, int end) {
  auto& stages = modality == Modality::rgb ? rgb_ : ir_;
  for (int i = begin; i < end; ++i) x = stages[static_cast<std::size_t>(i)]->forward(x);
  return x;
}

EncoderOutput TwoStreamEncoderImpl::head(const torch::Tensor& x) {
  EncoderOutput out;
  out.pre_bn = x.mean({2, 3});
  out.features = neck_->forward(out.pre_bn);
  return out;
}

EncoderOutput TwoStreamEncoderImpl::forward(const torch::Tensor& images, Modality modality) {
  check_input(images);
  return head(run_stages(images, modality, 0, kNumStages));
}

std::pair<EncoderOutput, EncoderOutput> TwoStreamEncoderImpl::forward_pair(const torch::Tensor& rgb,
                                                                          const torch::Tensor& ir) {
  check_input(rgb);
  check_input(ir);
  if (rgb.sizes().slice(1) != ir.sizes().slice(1)) throw DimensionError("RGB and IR batches differ in image size");
  const int split = plan_.num_related();
  auto h_rgb = run_stages(rgb, Modality::rgb, 0, split);
  auto h_ir = run_stages(ir, Modality::ir, 0, split);
  const auto m = rgb.size(0);
  // shared stages are the same modules for both streams
  auto joint = run_stages(torch::cat({h_rgb, h_ir}, 0), Modality::rgb, split, kNumStages);
  auto out = head(joint);
  EncoderOutput a{out.features.slice(0, 0, m), out.pre_bn.slice(0, 0, m)};
  EncoderOutput b{out.features.slice(0, m), out.pre_bn.slice(0, m)};
  return {a, b};
}

nn::Sequential TwoStreamEncoderImpl::stage(int stage, Modality modality) const {
  if (stage < 0 || stage >= kNumStages) throw ContractViolation("stage index out of range");
  return (modality == Modality::rgb ? rgb_ : ir_)[static_cast<std::size_t>(stage)];
}

StageSpec TwoStreamEncoderImpl::stage_spec(int stage_index, Modality modality) const {
  StageSpec spec;
  spec.stage_index = stage_index;
  for (const auto& item : stage(stage_index, modality)->named_parameters()) {
    spec.parameter_tensors.emplace_back(item.key(), item.value());
  }
  return spec;
}

// ---------------------------------------------------------------- restrainer

std::string RestrainerImpl::key(int stage, const std::string& tensor_name) {
  std::string k = "s" + std::to_string(stage) + "_" + tensor_name;
  std::replace(k.begin(), k.end(), '.', '_');
  return k;
}

RestrainerImpl::RestrainerImpl(const TwoStreamEncoderImpl& encoder, RestrainerConfig cfg)
    : cfg_(cfg), plan_(encoder.plan()) {
  for (int s = 0; s < plan_.num_related(); ++s) {
    const auto spec = encoder.stage_spec(s, Modality::rgb);
    if (cfg_.granularity == RestrainerGranularity::stage) {
      const std::string k = "s" + std::to_string(s);
      const auto opts = spec.parameter_tensors.front().second.options();
      AffinePair p{register_parameter("a_" + k, torch::full({}, cfg_.init_a, opts)),
                   register_parameter("b_" + k, torch::full({}, cfg_.init_b, opts))};
      pairs_.emplace(k, p);
      continue;
    }
    for (const auto& [name, tensor] : spec.parameter_tensors) {
      const std::string k = key(s, name);
      AffinePair p{register_parameter("a_" + k, torch::full({}, cfg_.init_a, tensor.options())),
                   register_parameter("b_" + k, torch::full({}, cfg_.init_b, tensor.options()))};
      pairs_.emplace(k, p);
    }
  }
}

AffinePair RestrainerImpl::pair(int stage, const std::string& tensor_name) const {
  if (stage < 0 || stage >= plan_.num_stages() || !plan_.related(stage)) {
    throw ContractViolation("stage " + std::to_string(stage) + " is not weight-related; it has no restrainer");
  }
  const std::string k = cfg_.granularity == RestrainerGranularity::stage ? "s" + std::to_string(stage) : key(stage, tensor_name);
  auto it = pairs_.find(k);
  if (it == pairs_.end()) throw ContractViolation("no restrainer pair for stage " + std::to_string(stage) + " tensor " + tensor_name);
  return it->second;
}

torch::Tensor RestrainerImpl::transform(int stage, const std::string& tensor_name, const torch::Tensor& w_rgb) const {
  auto p = pair(stage, tensor_name);
  return restrainer_transform(p.a, p.b, w_rgb);
}

std::vector<torch::Tensor> RestrainerImpl::scalars() const { return parameters(); }

torch::Tensor restrainer_transform(const torch::Tensor& a, const torch::Tensor& b, const torch::Tensor& w_rgb) {
  if (a.numel() != 1 || b.numel() != 1) throw DimensionError("restrainer scale and offset must be scalars");
  return a * w_rgb + b;
}

torch::Tensor weight_distance(const torch::Tensor& w_hat, const torch::Tensor& w_ir) {
  if (w_hat.sizes() != w_ir.sizes()) {
    throw DimensionError("weight_distance: shape mismatch between transformed RGB and IR tensors");
  }
  return torch::linalg_vector_norm(w_hat - w_ir, 2);
}

torch::Tensor weight_restrainer_loss(const TwoStreamEncoderImpl& encoder, const RestrainerImpl& restrainer) {
  if (!(encoder.plan() == restrainer.plan())) throw ContractViolation("restrainer was built for a different relation plan");
  torch::Tensor total;
  for (int s = 0; s < encoder.plan().num_related(); ++s) {
    const auto rgb = encoder.stage_spec(s, Modality::rgb);
    const auto ir = encoder.stage_spec(s, Modality::ir);
    for (std::size_t t = 0; t < rgb.parameter_tensors.size(); ++t) {
      const auto& [name, w_rgb] = rgb.parameter_tensors[t];
      const auto term = weight_distance(restrainer.transform(s, name, w_rgb), ir.parameter_tensors[t].second);
      total = total.defined() ? total + term : term;
    }
  }
  if (!total.defined()) {
    // s0: empty sum
    auto params = encoder.parameters();
    return torch::zeros({}, params.empty() ? torch::TensorOptions(torch::kFloat32) : params.front().options());
  }
  return total;
}

}  // namespace hwdnet
