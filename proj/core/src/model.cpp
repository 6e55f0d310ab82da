#include "hwdnet/model.hpp"

#include <unordered_map>

#include <torch/torch.h>

#include "hwdnet/error.hpp"

namespace hwdnet {

HwdNetImpl::HwdNetImpl(const ModelSpec& spec) : encoder(spec.encoder, spec.plan), spec_(spec) {
  register_module("encoder", encoder);
  restrainer = register_module("restrainer", Restrainer(*encoder, spec.restrainer));
  decoupler = register_module("decoupler", Decoupler(spec.decouple, spec.encoder.dim));
  heads = register_module("heads", ClassifierHeads(decoupler->mu_dim(), decoupler->upsilon_dim(), spec.num_identities,
                                                   kNumOrientations));
}

std::pair<StreamOutput, StreamOutput> HwdNetImpl::forward_pair(const torch::Tensor& rgb, const torch::Tensor& ir) {
  auto [enc_rgb, enc_ir] = encoder->forward_pair(rgb, ir);
  // one decoupler pass over both blocks keeps predictor statistics joint
  const auto m = enc_rgb.features.size(0);
  auto parts = decoupler->forward(torch::cat({enc_rgb.features, enc_ir.features}, 0));
  StreamOutput a{enc_rgb, {parts.upsilon.slice(0, 0, m), parts.mu.slice(0, 0, m)}};
  StreamOutput b{enc_ir, {parts.upsilon.slice(0, m), parts.mu.slice(0, m)}};
  return {a, b};
}

StreamOutput HwdNetImpl::forward(const torch::Tensor& images, Modality modality) {
  auto enc = encoder->forward(images, modality);
  return {enc, decoupler->forward(enc.features)};
}

torch::Tensor HwdNetImpl::embed(const torch::Tensor& images, Modality modality) {
  return forward(images, modality).parts.mu;
}

std::vector<NamedTensor> capture_state(const torch::nn::Module& module) {
  std::vector<NamedTensor> out;
  for (const auto& item : module.named_parameters()) out.push_back({item.key(), item.value().detach()});
  for (const auto& item : module.named_buffers()) out.push_back({item.key(), item.value().detach()});
  return out;
}

void restore_state(torch::nn::Module& module, const std::vector<NamedTensor>& state) {
  std::unordered_map<std::string, torch::Tensor> targets;
  for (const auto& item : module.named_parameters()) targets.emplace(item.key(), item.value());
  for (const auto& item : module.named_buffers()) targets.emplace(item.key(), item.value());
  if (targets.size() != state.size()) {
    throw DimensionError("model state has " + std::to_string(state.size()) + " tensors, model expects " +
                         std::to_string(targets.size()));
  }
  for (const auto& [name, tensor] : state) {
    auto it = targets.find(name);
    if (it == targets.end()) throw DimensionError("model has no tensor named '" + name + "'");
    if (it->second.sizes() != tensor.sizes() || it->second.dtype() != tensor.dtype()) {
      throw DimensionError("tensor '" + name + "' has shape " + c10::str(tensor.sizes()) + ", model expects " +
                           c10::str(it->second.sizes()));
    }
  }
  torch::NoGradGuard guard;
  for (const auto& [name, tensor] : state) targets.at(name).copy_(tensor);
}

}  // namespace hwdnet
