#pragma once

#include <string>
#include <utility>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/pimpl.h>
#include <torch/types.h>

#include "hwdnet/backbone.hpp"
#include "hwdnet/decouple.hpp"
#include "hwdnet/losses.hpp"

namespace hwdnet {

struct ModelSpec {
  EncoderConfig encoder;
  RelationPlan plan;
  RestrainerConfig restrainer;
  DecoupleConfig decouple;
  int num_identities = 1;
};

struct StreamOutput {
  EncoderOutput encoded;
  DecoupledFeatures parts;
};

// Encoder, restrainer, decoupler and classification heads as one module.
class HwdNetImpl : public torch::nn::Module {
 public:
  explicit HwdNetImpl(const ModelSpec& spec);

  std::pair<StreamOutput, StreamOutput> forward_pair(const torch::Tensor& rgb, const torch::Tensor& ir);
  StreamOutput forward(const torch::Tensor& images, Modality modality);
  // Retrieval feature: the orientation-invariant part.
  torch::Tensor embed(const torch::Tensor& images, Modality modality);

  const ModelSpec& spec() const { return spec_; }
  TwoStreamEncoder encoder;
  Restrainer restrainer{nullptr};
  Decoupler decoupler{nullptr};
  ClassifierHeads heads{nullptr};

 private:
  ModelSpec spec_;
};
TORCH_MODULE(HwdNet);

struct NamedTensor {
  std::string name;
  torch::Tensor tensor;
};

// Parameters followed by buffers, in registration order.
std::vector<NamedTensor> capture_state(const torch::nn::Module& module);

// Copies `state` into the module. Names, shapes and dtypes are checked for
// every entry before anything is written.
void restore_state(torch::nn::Module& module, const std::vector<NamedTensor>& state);

}  // namespace hwdnet
