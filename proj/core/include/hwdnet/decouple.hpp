#pragma once

#include <string_view>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>
#include <torch/types.h>

namespace hwdnet {

enum class DecoupleVariant { split, subtraction, prediction };
std::string_view to_string(DecoupleVariant v);
DecoupleVariant parse_decouple_variant(std::string_view text);

struct DecoupleConfig {
  DecoupleVariant variant = DecoupleVariant::split;
  double split_fraction = 0.5;  // share of d given to the orientation-relevant part
  int mlp_hidden = 0;           // 0 means "same as d"
  int mlp_depth = 2;

  void validate(int dim) const;
  int upsilon_dim(int dim) const;
  int mu_dim(int dim) const;
  int hidden(int dim) const { return mlp_hidden > 0 ? mlp_hidden : dim; }
};

// upsilon carries orientation, mu is the orientation-invariant retrieval feature.
struct DecoupledFeatures {
  torch::Tensor upsilon;
  torch::Tensor mu;
};

// Linear layers with ReLU in between and no output activation.
class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(int in, int hidden, int out, int depth);
  torch::Tensor forward(torch::Tensor x);
  void zero_output_layer();
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  std::vector<torch::nn::Linear> layers_;
  int in_;
  int out_;
};
TORCH_MODULE(Mlp);

DecoupledFeatures decouple_split(const torch::Tensor& z, const DecoupleConfig& cfg);
DecoupledFeatures decouple_subtraction(const torch::Tensor& z, Mlp& predictor, const DecoupleConfig& cfg);
DecoupledFeatures decouple_prediction(const torch::Tensor& z, Mlp& relevant, Mlp& invariant, const DecoupleConfig& cfg);

// Owns whichever predictors the configured variant needs.
class DecouplerImpl : public torch::nn::Module {
 public:
  DecouplerImpl(DecoupleConfig cfg, int dim);
  DecoupledFeatures forward(const torch::Tensor& z);

  const DecoupleConfig& config() const { return cfg_; }
  int dim() const { return dim_; }
  int upsilon_dim() const { return cfg_.upsilon_dim(dim_); }
  int mu_dim() const { return cfg_.mu_dim(dim_); }
  Mlp predictor() const { return g_; }
  Mlp relevant_predictor() const { return g_r_; }
  Mlp invariant_predictor() const { return g_u_; }

 private:
  DecoupleConfig cfg_;
  int dim_;
  Mlp g_{nullptr};
  Mlp g_r_{nullptr};
  Mlp g_u_{nullptr};
};
TORCH_MODULE(Decoupler);

}  // namespace hwdnet
