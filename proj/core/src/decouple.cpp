#include "hwdnet/decouple.hpp"

#include <cmath>

#include <torch/torch.h>

#include "hwdnet/error.hpp"

namespace hwdnet {

std::string_view to_string(DecoupleVariant v) {
  switch (v) {
    case DecoupleVariant::split: return "split";
    case DecoupleVariant::subtraction: return "subtraction";
    case DecoupleVariant::prediction: return "prediction";
  }
  return "split";
}

DecoupleVariant parse_decouple_variant(std::string_view text) {
  if (text == "split") return DecoupleVariant::split;
  if (text == "subtraction") return DecoupleVariant::subtraction;
  if (text == "prediction") return DecoupleVariant::prediction;
  throw ConfigError("unknown decouple.variant '" + std::string(text) + "'");
}

void DecoupleConfig::validate(int dim) const {
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("decouple.split_fraction must lie in (0, 1)");
  if (mlp_hidden < 0 || mlp_depth < 1) throw ConfigError("decouple.mlp_hidden and depth must be positive");
  if (variant == DecoupleVariant::split) {
    const int u = static_cast<int>(std::floor(split_fraction * dim));
    if (u < 1 || dim - u < 1) {
      throw ConfigError("feature width " + std::to_string(dim) + " too small to split at fraction " +
                        std::to_string(split_fraction));
    }
  }
}

int DecoupleConfig::upsilon_dim(int dim) const {
  return variant == DecoupleVariant::split ? static_cast<int>(std::floor(split_fraction * dim)) : dim;
}

int DecoupleConfig::mu_dim(int dim) const {
  return variant == DecoupleVariant::split ? dim - upsilon_dim(dim) : dim;
}

MlpImpl::MlpImpl(int in, int hidden, int out, int depth) : in_(in), out_(out) {
  for (int i = 0; i < depth; ++i) {
    const int a = i == 0 ? in : hidden;
    const int b = i == depth - 1 ? out : hidden;
    layers_.push_back(register_module("fc" + std::to_string(i), torch::nn::Linear(a, b)));
  }
}

torch::Tensor MlpImpl::forward(torch::Tensor x) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i]->forward(x);
    if (i + 1 < layers_.size()) x = torch::relu(x);
  }
  return x;
}

void MlpImpl::zero_output_layer() {
  torch::NoGradGuard guard;
  layers_.back()->weight.zero_();
  layers_.back()->bias.zero_();
}

namespace {

void check_features(const torch::Tensor& z) {
  if (z.dim() != 2) throw DimensionError("decoupler expects features shaped [batch, d]");
}

void check_predictor(const torch::Tensor& z, const Mlp& g, const char* which) {
  if (g->in_features() != z.size(1) || g->out_features() != z.size(1)) {
    throw DimensionError(std::string(which) + " maps " + std::to_string(g->in_features()) + " -> " +
                         std::to_string(g->out_features()) + ", features have d=" + std::to_string(z.size(1)));
  }
}

}  // namespace

DecoupledFeatures decouple_split(const torch::Tensor& z, const DecoupleConfig& cfg) {
  check_features(z);
  const int d = static_cast<int>(z.size(1));
  cfg.validate(d);
  const int u = cfg.upsilon_dim(d);
  return {z.slice(1, 0, u), z.slice(1, u)};
}

DecoupledFeatures decouple_subtraction(const torch::Tensor& z, Mlp& predictor, const DecoupleConfig& cfg) {
  check_features(z);
  cfg.validate(static_cast<int>(z.size(1)));
  check_predictor(z, predictor, "subtraction predictor");
  auto upsilon = predictor->forward(z);
  return {upsilon, z - upsilon};
}

DecoupledFeatures decouple_prediction(const torch::Tensor& z, Mlp& relevant, Mlp& invariant, const DecoupleConfig& cfg) {
  check_features(z);
  cfg.validate(static_cast<int>(z.size(1)));
  check_predictor(z, relevant, "orientation-relevant predictor");
  check_predictor(z, invariant, "orientation-invariant predictor");
  return {relevant->forward(z), invariant->forward(z)};
}

DecouplerImpl::DecouplerImpl(DecoupleConfig cfg, int dim) : cfg_(cfg), dim_(dim) {
  cfg_.validate(dim);
  const int h = cfg_.hidden(dim);
  switch (cfg_.variant) {
    case DecoupleVariant::split: break;
    case DecoupleVariant::subtraction:
      g_ = register_module("g", Mlp(dim, h, dim, cfg_.mlp_depth));
      g_->zero_output_layer();  // start at mu = z
      break;
    case DecoupleVariant::prediction:
      g_r_ = register_module("g_r", Mlp(dim, h, dim, cfg_.mlp_depth));
      g_u_ = register_module("g_u", Mlp(dim, h, dim, cfg_.mlp_depth));
      break;
  }
}

DecoupledFeatures DecouplerImpl::forward(const torch::Tensor& z) {
  switch (cfg_.variant) {
    case DecoupleVariant::split: return decouple_split(z, cfg_);
    case DecoupleVariant::subtraction: return decouple_subtraction(z, g_, cfg_);
    case DecoupleVariant::prediction: return decouple_prediction(z, g_r_, g_u_, cfg_);
  }
  return decouple_split(z, cfg_);
}

}  // namespace hwdnet
