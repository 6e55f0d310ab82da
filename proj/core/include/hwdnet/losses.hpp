#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>
#include <torch/types.h>

namespace hwdnet {

enum class Reduction { sum, mean };
enum class CentroidMode { single_modality, cross_modality };
enum class Similarity { squared_euclidean, euclidean };
enum class TripletInput { z, mu };

std::string_view to_string(Reduction r);
std::string_view to_string(CentroidMode m);
std::string_view to_string(Similarity s);
std::string_view to_string(TripletInput t);
Reduction parse_reduction(std::string_view text);
CentroidMode parse_centroid_mode(std::string_view text);
Similarity parse_similarity(std::string_view text);
TripletInput parse_triplet_input(std::string_view text);

// Term names used in breakdowns, logs and enable flags.
inline constexpr std::string_view kTermNames[] = {"wr", "id", "tri", "orient", "centroid"};

struct LossWeights {
  double margin = 0.5;
  double wr = 1.0;
  double id = 1.0;
  double tri = 1.0;
  double orient = 1.0;
  double centroid = 1.0;

  double coefficient(std::string_view term) const;
};

struct LossSwitches {
  bool wr = true;
  bool id = true;
  bool tri = true;
  bool orient = true;
  bool centroid = true;

  bool enabled(std::string_view term) const;
  void set(std::string_view term, bool on);
};

struct LossConfig {
  LossWeights weights;
  LossSwitches enable;
  CentroidMode centroid_mode = CentroidMode::cross_modality;
  Similarity similarity = Similarity::squared_euclidean;
  Reduction reduction = Reduction::sum;
  TripletInput triplet_input = TripletInput::mu;

  void validate() const;
};

// Identity logits from mu, orientation logits from upsilon.
class ClassifierHeadsImpl : public torch::nn::Module {
 public:
  ClassifierHeadsImpl(int mu_dim, int upsilon_dim, int num_identities, int num_orientations = 8);

  torch::nn::Linear id_head{nullptr};
  torch::nn::Linear orient_head{nullptr};
  int num_identities() const { return num_identities_; }

 private:
  int num_identities_;
};
TORCH_MODULE(ClassifierHeads);

// Negative log softmax probability of each target class, summed (or averaged).
// Targets outside [0, logits.size(1)) raise ValidationError.
torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& targets, Reduction reduction,
                                   std::string_view what = "label");

// L_ID over both modality blocks. Labels are class indices in [0, K).
torch::Tensor id_loss(const torch::Tensor& mu_rgb, const torch::Tensor& mu_ir, torch::nn::Linear& id_head,
                      const torch::Tensor& labels_rgb, const torch::Tensor& labels_ir,
                      Reduction reduction = Reduction::sum);

// L_R over both modality blocks. Labels are orientation classes in [0, 8).
torch::Tensor orientation_loss(const torch::Tensor& upsilon_rgb, const torch::Tensor& upsilon_ir,
                               torch::nn::Linear& orient_head, const torch::Tensor& orient_rgb,
                               const torch::Tensor& orient_ir, Reduction reduction = Reduction::sum);

// Euclidean distance matrix [n, m]. The square root is floored at 1e-6 so the
// gradient stays finite where two features coincide.
torch::Tensor euclidean_distances(const torch::Tensor& a, const torch::Tensor& b);

// For every anchor of one modality: [margin + min_pos d - max_neg d]_+ taken
// over the other modality's samples; summed over both anchor directions.
torch::Tensor cross_modality_triplet(const torch::Tensor& z_rgb, const torch::Tensor& z_ir,
                                     const torch::Tensor& labels_rgb, const torch::Tensor& labels_ir, double margin,
                                     Reduction reduction = Reduction::sum);

using CentroidMap = std::map<std::int64_t, torch::Tensor>;

// Per-identity mean of the rows of `mu`.
CentroidMap modality_centroids(const torch::Tensor& mu, const torch::Tensor& labels);

// (rgb + ir) / 2: balanced across modalities regardless of P and Q.
torch::Tensor cross_modality_centroid(const torch::Tensor& rgb_centroid, const torch::Tensor& ir_centroid);
CentroidMap cross_modality_centroids(const CentroidMap& rgb, const CentroidMap& ir);

// Sum over samples of s(mu_i, centroid[label_i]).
torch::Tensor centroid_similarity(const torch::Tensor& mu, const torch::Tensor& labels, const CentroidMap& centroids,
                                  Similarity similarity);

// L_C (single_modality) or L_C' (cross_modality) over both modality blocks.
// Mean reduction divides by the sample count and by the feature width
// (its square root for plain Euclidean similarity).
torch::Tensor centroid_similarity_loss(const torch::Tensor& mu_rgb, const torch::Tensor& labels_rgb,
                                       const torch::Tensor& mu_ir, const torch::Tensor& labels_ir, CentroidMode mode,
                                       Similarity similarity = Similarity::squared_euclidean,
                                       Reduction reduction = Reduction::sum);

struct LossTerms {
  std::optional<torch::Tensor> wr;
  std::optional<torch::Tensor> id;
  std::optional<torch::Tensor> tri;
  std::optional<torch::Tensor> orient;
  std::optional<torch::Tensor> centroid;

  const std::optional<torch::Tensor>& get(std::string_view term) const;
};

struct TotalLoss {
  torch::Tensor total;
  // weighted contribution of each enabled term, in kTermNames order
  std::vector<std::pair<std::string, double>> breakdown;
};

// Weighted sum of the enabled terms. A non-finite term raises
// DivergenceError naming it; `step` is only used for the message.
TotalLoss total_loss(const LossTerms& terms, const LossConfig& cfg, long step = -1);

}  // namespace hwdnet
