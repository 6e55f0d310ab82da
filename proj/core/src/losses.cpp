#include "hwdnet/losses.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <torch/torch.h>

#include "hwdnet/error.hpp"

namespace hwdnet {

std::string_view to_string(Reduction r) { return r == Reduction::sum ? "sum" : "mean"; }
std::string_view to_string(CentroidMode m) {
  return m == CentroidMode::single_modality ? "single_modality" : "cross_modality";
}
std::string_view to_string(Similarity s) { return s == Similarity::squared_euclidean ? "squared_euclidean" : "euclidean"; }
std::string_view to_string(TripletInput t) { return t == TripletInput::z ? "z" : "mu"; }

Reduction parse_reduction(std::string_view text) {
  if (text == "sum") return Reduction::sum;
  if (text == "mean") return Reduction::mean;
  throw ConfigError("unknown loss.reduction '" + std::string(text) + "'");
}

CentroidMode parse_centroid_mode(std::string_view text) {
  if (text == "single_modality" || text == "single") return CentroidMode::single_modality;
  if (text == "cross_modality" || text == "cross") return CentroidMode::cross_modality;
  throw ConfigError("unknown loss.centroid_mode '" + std::string(text) + "'");
}

Similarity parse_similarity(std::string_view text) {
  if (text == "squared_euclidean") return Similarity::squared_euclidean;
  if (text == "euclidean") return Similarity::euclidean;
  throw ConfigError("unknown loss.similarity '" + std::string(text) + "'");
}

TripletInput parse_triplet_input(std::string_view text) {
  if (text == "z") return TripletInput::z;
  if (text == "mu") return TripletInput::mu;
  throw ConfigError("unknown loss.triplet_input '" + std::string(text) + "'");
}

double LossWeights::coefficient(std::string_view term) const {
  if (term == "wr") return wr;
  if (term == "id") return id;
  if (term == "tri") return tri;
  if (term == "orient") return orient;
  if (term == "centroid") return centroid;
  throw ConfigError("unknown loss term '" + std::string(term) + "'");
}

bool LossSwitches::enabled(std::string_view term) const {
  if (term == "wr") return wr;
  if (term == "id") return id;
  if (term == "tri") return tri;
  if (term == "orient") return orient;
  if (term == "centroid") return centroid;
  throw ConfigError("unknown loss term '" + std::string(term) + "'");
}

void LossSwitches::set(std::string_view term, bool on) {
  if (term == "wr") wr = on;
  else if (term == "id") id = on;
  else if (term == "tri") tri = on;
  else if (term == "orient") orient = on;
  else if (term == "centroid") centroid = on;
  else throw ConfigError("unknown loss term '" + std::string(term) + "'");
}

void LossConfig::validate() const {
  if (!(weights.margin >= 0.0)) throw ConfigError("loss.margin must be >= 0");
  for (auto term : kTermNames) {
    if (!(weights.coefficient(term) >= 0.0)) throw ConfigError("loss weight for " + std::string(term) + " must be >= 0");
  }
}

ClassifierHeadsImpl::ClassifierHeadsImpl(int mu_dim, int upsilon_dim, int num_identities, int num_orientations)
    : num_identities_(num_identities) {
  if (num_identities < 1) throw ConfigError("identity head needs at least one class");
  id_head = register_module("id_head", torch::nn::Linear(mu_dim, num_identities));
  orient_head = register_module("orient_head", torch::nn::Linear(upsilon_dim, num_orientations));
}

namespace {

torch::Tensor reduce(const torch::Tensor& summed, std::int64_t count, Reduction r) {
  return r == Reduction::mean && count > 0 ? summed / static_cast<double>(count) : summed;
}

void check_labels(const torch::Tensor& features, const torch::Tensor& labels, const char* what) {
  if (features.dim() != 2) throw DimensionError(std::string(what) + ": features must be [batch, d]");
  if (labels.dim() != 1 || labels.size(0) != features.size(0)) {
    throw DimensionError(std::string(what) + ": need one label per feature row");
  }
}

}  // namespace

torch::Tensor classification_loss(const torch::Tensor& logits, const torch::Tensor& targets, Reduction reduction,
                                   std::string_view what) {
  check_labels(logits, targets, "classification_loss");
  const auto classes = logits.size(1);
  if (targets.numel() > 0) {
    const auto lo = targets.min().item<std::int64_t>();
    const auto hi = targets.max().item<std::int64_t>();
    if (lo < 0 || hi >= classes) {
      throw ValidationError(std::string(what) + " out of range [0, " + std::to_string(classes) + "): got " +
                            std::to_string(lo < 0 ? lo : hi));
    }
  }
  auto nll = -torch::log_softmax(logits, 1).gather(1, targets.to(torch::kInt64).unsqueeze(1)).squeeze(1);
  return reduce(nll.sum(), logits.size(0), reduction);
}

torch::Tensor id_loss(const torch::Tensor& mu_rgb, const torch::Tensor& mu_ir, torch::nn::Linear& id_head,
                      const torch::Tensor& labels_rgb, const torch::Tensor& labels_ir, Reduction reduction) {
  auto total = classification_loss(id_head->forward(mu_rgb), labels_rgb, Reduction::sum, "identity label") +
               classification_loss(id_head->forward(mu_ir), labels_ir, Reduction::sum, "identity label");
  return reduce(total, mu_rgb.size(0) + mu_ir.size(0), reduction);
}

torch::Tensor orientation_loss(const torch::Tensor& upsilon_rgb, const torch::Tensor& upsilon_ir,
                               torch::nn::Linear& orient_head, const torch::Tensor& orient_rgb,
                               const torch::Tensor& orient_ir, Reduction reduction) {
  auto total = classification_loss(orient_head->forward(upsilon_rgb), orient_rgb, Reduction::sum, "orientation label") +
               classification_loss(orient_head->forward(upsilon_ir), orient_ir, Reduction::sum, "orientation label");
  return reduce(total, upsilon_rgb.size(0) + upsilon_ir.size(0), reduction);
}

torch::Tensor euclidean_distances(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.size(1) != b.size(1)) {
    throw DimensionError("euclidean_distances: feature widths differ");
  }
  auto diff = a.unsqueeze(1) - b.unsqueeze(0);
  return diff.pow(2).sum(2).clamp_min(1e-12).sqrt();
}

namespace {

torch::Tensor one_way_triplet(const torch::Tensor& dist, const torch::Tensor& anchor_labels,
                              const torch::Tensor& other_labels, double margin) {
  auto positive = anchor_labels.unsqueeze(1).eq(other_labels.unsqueeze(0));
  auto has_pos = positive.any(1);
  auto has_neg = positive.logical_not().any(1);
  auto bad = (has_pos.logical_and(has_neg)).logical_not();
  if (bad.any().item<bool>()) {
    std::set<std::int64_t> ids;
    auto idx = bad.nonzero().flatten();
    for (std::int64_t i = 0; i < idx.size(0); ++i) ids.insert(anchor_labels[idx[i].item<std::int64_t>()].item<std::int64_t>());
    std::ostringstream msg;
    msg << "cross_modality_triplet: identities without a cross-modality positive or negative:";
    for (auto id : ids) msg << ' ' << id;
    throw ValidationError(msg.str());
  }
  const double inf = std::numeric_limits<double>::infinity();
  auto min_pos = std::get<0>(dist.masked_fill(positive.logical_not(), inf).min(1));
  auto max_neg = std::get<0>(dist.masked_fill(positive, -inf).max(1));
  return torch::relu(margin + min_pos - max_neg).sum();
}

}  // namespace

torch::Tensor cross_modality_triplet(const torch::Tensor& z_rgb, const torch::Tensor& z_ir,
                                     const torch::Tensor& labels_rgb, const torch::Tensor& labels_ir, double margin,
                                     Reduction reduction) {
  check_labels(z_rgb, labels_rgb, "cross_modality_triplet");
  check_labels(z_ir, labels_ir, "cross_modality_triplet");
  auto dist = euclidean_distances(z_rgb, z_ir);
  auto rgb_anchors = one_way_triplet(dist, labels_rgb, labels_ir, margin);
  auto total = rgb_anchors + one_way_triplet(dist.t(), labels_ir, labels_rgb, margin);
  return reduce(total, z_rgb.size(0) + z_ir.size(0), reduction);
}

CentroidMap modality_centroids(const torch::Tensor& mu, const torch::Tensor& labels) {
  check_labels(mu, labels, "modality_centroids");
  CentroidMap out;
  auto ids = std::get<0>(torch::_unique(labels, /*sorted=*/true));
  for (std::int64_t i = 0; i < ids.size(0); ++i) {
    const auto id = ids[i].item<std::int64_t>();
    auto rows = labels.eq(id).nonzero().flatten();
    out.emplace(id, mu.index_select(0, rows).mean(0));
  }
  return out;
}

torch::Tensor cross_modality_centroid(const torch::Tensor& rgb_centroid, const torch::Tensor& ir_centroid) {
  if (!rgb_centroid.defined() || !ir_centroid.defined()) {
    throw ValidationError("cross_modality_centroid: both modality centroids are required");
  }
  if (rgb_centroid.sizes() != ir_centroid.sizes()) throw DimensionError("cross_modality_centroid: shape mismatch");
  return 0.5 * (rgb_centroid + ir_centroid);
}

CentroidMap cross_modality_centroids(const CentroidMap& rgb, const CentroidMap& ir) {
  CentroidMap out;
  for (const auto& [id, c] : rgb) {
    auto it = ir.find(id);
    if (it == ir.end()) throw ValidationError("identity " + std::to_string(id) + " has no IR samples for its centroid");
    out.emplace(id, cross_modality_centroid(c, it->second));
  }
  for (const auto& [id, _] : ir) {
    if (!rgb.count(id)) throw ValidationError("identity " + std::to_string(id) + " has no RGB samples for its centroid");
  }
  return out;
}

torch::Tensor centroid_similarity(const torch::Tensor& mu, const torch::Tensor& labels, const CentroidMap& centroids,
                                  Similarity similarity) {
  check_labels(mu, labels, "centroid_similarity");
  std::vector<torch::Tensor> rows;
  rows.reserve(static_cast<std::size_t>(labels.size(0)));
  auto label_acc = labels.to(torch::kInt64).contiguous();
  for (std::int64_t i = 0; i < labels.size(0); ++i) {
    const auto id = label_acc[i].item<std::int64_t>();
    auto it = centroids.find(id);
    if (it == centroids.end()) throw ValidationError("no centroid for identity " + std::to_string(id));
    rows.push_back(it->second);
  }
  if (rows.empty()) return torch::zeros({}, mu.options());
  auto target = torch::stack(rows);
  auto sq = (mu - target).pow(2).sum(1);
  if (similarity == Similarity::squared_euclidean) return sq.sum();
  return sq.clamp_min(1e-12).sqrt().sum();
}

torch::Tensor centroid_similarity_loss(const torch::Tensor& mu_rgb, const torch::Tensor& labels_rgb,
                                       const torch::Tensor& mu_ir, const torch::Tensor& labels_ir, CentroidMode mode,
                                       Similarity similarity, Reduction reduction) {
  auto rgb = modality_centroids(mu_rgb, labels_rgb);
  auto ir = modality_centroids(mu_ir, labels_ir);
  torch::Tensor total;
  if (mode == CentroidMode::single_modality) {
    total = centroid_similarity(mu_rgb, labels_rgb, rgb, similarity) + centroid_similarity(mu_ir, labels_ir, ir, similarity);
  } else {
    auto joint = cross_modality_centroids(rgb, ir);
    total = centroid_similarity(mu_rgb, labels_rgb, joint, similarity) +
            centroid_similarity(mu_ir, labels_ir, joint, similarity);
  }
  if (reduction == Reduction::sum) return total;
  // per element, like a mean-squared error: keeps the scale independent of the feature width
  const double width = similarity == Similarity::squared_euclidean ? static_cast<double>(mu_rgb.size(1))
                                                                   : std::sqrt(static_cast<double>(mu_rgb.size(1)));
  return total / (static_cast<double>(mu_rgb.size(0) + mu_ir.size(0)) * width);
}

const std::optional<torch::Tensor>& LossTerms::get(std::string_view term) const {
  if (term == "wr") return wr;
  if (term == "id") return id;
  if (term == "tri") return tri;
  if (term == "orient") return orient;
  if (term == "centroid") return centroid;
  throw ConfigError("unknown loss term '" + std::string(term) + "'");
}

TotalLoss total_loss(const LossTerms& terms, const LossConfig& cfg, long step) {
  TotalLoss out;
  for (auto name : kTermNames) {
    if (!cfg.enable.enabled(name)) continue;
    const auto& term = terms.get(name);
    if (!term || !term->defined()) continue;
    auto weighted = *term * cfg.weights.coefficient(name);
    const double value = weighted.item<double>();
    if (!std::isfinite(value)) {
      throw DivergenceError(std::string(name), step,
                            "loss term '" + std::string(name) + "' is not finite" +
                                (step >= 0 ? " at step " + std::to_string(step) : std::string()));
    }
    out.total = out.total.defined() ? out.total + weighted : weighted;
    out.breakdown.emplace_back(std::string(name), value);
  }
  if (!out.total.defined()) out.total = torch::zeros({}, torch::kFloat64);
  return out;
}

}  // namespace hwdnet
