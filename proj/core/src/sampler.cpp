#include "hwdnet/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <torch/torch.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hwdnet/error.hpp"

namespace hwdnet {

namespace {

constexpr std::array<float, 3> kMean{0.485f, 0.456f, 0.406f};
constexpr std::array<float, 3> kStd{0.229f, 0.224f, 0.225f};

// Without replacement while the pool lasts, uniform with replacement after.
std::vector<std::size_t> draw_records(const std::vector<std::size_t>& pool, int count, Rng& rng) {
  std::vector<std::size_t> shuffled = pool;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count && static_cast<std::size_t>(i) < shuffled.size(); ++i) out.push_back(shuffled[i]);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  while (out.size() < static_cast<std::size_t>(count)) out.push_back(pool[pick(rng)]);
  return out;
}

}  // namespace

void BatchSpec::validate() const {
  if (ids_per_batch < 1 || images_per_id_per_modality < 1 || image_height < 1 || image_width < 1) {
    throw ConfigError("batch counts and image size must all be >= 1");
  }
}

BatchPlan plan_balanced_batch(const DatasetIndex& index, const BatchSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<std::int64_t> eligible;
  for (const auto& [id, bucket] : index.id_to_records()) {
    if (!bucket.rgb.empty() && !bucket.ir.empty()) eligible.push_back(id);
  }
  if (eligible.size() < static_cast<std::size_t>(spec.ids_per_batch)) {
    throw SamplingError("need " + std::to_string(spec.ids_per_batch) +
                        " identities with both modalities, index has " + std::to_string(eligible.size()));
  }
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(static_cast<std::size_t>(spec.ids_per_batch));

  BatchPlan plan;
  plan.identities = eligible;
  for (auto id : plan.identities) {
    const auto& bucket = index.id_to_records().at(id);
    auto rgb = draw_records(bucket.rgb, spec.images_per_id_per_modality, rng);
    auto ir = draw_records(bucket.ir, spec.images_per_id_per_modality, rng);
    plan.rgb_records.insert(plan.rgb_records.end(), rgb.begin(), rgb.end());
    plan.ir_records.insert(plan.ir_records.end(), ir.begin(), ir.end());
  }
  return plan;
}

torch::Tensor load_image_tensor(const std::filesystem::path& file, int height, int width) {
  cv::Mat img = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw IoError("cannot decode image " + file.string());
  cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
  if (img.rows != height || img.cols != width) {
    cv::resize(img, img, cv::Size(width, height), 0.0, 0.0, cv::INTER_LINEAR);
  }
  img.convertTo(img, CV_32FC3, 1.0 / 255.0);
  auto t = torch::from_blob(img.data, {height, width, 3}, torch::kFloat32).permute({2, 0, 1}).clone();
  for (int c = 0; c < 3; ++c) t[c].sub_(kMean[c]).div_(kStd[c]);
  return t;
}

ImageStore::ImageStore(const DatasetIndex& index, int height, int width)
    : index_(index), height_(height), width_(width), cache_(index.size()) {}

torch::Tensor ImageStore::get(std::size_t i) const {
  {
    std::lock_guard lock(mutex_);
    if (cache_.at(i).defined()) return cache_[i];
  }
  auto t = load_image_tensor(index_.absolute_path(index_.record(i)), height_, width_);
  std::lock_guard lock(mutex_);
  if (!cache_[i].defined()) cache_[i] = t;
  return cache_[i];
}

void ImageStore::preload() const {
  for (std::size_t i = 0; i < cache_.size(); ++i) get(i);
}

torch::Tensor augment_image(const torch::Tensor& image, int& orientation, const AugmentConfig& cfg, Rng& rng) {
  torch::Tensor out = image;
  const auto h = image.size(1);
  const auto w = image.size(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (cfg.flip && unit(rng) < 0.5) {
    out = out.flip({2});
    orientation = mirrored_orientation(orientation);
  }
  if (cfg.crop && cfg.crop_padding > 0) {
    const int pad = cfg.crop_padding;
    auto padded = torch::constant_pad_nd(out, {pad, pad, pad, pad}, 0.0);
    std::uniform_int_distribution<int> dy(0, 2 * pad), dx(0, 2 * pad);
    const int y0 = dy(rng);
    const int x0 = dx(rng);
    out = padded.slice(1, y0, y0 + h).slice(2, x0, x0 + w);
  }
  if (cfg.erase && unit(rng) < cfg.erase_probability) {
    // standard random erasing: area 2%-40%, aspect 0.3-3.3, filled with the mean (0 after normalization)
    const double area = static_cast<double>(h * w);
    for (int attempt = 0; attempt < 10; ++attempt) {
      const double target = area * std::uniform_real_distribution<double>(0.02, 0.4)(rng);
      const double log_ratio = std::uniform_real_distribution<double>(std::log(0.3), std::log(1.0 / 0.3))(rng);
      const double ratio = std::exp(log_ratio);
      const auto eh = static_cast<std::int64_t>(std::lround(std::sqrt(target * ratio)));
      const auto ew = static_cast<std::int64_t>(std::lround(std::sqrt(target / ratio)));
      if (eh < 1 || ew < 1 || eh >= h || ew >= w) continue;
      const auto y0 = std::uniform_int_distribution<std::int64_t>(0, h - eh)(rng);
      const auto x0 = std::uniform_int_distribution<std::int64_t>(0, w - ew)(rng);
      out = out.clone();
      out.slice(1, y0, y0 + eh).slice(2, x0, x0 + ew).zero_();
      break;
    }
  }
  return out.contiguous();
}

Batch sample_balanced_batch(const DatasetIndex& index, const BatchSpec& spec, Rng& rng,
                            const ImageStore& store, const AugmentConfig& augment) {
  if (store.index().size() != index.size()) {
    throw ContractViolation("image store was built for a different index");
  }
  if (store.height() != spec.image_height || store.width() != spec.image_width) {
    throw DimensionError("image store size does not match the batch spec");
  }
  const BatchPlan plan = plan_balanced_batch(index, spec, rng);

  auto assemble = [&](const std::vector<std::size_t>& records, torch::Tensor& images, torch::Tensor& labels,
                      torch::Tensor& orient) {
    std::vector<torch::Tensor> tensors;
    std::vector<std::int64_t> ids, orients;
    tensors.reserve(records.size());
    for (auto r : records) {
      const auto& rec = index.record(r);
      int o = rec.orientation;
      tensors.push_back(augment_image(store.get(r), o, augment, rng));
      ids.push_back(rec.identity);
      orients.push_back(o);
    }
    images = torch::stack(tensors);
    labels = torch::tensor(ids, torch::kInt64);
    orient = torch::tensor(orients, torch::kInt64);
  };

  Batch b;
  assemble(plan.rgb_records, b.rgb_images, b.rgb_labels, b.rgb_orient);
  assemble(plan.ir_records, b.ir_images, b.ir_labels, b.ir_orient);
  b.P = spec.images_per_id_per_modality;
  b.Q = spec.images_per_id_per_modality;
  b.rgb_records = plan.rgb_records;
  b.ir_records = plan.ir_records;
  return b;
}

}  // namespace hwdnet
