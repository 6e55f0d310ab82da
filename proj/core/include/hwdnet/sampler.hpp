#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include <torch/types.h>

#include "hwdnet/dataset.hpp"

namespace hwdnet {

struct BatchSpec {
  int ids_per_batch = 12;
  int images_per_id_per_modality = 4;
  int image_height = 256;
  int image_width = 180;

  void validate() const;
  int images_per_modality() const { return ids_per_batch * images_per_id_per_modality; }
};

// Each switch is independent; a disabled pipeline only resizes and normalizes.
struct AugmentConfig {
  bool flip = true;
  bool crop = true;
  int crop_padding = 10;
  bool erase = true;
  double erase_probability = 0.5;
};

struct Batch {
  torch::Tensor rgb_images;  // [M, 3, H, W]
  torch::Tensor ir_images;   // [N, 3, H, W]
  torch::Tensor rgb_labels;  // [M] int64 identities
  torch::Tensor ir_labels;   // [N]
  torch::Tensor rgb_orient;  // [M] int64 in [0, 8)
  torch::Tensor ir_orient;   // [N]
  int P = 0;
  int Q = 0;
  std::vector<std::size_t> rgb_records;
  std::vector<std::size_t> ir_records;
};

// Which records go into a batch, before any pixels are touched.
struct BatchPlan {
  std::vector<std::int64_t> identities;
  std::vector<std::size_t> rgb_records;  // identity-major, P per identity
  std::vector<std::size_t> ir_records;   // identity-major, Q per identity
};

BatchPlan plan_balanced_batch(const DatasetIndex& index, const BatchSpec& spec, Rng& rng);

// Decodes, resizes and normalizes images once and keeps them in memory.
// Safe to share between concurrent readers.
class ImageStore {
 public:
  ImageStore(const DatasetIndex& index, int height, int width);

  // Normalized float tensor [3, H, W] for the record at `i`.
  torch::Tensor get(std::size_t i) const;
  void preload() const;

  int height() const { return height_; }
  int width() const { return width_; }
  const DatasetIndex& index() const { return index_; }

 private:
  DatasetIndex index_;
  int height_;
  int width_;
  mutable std::vector<torch::Tensor> cache_;
  mutable std::mutex mutex_;
};

// Decoded image of `file` resized to (height, width), channel-normalized.
torch::Tensor load_image_tensor(const std::filesystem::path& file, int height, int width);

// Applies flip / pad-and-crop / random erasing to one [3, H, W] image.
// Returns the possibly mirrored orientation label alongside.
torch::Tensor augment_image(const torch::Tensor& image, int& orientation, const AugmentConfig& cfg, Rng& rng);

Batch sample_balanced_batch(const DatasetIndex& index, const BatchSpec& spec, Rng& rng,
                            const ImageStore& store, const AugmentConfig& augment);

}  // namespace hwdnet
