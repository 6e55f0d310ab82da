#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hwdnet/config.hpp"
#include "hwdnet/metrics.hpp"
#include "hwdnet/model.hpp"
#include "hwdnet/sampler.hpp"

namespace hwdnet {

// Retrieval features of every record of an index, row i <-> record i.
struct Embeddings {
  Matrix features;
  std::vector<std::int64_t> identities;
  std::vector<Modality> modalities;
  std::vector<int> cameras;
};

// Runs the model in eval mode over every image of `store` and returns mu.
// The model's train/eval mode is restored afterwards.
Embeddings embed_index(HwdNetImpl& model, const ImageStore& store, int batch_size = 64);

EvalReport evaluate_embeddings(const Embeddings& emb, const DatasetIndex& index, Direction direction, Shot shot,
                               const EvalSettings& settings);

// Single-shot draws one gallery per seed 0 .. settings.single_shot_seeds-1
// and averages; multi-shot runs once.
EvalReport evaluate_protocol(HwdNetImpl& model, const ImageStore& store, Direction direction, Shot shot,
                             const EvalSettings& settings);

// TSV: identity, modality, camera, then one column per feature.
void write_embeddings_tsv(const Embeddings& emb, const std::filesystem::path& file);
Embeddings read_embeddings_tsv(const std::filesystem::path& file);

}  // namespace hwdnet
