#pragma once

#include <cstdint>
#include <filesystem>

#include "hwdnet/dataset.hpp"

namespace hwdnet {

// Procedural stand-in for a paired RGB/IR UAV vehicle dataset.
//
// Each identity is a top-down vehicle glyph with its own body colour, body
// proportions, cabin placement, roof marker and stripe texture. Every sample
// is an independent render at one of the eight headings with random scale,
// offset and background. The IR render keeps only luminance, passes it through
// a fixed monotone curve and adds sensor noise, so colour is RGB-only while
// shape and texture survive in both modalities.
struct SyntheticSpec {
  int num_ids = 40;
  int samples_per_id_per_modality = 8;
  std::uint64_t seed = 0;
  // The last `test_ids` identities are written to the test split (IR records
  // as query, RGB records as gallery). They are counted on top of num_ids.
  int test_ids = 0;
  int height = 128;
  int width = 96;
};

// Writes `rgb/`, `ir/` and `labels.tsv` under `out` and returns the index of
// what was written. Output bytes are a pure function of the spec.
DatasetIndex generate_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out);

}  // namespace hwdnet
