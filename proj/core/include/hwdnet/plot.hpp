#pragma once

#include <filesystem>
#include <vector>

#include "hwdnet/evaluate.hpp"
#include "hwdnet/metrics.hpp"

namespace hwdnet {

// Projects rows onto the top `k` principal axes. Each axis is signed so that
// its largest-magnitude loading is positive, which makes the output unique.
Matrix pca_project(const Matrix& x, int k = 2);

// One curve per report, rank on x and accuracy on y.
void write_cmc_plot(const std::vector<EvalReport>& reports, const std::filesystem::path& file);

struct ScatterSummary {
  std::size_t points = 0;
  std::size_t colors = 0;   // distinct identities
  std::size_t markers = 0;  // distinct modalities
};

// PCA scatter: colour by identity, circle for RGB and triangle for IR.
ScatterSummary write_embedding_scatter(const Embeddings& emb, const std::filesystem::path& file);

}  // namespace hwdnet
