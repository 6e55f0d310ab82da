#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hwdnet/dataset.hpp"

namespace hwdnet {

// Dense row-major matrix of doubles; rows are samples for feature matrices.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

Matrix pairwise_distances(const Matrix& query, const Matrix& gallery);

// Gallery indices sorted by ascending distance; equal distances keep gallery order.
std::vector<std::size_t> rank_gallery(std::span<const double> distances);

struct RankingOptions {
  // Drop gallery entries sharing both identity and camera with the query.
  bool exclude_same_camera = false;
  std::vector<int> query_cameras;
  std::vector<int> gallery_cameras;
};

std::vector<double> cmc_curve(const Matrix& dist, std::span<const std::int64_t> query_ids,
                              std::span<const std::int64_t> gallery_ids, int max_rank,
                              const RankingOptions& options = {});

double mean_average_precision(const Matrix& dist, std::span<const std::int64_t> query_ids,
                              std::span<const std::int64_t> gallery_ids, const RankingOptions& options = {});

// Average precision of one ranked list given as hit flags in rank order.
double average_precision(const std::vector<bool>& hits);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<double> cmc;
  double map = 0.0;
};

struct EvalReport {
  Direction direction = Direction::ir2rgb;
  Shot shot = Shot::single;
  std::vector<double> cmc;
  double map = 0.0;
  std::size_t num_queries = 0;
  std::size_t num_gallery = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<SeedResult> per_seed;

  double rank(int k) const { return cmc.at(static_cast<std::size_t>(k - 1)); }

  // Fixed key order, floats printed with 6 decimals.
  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

}  // namespace hwdnet
