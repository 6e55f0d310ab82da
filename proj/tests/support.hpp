#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <torch/torch.h>

#include "oracles.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

using Gen = std::mt19937_64;

oracle::Mat random_mat(Gen& gen, std::size_t rows, std::size_t cols, double scale = 1.0);
torch::Tensor to_tensor(const oracle::Mat& m);
torch::Tensor to_tensor(const oracle::Labels& labels);
oracle::Mat to_mat(const torch::Tensor& t);
oracle::Vec to_vec(const torch::Tensor& t);

// 2 identities x 2 samples in each modality, d = 6 unless stated otherwise.
struct SmallBatch {
  oracle::Mat rgb, ir;
  oracle::Labels y_rgb, y_ir;
};
SmallBatch small_batch(Gen& gen, int ids = 2, int per_id = 2, int dim = 6);

// Central differences of `f` with respect to every element of `x` (double, in place).
torch::Tensor numeric_gradient(const std::function<double()>& f, torch::Tensor x, double h = 1e-5);

// ||a - b|| / max(||a||, ||b||, floor)
double relative_error(const torch::Tensor& a, const torch::Tensor& b, double floor = 1e-3);

}  // namespace testing_support
