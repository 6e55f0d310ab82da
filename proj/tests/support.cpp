#include "support.hpp"

#include <atomic>
#include <unistd.h>

namespace testing_support {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  const auto base = std::filesystem::temp_directory_path();
  for (;;) {
    auto candidate = base / ("hwdnet_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    if (std::filesystem::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

oracle::Mat random_mat(Gen& gen, std::size_t rows, std::size_t cols, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  oracle::Mat m(rows, oracle::Vec(cols));
  for (auto& r : m)
    for (auto& v : r) v = nd(gen);
  return m;
}

torch::Tensor to_tensor(const oracle::Mat& m) {
  const auto rows = static_cast<long>(m.size());
  const auto cols = rows ? static_cast<long>(m[0].size()) : 0L;
  auto t = torch::empty({rows, cols}, torch::kFloat64);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) t[r][c] = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return t;
}

torch::Tensor to_tensor(const oracle::Labels& labels) {
  return torch::tensor(std::vector<std::int64_t>(labels.begin(), labels.end()), torch::kInt64);
}

oracle::Mat to_mat(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat64).contiguous();
  oracle::Mat m(static_cast<std::size_t>(c.size(0)), oracle::Vec(static_cast<std::size_t>(c.size(1))));
  const double* p = c.data_ptr<double>();
  for (auto& row : m)
    for (auto& v : row) v = *p++;
  return m;
}

oracle::Vec to_vec(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat64).contiguous().flatten();
  return oracle::Vec(c.data_ptr<double>(), c.data_ptr<double>() + c.numel());
}

SmallBatch small_batch(Gen& gen, int ids, int per_id, int dim) {
  SmallBatch b;
  const auto n = static_cast<std::size_t>(ids * per_id);
  b.rgb = random_mat(gen, n, static_cast<std::size_t>(dim));
  b.ir = random_mat(gen, n, static_cast<std::size_t>(dim));
  for (int k = 0; k < ids; ++k) {
    for (int j = 0; j < per_id; ++j) {
      b.y_rgb.push_back(k);
      b.y_ir.push_back(k);
    }
  }
  return b;
}

torch::Tensor numeric_gradient(const std::function<double()>& f, torch::Tensor x, double h) {
  torch::NoGradGuard guard;
  auto flat = x.view(-1);
  auto grad = torch::zeros_like(flat);
  for (long i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + h;
    const double up = f();
    flat[i] = orig - h;
    const double down = f();
    flat[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad.view(x.sizes());
}

double relative_error(const torch::Tensor& a, const torch::Tensor& b, double floor) {
  const double diff = (a - b).norm().item<double>();
  const double scale = std::max({a.norm().item<double>(), b.norm().item<double>(), floor});
  return diff / scale;
}

}  // namespace testing_support
