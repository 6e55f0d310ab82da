#include <random>

#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "hwdnet/backbone.hpp"
#include "hwdnet/losses.hpp"
#include "hwdnet/metrics.hpp"
#include "hwdnet/model.hpp"

using namespace hwdnet;

namespace {

struct Retrieval {
  Matrix dist;
  std::vector<std::int64_t> qids, gids;
};

Retrieval retrieval(std::size_t queries, std::size_t gallery, int ids) {
  std::mt19937_64 gen(0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Retrieval r{Matrix(queries, gallery), {}, {}};
  for (auto& v : r.dist.data) v = ud(gen);
  for (std::size_t g = 0; g < gallery; ++g) r.gids.push_back(static_cast<std::int64_t>(g % ids));
  for (std::size_t q = 0; q < queries; ++q) r.qids.push_back(static_cast<std::int64_t>(q % ids));
  return r;
}

void BM_CmcCurve(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto r = retrieval(n, n, 20);
  for (auto _ : state) benchmark::DoNotOptimize(cmc_curve(r.dist, r.qids, r.gids, 20));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_CmcCurve)->Arg(160)->Arg(1000);

void BM_MeanAveragePrecision(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto r = retrieval(n, n, 20);
  for (auto _ : state) benchmark::DoNotOptimize(mean_average_precision(r.dist, r.qids, r.gids));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_MeanAveragePrecision)->Arg(160)->Arg(1000);

struct LossBatch {
  torch::Tensor rgb, ir, y;
};

LossBatch loss_batch(int d) {
  torch::manual_seed(0);
  auto y = torch::arange(12, torch::kInt64).repeat_interleave(4);
  return {torch::randn({48, d}), torch::randn({48, d}), y};
}

void BM_TripletForwardBackward(benchmark::State& state) {
  auto b = loss_batch(static_cast<int>(state.range(0)));
  b.rgb.requires_grad_(true);
  for (auto _ : state) {
    auto loss = cross_modality_triplet(b.rgb, b.ir, b.y, b.y, 0.5);
    loss.backward();
    b.rgb.mutable_grad().reset();
  }
}
BENCHMARK(BM_TripletForwardBackward)->Arg(64)->Arg(1024);

void BM_CentroidLoss(benchmark::State& state) {
  const auto b = loss_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(centroid_similarity_loss(b.rgb, b.y, b.ir, b.y, CentroidMode::cross_modality));
  }
}
BENCHMARK(BM_CentroidLoss)->Arg(64)->Arg(1024);

void BM_WeightRestrainer(benchmark::State& state) {
  EncoderConfig cfg;
  TwoStreamEncoder enc(cfg, RelationPlan(static_cast<int>(state.range(0))));
  Restrainer restrainer(*enc, RestrainerConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(weight_restrainer_loss(*enc, *restrainer));
}
BENCHMARK(BM_WeightRestrainer)->Arg(1)->Arg(2)->Arg(5);

void BM_DeskEncoderPair(benchmark::State& state) {
  torch::set_num_threads(1);
  ModelSpec spec;
  spec.num_identities = 40;
  HwdNet model(spec);
  model->train();
  const auto rgb = torch::randn({48, 3, 64, 48}), ir = torch::randn({48, 3, 64, 48});
  const bool backward = state.range(0) != 0;
  for (auto _ : state) {
    auto [a, b] = model->forward_pair(rgb, ir);
    if (backward) (a.parts.mu.sum() + b.parts.mu.sum()).backward();
    benchmark::DoNotOptimize(a.parts.mu.data_ptr());
  }
  state.SetItemsProcessed(state.iterations() * 96);
}
BENCHMARK(BM_DeskEncoderPair)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
