#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hwdnet/config.hpp"
#include "hwdnet/metrics.hpp"

namespace hwdnet {

struct AblationVariant {
  std::string name;
  LossSwitches enable;
};

// baseline (id + tri), +wr, +R, +C', +R+C', full.
std::vector<AblationVariant> component_grid();

struct ProtocolSummary {
  double rank1 = 0, rank10 = 0, rank20 = 0, map = 0;
};

struct AblationRow {
  AblationVariant variant;
  ProtocolSummary single;  // IR2RGB, averaged over training seeds
  ProtocolSummary multi;
  std::vector<double> single_map_per_seed;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;

  std::string to_text() const;
  std::string to_json() const;
};

ProtocolSummary summarize(const EvalReport& report);

// Trains every variant once per seed on the train split of `index` and
// evaluates IR2RGB on its test split. Per-run outputs go to
// out_dir/<variant>/seed<k>/.
AblationTable run_ablation(const TrainConfig& base, const DatasetIndex& index, const std::vector<std::uint64_t>& seeds,
                           const std::filesystem::path& out_dir,
                           const std::vector<AblationVariant>& variants = component_grid(),
                           const std::function<void(const std::string&)>& progress = {});

}  // namespace hwdnet
