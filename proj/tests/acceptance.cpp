// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "checks.hpp"
#include "hwdnet/ablation.hpp"
#include "hwdnet/synthetic.hpp"
#include "hwdnet/trainer.hpp"
#include "support.hpp"

using namespace hwdnet;

namespace {

constexpr double kChance = 1.0 / 20.0;
constexpr double kMinRank1 = 5.0 * kChance;
constexpr double kUntrainedBand = 0.1;

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // 0: no runtime bound
  std::function<checks::Result()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const EvalReport& find_report(const std::vector<EvalReport>& reports, Direction d, Shot s) {
  for (const auto& r : reports) {
    if (r.direction == d && r.shot == s) return r;
  }
  throw std::runtime_error("missing report");
}

// Shared state for the experiment criteria: one dataset, seed-0 full run reused.
struct Experiment {
  testing_support::TempDir dir;
  DatasetIndex index;
  std::vector<EvalReport> full_seed0;

  Experiment() {
    SyntheticSpec spec;
    spec.num_ids = 40;
    spec.test_ids = 20;
    spec.samples_per_id_per_modality = 8;
    spec.seed = 0;
    index = generate_synthetic_dataset(spec, dir / "data");
  }

  static TrainConfig config(std::uint64_t seed, bool full) {
    auto cfg = desk_preset();
    cfg.seed = seed;
    if (!full) {
      for (const auto& v : component_grid()) {
        if (v.name == "baseline") cfg.loss.enable = v.enable;
      }
    }
    return cfg;
  }

  std::vector<EvalReport> run(std::uint64_t seed, bool full, const std::string& tag) {
    TrainOptions opts;
    opts.out_dir = dir / tag;
    return train(config(seed, full), index, opts).reports;
  }
};

checks::Result end_to_end(Experiment& ex) {
  checks::Result r;
  ex.full_seed0 = ex.run(0, true, "full_s0");
  const auto& trained = find_report(ex.full_seed0, Direction::ir2rgb, Shot::single);

  const auto cfg = Experiment::config(0, true);
  Trainer untrained(cfg, ex.index.train_subset());
  const auto before = evaluate_all(untrained.model(), ex.index.test_subset(), cfg);
  const auto& base = find_report(before, Direction::ir2rgb, Shot::single);

  const bool learned = trained.rank(1) >= kMinRank1;
  const bool at_chance = std::abs(base.rank(1) - kChance) <= kUntrainedBand;
  r.pass = learned && at_chance && trained.seeds.size() == 10;
  r.detail = "IR2RGB single-shot rank-1 " + fmt("%.4f", trained.rank(1)) + " (>= " + fmt("%.2f", kMinRank1) +
             ", " + std::to_string(trained.seeds.size()) + " gallery seeds), untrained " + fmt("%.4f", base.rank(1)) +
             " (chance " + fmt("%.2f", kChance) + " +/- " + fmt("%.1f", kUntrainedBand) + ")";
  return r;
}

checks::Result ablation_direction(Experiment& ex) {
  double full = 0.0, baseline = 0.0;
  std::string per_seed;
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto f = seed == 0 && !ex.full_seed0.empty() ? ex.full_seed0
                                                       : ex.run(seed, true, "full_s" + std::to_string(seed));
    const auto b = ex.run(seed, false, "baseline_s" + std::to_string(seed));
    const double fm = find_report(f, Direction::ir2rgb, Shot::single).map;
    const double bm = find_report(b, Direction::ir2rgb, Shot::single).map;
    full += fm / 3.0;
    baseline += bm / 3.0;
    per_seed += (per_seed.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + " " +
                fmt("%.3f", fm) + "/" + fmt("%.3f", bm);
  }
  checks::Result r;
  r.pass = full >= baseline;
  r.detail = "mean IR2RGB single-shot mAP full " + fmt("%.4f", full) + " vs baseline " + fmt("%.4f", baseline) +
             " (" + per_seed + ")";
  return r;
}

checks::Result determinism(Experiment& ex) {
  checks::Result r;
  if (ex.full_seed0.empty()) ex.full_seed0 = ex.run(0, true, "full_s0");
  const auto again = ex.run(0, true, "full_s0_again");
  int identical = 0, files = 0;
  for (const auto& report : again) {
    const auto name = report_file_name(report);
    ++files;
    const auto a = slurp(ex.dir / "full_s0" / name);
    const auto b = slurp(ex.dir / "full_s0_again" / name);
    if (!a.empty() && a == b && report.to_json() == find_report(ex.full_seed0, report.direction, report.shot).to_json()) {
      ++identical;
    }
  }
  r.pass = files == 4 && identical == files;
  r.detail = std::to_string(identical) + "/" + std::to_string(files) + " EvalReport JSON files byte-identical";
  return r;
}

}  // namespace

int main() {
  torch::set_num_threads(1);
  Experiment ex;

  const std::vector<Criterion> criteria = {
      {1, "loss oracle equivalence", 60, [] { return checks::loss_oracles(200, 1); }},
      {2, "gradient checks", 120, [] { return checks::gradient_checks(200, 2); }},
      {3, "metric oracle equivalence", 60, [] { return checks::metric_oracles(1000, 3); }},
      {4, "structural invariants", 60, [] { return checks::structural_invariants(); }},
      {5, "end-to-end desk-scale learning", 900, [&] { return end_to_end(ex); }},
      {6, "ablation direction", 0, [&] { return ablation_direction(ex); }},
      {7, "determinism", 0, [&] { return determinism(ex); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    checks::Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      r.pass = false;
      r.detail += "; over the " + fmt("%.0f", c.budget_seconds) + " s budget";
    }
    if (!r.pass) ++failed;
    std::cout << (r.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << r.detail << " ("
              << fmt("%.1f", secs) << " s)" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
