#include "hwdnet/ablation.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "hwdnet/error.hpp"
#include "hwdnet/trainer.hpp"

namespace hwdnet {

std::vector<AblationVariant> component_grid() {
  auto make = [](std::string name, bool wr, bool orient, bool centroid) {
    AblationVariant v{std::move(name), {}};
    v.enable.wr = wr;
    v.enable.orient = orient;
    v.enable.centroid = centroid;
    return v;
  };
  return {make("baseline", false, false, false), make("+wr", true, false, false),
          make("+R", false, true, false),        make("+C'", false, false, true),
          make("+R+C'", false, true, true),      make("full", true, true, true)};
}

ProtocolSummary summarize(const EvalReport& report) {
  auto at = [&](int k) { return report.cmc.size() >= static_cast<std::size_t>(k) ? report.rank(k) : report.cmc.back(); };
  return {at(1), at(10), at(20), report.map};
}

namespace {

std::string dir_name(const std::string& variant) {
  std::string out;
  for (char c : variant) {
    if (c == '+') out += out.empty() ? "" : "_";
    else if (c == '\'') out += "p";
    else out += c;
  }
  return out;
}

std::string pct(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}

}  // namespace

AblationTable run_ablation(const TrainConfig& base, const DatasetIndex& index, const std::vector<std::uint64_t>& seeds,
                           const std::filesystem::path& out_dir, const std::vector<AblationVariant>& variants,
                           const std::function<void(const std::string&)>& progress) {
  if (seeds.empty()) throw ValidationError("ablation needs at least one seed");
  if (index.test_subset().empty()) throw ValidationError("ablation needs a dataset with a test split");
  AblationTable table;
  table.seeds = seeds;
  for (const auto& variant : variants) {
    AblationRow row;
    row.variant = variant;
    for (auto seed : seeds) {
      auto cfg = base;
      cfg.seed = seed;
      cfg.loss.enable = variant.enable;
      TrainOptions opts;
      opts.out_dir = out_dir / dir_name(variant.name) / ("seed" + std::to_string(seed));
      opts.write_checkpoints = false;
      if (progress) {
        opts.progress = [&](const std::string& m) { progress(variant.name + " seed " + std::to_string(seed) + ": " + m); };
      }
      const auto result = train(cfg, index, opts);
      for (const auto& r : result.reports) {
        if (r.direction != Direction::ir2rgb) continue;
        const auto s = summarize(r);
        auto& dst = r.shot == Shot::single ? row.single : row.multi;
        dst.rank1 += s.rank1;
        dst.rank10 += s.rank10;
        dst.rank20 += s.rank20;
        dst.map += s.map;
        if (r.shot == Shot::single) row.single_map_per_seed.push_back(r.map);
      }
    }
    const auto n = static_cast<double>(seeds.size());
    for (auto* s : {&row.single, &row.multi}) {
      s->rank1 /= n;
      s->rank10 /= n;
      s->rank20 /= n;
      s->map /= n;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string AblationTable::to_text() const {
  std::string out = "IR2RGB, mean over " + std::to_string(seeds.size()) + " training seed(s), values in %\n";
  out += "                 |          single-shot          |          multi-shot\n";
  out += "variant  wr R C' | rank1  rank10 rank20   mAP   | rank1  rank10 rank20   mAP\n";
  for (const auto& r : rows) {
    char head[64];
    std::snprintf(head, sizeof head, "%-8s %-2s %-1s %-2s |", r.variant.name.c_str(), r.variant.enable.wr ? "x" : ".",
                  r.variant.enable.orient ? "x" : ".", r.variant.enable.centroid ? "x" : ".");
    out += head;
    for (const auto* s : {&r.single, &r.multi}) {
      out += pct(s->rank1) + " " + pct(s->rank10) + " " + pct(s->rank20) + " " + pct(s->map) + " |";
    }
    out.pop_back();
    out += "\n";
  }
  return out;
}

std::string AblationTable::to_json() const {
  nlohmann::ordered_json j;
  j["direction"] = "ir2rgb";
  j["seeds"] = seeds;
  auto rows_json = nlohmann::ordered_json::array();
  auto proto = [](const ProtocolSummary& s) {
    return nlohmann::ordered_json{{"rank1", s.rank1}, {"rank10", s.rank10}, {"rank20", s.rank20}, {"map", s.map}};
  };
  for (const auto& r : rows) {
    rows_json.push_back({{"variant", r.variant.name},
                         {"wr", r.variant.enable.wr},
                         {"orient", r.variant.enable.orient},
                         {"centroid", r.variant.enable.centroid},
                         {"single", proto(r.single)},
                         {"multi", proto(r.multi)},
                         {"single_map_per_seed", r.single_map_per_seed}});
  }
  j["rows"] = rows_json;
  return j.dump(2) + "\n";
}

}  // namespace hwdnet
