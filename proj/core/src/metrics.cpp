#include "hwdnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hwdnet/error.hpp"

namespace hwdnet {

Matrix pairwise_distances(const Matrix& query, const Matrix& gallery) {
  if (query.cols != gallery.cols) {
    throw DimensionError("pairwise_distances: query d=" + std::to_string(query.cols) +
                         " but gallery d=" + std::to_string(gallery.cols));
  }
  Matrix out(query.rows, gallery.rows);
  for (std::size_t i = 0; i < query.rows; ++i) {
    auto q = query.row(i);
    for (std::size_t j = 0; j < gallery.rows; ++j) {
      auto g = gallery.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < q.size(); ++k) {
        const double d = q[k] - g[k];
        s += d * d;
      }
      out(i, j) = std::sqrt(s);
    }
  }
  return out;
}

std::vector<std::size_t> rank_gallery(std::span<const double> distances) {
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
  return order;
}

namespace {

void check_shapes(const Matrix& dist, std::span<const std::int64_t> qids, std::span<const std::int64_t> gids,
                  const RankingOptions& opt) {
  if (dist.rows != qids.size() || dist.cols != gids.size()) {
    throw DimensionError("distance matrix is " + std::to_string(dist.rows) + "x" + std::to_string(dist.cols) +
                         " but got " + std::to_string(qids.size()) + " query and " + std::to_string(gids.size()) +
                         " gallery labels");
  }
  if (opt.exclude_same_camera &&
      (opt.query_cameras.size() != qids.size() || opt.gallery_cameras.size() != gids.size())) {
    throw DimensionError("same-camera filtering needs one camera per query and gallery item");
  }
}

// Hit flags of query `q` in rank order, after optional camera filtering.
// Returns false if the query has no positive left.
bool ranked_hits(const Matrix& dist, std::span<const std::int64_t> qids, std::span<const std::int64_t> gids,
                 const RankingOptions& opt, std::size_t q, std::vector<bool>& hits) {
  hits.clear();
  bool any = false;
  for (auto g : rank_gallery(dist.row(q))) {
    const bool same_id = gids[g] == qids[q];
    if (opt.exclude_same_camera && same_id && opt.gallery_cameras[g] == opt.query_cameras[q]) continue;
    hits.push_back(same_id);
    any = any || same_id;
  }
  if (!any && !opt.exclude_same_camera) {
    throw ValidationError("query identity " + std::to_string(qids[q]) + " does not appear in the gallery");
  }
  return any;
}

}  // namespace

std::vector<double> cmc_curve(const Matrix& dist, std::span<const std::int64_t> query_ids,
                              std::span<const std::int64_t> gallery_ids, int max_rank, const RankingOptions& options) {
  check_shapes(dist, query_ids, gallery_ids, options);
  if (max_rank < 1) throw ValidationError("max_rank must be >= 1");
  std::vector<double> cmc(static_cast<std::size_t>(max_rank), 0.0);
  std::vector<bool> hits;
  std::size_t valid = 0;
  for (std::size_t q = 0; q < dist.rows; ++q) {
    if (!ranked_hits(dist, query_ids, gallery_ids, options, q, hits)) continue;
    ++valid;
    const auto first = static_cast<std::size_t>(std::find(hits.begin(), hits.end(), true) - hits.begin());
    for (std::size_t k = first; k < cmc.size(); ++k) cmc[k] += 1.0;
  }
  if (valid > 0) {
    for (auto& v : cmc) v /= static_cast<double>(valid);
  }
  return cmc;
}

double average_precision(const std::vector<bool>& hits) {
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t p = 0; p < hits.size(); ++p) {
    if (!hits[p]) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(p + 1);
  }
  return found == 0 ? 0.0 : sum / static_cast<double>(found);
}

double mean_average_precision(const Matrix& dist, std::span<const std::int64_t> query_ids,
                              std::span<const std::int64_t> gallery_ids, const RankingOptions& options) {
  check_shapes(dist, query_ids, gallery_ids, options);
  std::vector<bool> hits;
  double total = 0.0;
  std::size_t valid = 0;
  for (std::size_t q = 0; q < dist.rows; ++q) {
    if (!ranked_hits(dist, query_ids, gallery_ids, options, q, hits)) continue;
    total += average_precision(hits);
    ++valid;
  }
  return valid == 0 ? 0.0 : total / static_cast<double>(valid);
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string float_array(const std::vector<double>& values) {
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ", ";
    s += fixed6(values[i]);
  }
  return s + "]";
}

}  // namespace

std::string EvalReport::to_json() const {
  std::ostringstream out;
  out << "{\n";
  out << "  \"direction\": \"" << hwdnet::to_string(direction) << "\",\n";
  out << "  \"shot\": \"" << hwdnet::to_string(shot) << "\",\n";
  out << "  \"cmc\": " << float_array(cmc) << ",\n";
  out << "  \"map\": " << fixed6(map) << ",\n";
  out << "  \"num_queries\": " << num_queries << ",\n";
  out << "  \"num_gallery\": " << num_gallery << ",\n";
  out << "  \"seeds\": [";
  for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? ", " : "") << seeds[i];
  out << "]";
  if (!per_seed.empty()) {
    out << ",\n  \"per_seed\": [\n";
    for (std::size_t i = 0; i < per_seed.size(); ++i) {
      const auto& r = per_seed[i];
      out << "    {\"seed\": " << r.seed << ", \"cmc\": " << float_array(r.cmc) << ", \"map\": " << fixed6(r.map) << "}"
          << (i + 1 < per_seed.size() ? ",\n" : "\n");
    }
    out << "  ]";
  }
  out << "\n}\n";
  return out.str();
}

EvalReport EvalReport::from_json(const std::string& text) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.direction = parse_direction(j.at("direction").get<std::string>());
    r.shot = parse_shot(j.at("shot").get<std::string>());
    r.cmc = j.at("cmc").get<std::vector<double>>();
    r.map = j.at("map").get<double>();
    r.num_queries = j.at("num_queries").get<std::size_t>();
    r.num_gallery = j.at("num_gallery").get<std::size_t>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("per_seed")) {
      for (const auto& s : j.at("per_seed")) {
        r.per_seed.push_back({s.at("seed").get<std::uint64_t>(), s.at("cmc").get<std::vector<double>>(),
                              s.at("map").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

}  // namespace hwdnet
