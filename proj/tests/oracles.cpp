#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace oracle {

double cross_entropy(const Vec& logits, std::int64_t target) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s) - logits[static_cast<std::size_t>(target)];
}

Vec linear(const Mat& weight, const Vec& bias, const Vec& x) {
  Vec out(weight.size());
  for (std::size_t r = 0; r < weight.size(); ++r) {
    double s = bias[r];
    for (std::size_t c = 0; c < x.size(); ++c) s += weight[r][c] * x[c];
    out[r] = s;
  }
  return out;
}

double id_loss(const Mat& mu_rgb, const Mat& mu_ir, const Mat& weight, const Vec& bias, const Labels& y_rgb,
               const Labels& y_ir) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu_rgb.size(); ++i) s += cross_entropy(linear(weight, bias, mu_rgb[i]), y_rgb[i]);
  for (std::size_t i = 0; i < mu_ir.size(); ++i) s += cross_entropy(linear(weight, bias, mu_ir[i]), y_ir[i]);
  return s;
}

double squared_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

double distance(const Vec& a, const Vec& b) { return std::sqrt(squared_distance(a, b)); }

namespace {

double one_way(const Mat& anchors, const Labels& ya, const Mat& others, const Labels& yo, double margin) {
  double s = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    double min_pos = std::numeric_limits<double>::infinity();
    double max_neg = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < others.size(); ++j) {
      const double d = distance(anchors[i], others[j]);
      if (yo[j] == ya[i]) min_pos = std::min(min_pos, d);
      else max_neg = std::max(max_neg, d);
    }
    s += std::max(0.0, margin + min_pos - max_neg);
  }
  return s;
}

double one_way_kink(const Mat& anchors, const Labels& ya, const Mat& others, const Labels& yo, double margin) {
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    std::vector<double> pos, neg;
    for (std::size_t j = 0; j < others.size(); ++j) {
      (yo[j] == ya[i] ? pos : neg).push_back(distance(anchors[i], others[j]));
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.rbegin(), neg.rend());
    closest = std::min(closest, std::abs(margin + pos[0] - neg[0]));
    if (pos.size() > 1) closest = std::min(closest, pos[1] - pos[0]);
    if (neg.size() > 1) closest = std::min(closest, neg[0] - neg[1]);
  }
  return closest;
}

}  // namespace

double triplet(const Mat& z_rgb, const Mat& z_ir, const Labels& y_rgb, const Labels& y_ir, double margin) {
  return one_way(z_rgb, y_rgb, z_ir, y_ir, margin) + one_way(z_ir, y_ir, z_rgb, y_rgb, margin);
}

double triplet_kink_distance(const Mat& z_rgb, const Mat& z_ir, const Labels& y_rgb, const Labels& y_ir,
                             double margin) {
  return std::min(one_way_kink(z_rgb, y_rgb, z_ir, y_ir, margin), one_way_kink(z_ir, y_ir, z_rgb, y_rgb, margin));
}

Vec mean_of(const Mat& rows, const Labels& labels, std::int64_t id) {
  Vec out(rows.empty() ? 0 : rows[0].size(), 0.0);
  int n = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (labels[i] != id) continue;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += rows[i][k];
    ++n;
  }
  for (auto& v : out) v /= n;
  return out;
}

namespace {

double sim(const Vec& a, const Vec& b, bool squared) { return squared ? squared_distance(a, b) : distance(a, b); }

}  // namespace

double centroid_loss_single(const Mat& mu_rgb, const Labels& y_rgb, const Mat& mu_ir, const Labels& y_ir,
                            bool squared) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu_rgb.size(); ++i) s += sim(mu_rgb[i], mean_of(mu_rgb, y_rgb, y_rgb[i]), squared);
  for (std::size_t i = 0; i < mu_ir.size(); ++i) s += sim(mu_ir[i], mean_of(mu_ir, y_ir, y_ir[i]), squared);
  return s;
}

double centroid_loss_cross(const Mat& mu_rgb, const Labels& y_rgb, const Mat& mu_ir, const Labels& y_ir,
                           bool squared) {
  auto joint = [&](std::int64_t id) {
    const Vec r = mean_of(mu_rgb, y_rgb, id);
    const Vec i = mean_of(mu_ir, y_ir, id);
    Vec out(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) out[k] = 0.5 * (r[k] + i[k]);
    return out;
  };
  double s = 0.0;
  for (std::size_t i = 0; i < mu_rgb.size(); ++i) s += sim(mu_rgb[i], joint(y_rgb[i]), squared);
  for (std::size_t i = 0; i < mu_ir.size(); ++i) s += sim(mu_ir[i], joint(y_ir[i]), squared);
  return s;
}

double weight_restrainer(const std::vector<Vec>& w_rgb, const std::vector<Vec>& w_ir, const Vec& a, const Vec& b) {
  double total = 0.0;
  for (std::size_t t = 0; t < w_rgb.size(); ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < w_rgb[t].size(); ++k) {
      const double d = a[t] * w_rgb[t][k] + b[t] - w_ir[t][k];
      s += d * d;
    }
    total += std::sqrt(s);
  }
  return total;
}

std::vector<int> ranks(const Vec& distances) {
  std::vector<int> out(distances.size());
  for (std::size_t g = 0; g < distances.size(); ++g) {
    int r = 1;
    for (std::size_t h = 0; h < distances.size(); ++h) {
      if (distances[h] < distances[g] || (distances[h] == distances[g] && h < g)) ++r;
    }
    out[g] = r;
  }
  return out;
}

Vec cmc(const Mat& dist, const Labels& qids, const Labels& gids, int max_rank) {
  Vec out(static_cast<std::size_t>(max_rank), 0.0);
  for (std::size_t q = 0; q < dist.size(); ++q) {
    const auto r = ranks(dist[q]);
    for (int k = 1; k <= max_rank; ++k) {
      bool hit = false;
      for (std::size_t g = 0; g < gids.size(); ++g) hit = hit || (gids[g] == qids[q] && r[g] <= k);
      out[static_cast<std::size_t>(k - 1)] += hit ? 1.0 : 0.0;
    }
  }
  for (auto& v : out) v /= static_cast<double>(dist.size());
  return out;
}

double average_precision(const Vec& distances, const Labels& gids, std::int64_t qid) {
  const auto r = ranks(distances);
  double s = 0.0;
  int positives = 0;
  for (std::size_t g = 0; g < gids.size(); ++g) {
    if (gids[g] != qid) continue;
    ++positives;
    int at_or_above = 0;
    for (std::size_t h = 0; h < gids.size(); ++h) at_or_above += (gids[h] == qid && r[h] <= r[g]) ? 1 : 0;
    s += static_cast<double>(at_or_above) / r[g];
  }
  return s / positives;
}

double mean_ap(const Mat& dist, const Labels& qids, const Labels& gids) {
  double s = 0.0;
  for (std::size_t q = 0; q < dist.size(); ++q) s += average_precision(dist[q], gids, qids[q]);
  return s / static_cast<double>(dist.size());
}

}  // namespace oracle
