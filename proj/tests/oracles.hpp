#pragma once

// Straight-loop double-precision references used to check the library.
// They share no code with it.

#include <cstdint>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;
using Labels = std::vector<std::int64_t>;

double cross_entropy(const Vec& logits, std::int64_t target);
Vec linear(const Mat& weight, const Vec& bias, const Vec& x);

// Sum over both modality blocks of CE(W mu + b, label).
double id_loss(const Mat& mu_rgb, const Mat& mu_ir, const Mat& weight, const Vec& bias, const Labels& y_rgb,
               const Labels& y_ir);

double distance(const Vec& a, const Vec& b);
double squared_distance(const Vec& a, const Vec& b);

double triplet(const Mat& z_rgb, const Mat& z_ir, const Labels& y_rgb, const Labels& y_ir, double margin);

// Smallest |argument| over all hinges and smallest gap between the chosen
// min positive / max negative and the runner-up. Used to skip samples that
// sit on a kink or a tie.
double triplet_kink_distance(const Mat& z_rgb, const Mat& z_ir, const Labels& y_rgb, const Labels& y_ir,
                             double margin);

Vec mean_of(const Mat& rows, const Labels& labels, std::int64_t id);

// sum of ||mu - centroid||^2 (or ||.|| when squared is false)
double centroid_loss_single(const Mat& mu_rgb, const Labels& y_rgb, const Mat& mu_ir, const Labels& y_ir,
                            bool squared = true);
double centroid_loss_cross(const Mat& mu_rgb, const Labels& y_rgb, const Mat& mu_ir, const Labels& y_ir,
                           bool squared = true);

// sum_t || a_t * W_rgb_t + b_t - W_ir_t ||_F
double weight_restrainer(const std::vector<Vec>& w_rgb, const std::vector<Vec>& w_ir, const Vec& a, const Vec& b);

// Ranking references. Rank of gallery item g for query q is 1 + the number
// of items strictly closer, plus equally close items with a smaller index.
std::vector<int> ranks(const Vec& distances);
Vec cmc(const Mat& dist, const Labels& qids, const Labels& gids, int max_rank);
double average_precision(const Vec& distances, const Labels& gids, std::int64_t qid);
double mean_ap(const Mat& dist, const Labels& qids, const Labels& gids);

}  // namespace oracle
