#include "hwdnet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "hwdnet/error.hpp"

namespace hwdnet {

Matrix pca_project(const Matrix& x, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > x.cols) {
    throw DimensionError("cannot project " + std::to_string(x.cols) + "-d data onto " + std::to_string(k) + " axes");
  }
  if (x.rows == 0) return Matrix(0, static_cast<std::size_t>(k));
  auto t = torch::from_blob(const_cast<double*>(x.data.data()),
                            {static_cast<long>(x.rows), static_cast<long>(x.cols)}, torch::kFloat64)
               .clone();
  t -= t.mean(0, true);
  const auto cov = t.t().mm(t) / std::max<double>(1.0, static_cast<double>(x.rows) - 1.0);
  auto [values, vectors] = torch::linalg_eigh(cov);  // ascending
  auto axes = vectors.flip({1}).slice(1, 0, k).contiguous();
  const auto idx = axes.abs().argmax(0);
  const auto signs = axes.gather(0, idx.unsqueeze(0)).sign();
  axes = axes * torch::where(signs == 0, torch::ones_like(signs), signs);
  const auto proj = t.mm(axes).contiguous();
  Matrix out(x.rows, static_cast<std::size_t>(k));
  std::copy_n(proj.data_ptr<double>(), out.data.size(), out.data.begin());
  return out;
}

namespace {

constexpr int kW = 720, kH = 540, kLeft = 70, kRight = 30, kTop = 40, kBottom = 60;

cv::Scalar palette(std::size_t i, std::size_t n) {
  cv::Mat hsv(1, 1, CV_8UC3,
              cv::Scalar(static_cast<double>(i) * 180.0 / static_cast<double>(std::max<std::size_t>(n, 1)), 200, 210));
  cv::Mat bgr;
  cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
  const auto p = bgr.at<cv::Vec3b>(0, 0);
  return {static_cast<double>(p[0]), static_cast<double>(p[1]), static_cast<double>(p[2])};
}

void save(const cv::Mat& img, const std::filesystem::path& file) {
  bool ok = false;
  try {
    ok = cv::imwrite(file.string(), img);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + file.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + file.string());
}

void text(cv::Mat& img, const std::string& s, cv::Point at, double scale = 0.45) {
  cv::putText(img, s, at, cv::FONT_HERSHEY_SIMPLEX, scale, cv::Scalar(30, 30, 30), 1, cv::LINE_AA);
}

}  // namespace

void write_cmc_plot(const std::vector<EvalReport>& reports, const std::filesystem::path& file) {
  if (reports.empty()) throw ValidationError("no reports to plot");
  cv::Mat img(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255));
  const int pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  std::size_t max_rank = 1;
  for (const auto& r : reports) max_rank = std::max(max_rank, r.cmc.size());
  auto px = [&](double rank) {
    const double t = max_rank == 1 ? 0.5 : (rank - 1.0) / static_cast<double>(max_rank - 1);
    return kLeft + static_cast<int>(std::lround(t * pw));
  };
  auto py = [&](double acc) { return kTop + static_cast<int>(std::lround((1.0 - acc) * ph)); };

  for (int i = 0; i <= 10; ++i) {
    const double v = i / 10.0;
    cv::line(img, {kLeft, py(v)}, {kLeft + pw, py(v)}, cv::Scalar(225, 225, 225), 1);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    text(img, buf, {kLeft - 35, py(v) + 5});
  }
  for (std::size_t k = 1; k <= max_rank; ++k) {
    if (k == 1 || k % 5 == 0) text(img, std::to_string(k), {px(static_cast<double>(k)) - 6, kTop + ph + 20});
  }
  cv::rectangle(img, {kLeft, kTop}, {kLeft + pw, kTop + ph}, cv::Scalar(60, 60, 60), 1);
  text(img, "rank", {kLeft + pw / 2 - 15, kH - 15}, 0.5);
  text(img, "matching rate", {8, kTop - 15}, 0.5);

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const auto colour = palette(i, reports.size());
    std::vector<cv::Point> pts;
    for (std::size_t k = 0; k < r.cmc.size(); ++k) pts.emplace_back(px(static_cast<double>(k + 1)), py(r.cmc[k]));
    cv::polylines(img, pts, false, colour, 2, cv::LINE_AA);
    for (const auto& p : pts) cv::circle(img, p, 3, colour, cv::FILLED, cv::LINE_AA);
    char label[96];
    std::snprintf(label, sizeof label, "%s %s  r1 %.3f  mAP %.3f", std::string(to_string(r.direction)).c_str(),
                  std::string(to_string(r.shot)).c_str(), r.cmc.empty() ? 0.0 : r.cmc[0], r.map);
    const int y = kTop + ph - 15 - static_cast<int>(i) * 20;
    cv::line(img, {kLeft + pw - 260, y - 4}, {kLeft + pw - 235, y - 4}, colour, 2);
    text(img, label, {kLeft + pw - 228, y});
  }
  save(img, file);
}

ScatterSummary write_embedding_scatter(const Embeddings& emb, const std::filesystem::path& file) {
  if (emb.features.rows == 0) throw ValidationError("no embeddings to plot");
  const auto proj = pca_project(emb.features, std::min<int>(2, static_cast<int>(emb.features.cols)));
  std::map<std::int64_t, std::size_t> colour_of;
  for (auto id : emb.identities) colour_of.emplace(id, 0);
  std::size_t c = 0;
  for (auto& [id, slot] : colour_of) slot = c++;
  std::set<Modality> modalities(emb.modalities.begin(), emb.modalities.end());

  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  for (std::size_t i = 0; i < proj.rows; ++i) {
    const double x = proj(i, 0), y = proj.cols > 1 ? proj(i, 1) : 0.0;
    if (i == 0 || x < xmin) xmin = x;
    if (i == 0 || x > xmax) xmax = x;
    if (i == 0 || y < ymin) ymin = y;
    if (i == 0 || y > ymax) ymax = y;
  }
  const double xs = xmax > xmin ? xmax - xmin : 1.0, ys = ymax > ymin ? ymax - ymin : 1.0;
  const int pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;

  cv::Mat img(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::rectangle(img, {kLeft, kTop}, {kLeft + pw, kTop + ph}, cv::Scalar(60, 60, 60), 1);
  text(img, "PC1", {kLeft + pw / 2, kH - 15}, 0.5);
  text(img, "PC2", {8, kTop - 15}, 0.5);
  text(img, "o RGB   ^ IR", {kLeft + pw - 110, kTop - 15}, 0.5);
  for (std::size_t i = 0; i < proj.rows; ++i) {
    const double x = proj(i, 0), y = proj.cols > 1 ? proj(i, 1) : 0.0;
    const cv::Point p(kLeft + static_cast<int>(std::lround((x - xmin) / xs * pw)),
                      kTop + static_cast<int>(std::lround((1.0 - (y - ymin) / ys) * ph)));
    const auto colour = palette(colour_of.at(emb.identities[i]), colour_of.size());
    if (emb.modalities[i] == Modality::rgb) {
      cv::circle(img, p, 5, colour, cv::FILLED, cv::LINE_AA);
    } else {
      std::vector<cv::Point> tri{{p.x, p.y - 6}, {p.x - 6, p.y + 5}, {p.x + 6, p.y + 5}};
      cv::polylines(img, tri, true, colour, 2, cv::LINE_AA);
    }
  }
  save(img, file);
  return {proj.rows, colour_of.size(), modalities.size()};
}

}  // namespace hwdnet
