#include "hwdnet/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hwdnet/error.hpp"

namespace fs = std::filesystem;

namespace hwdnet {
namespace {

enum class RoofMarker { none, circle, square, cross };

struct Appearance {
  cv::Scalar body;      // BGR
  cv::Scalar roof;
  cv::Scalar stripe;
  cv::Scalar marker;
  double length = 1.0;  // relative to the canvas
  double aspect = 0.45;
  double cabin_front = 0.2;
  double cabin_length = 0.35;
  int stripes = 0;
  bool transverse_stripes = false;
  RoofMarker roof_marker = RoofMarker::none;
  bool cargo_bed = false;
};

struct Pose {
  int orientation = 0;
  double heading_deg = 0.0;
  double scale = 1.0;
  cv::Point2d offset;
};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

cv::Scalar hsv_to_bgr(double h, double s, double v) {
  cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(h / 2.0, s * 255.0, v * 255.0));
  cv::Mat bgr;
  cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
  auto px = bgr.at<cv::Vec3b>(0, 0);
  return {double(px[0]), double(px[1]), double(px[2])};
}

Appearance draw_appearance(Rng& rng) {
  Appearance a;
  const double hue = uniform(rng, 0.0, 360.0);
  a.body = hsv_to_bgr(hue, uniform(rng, 0.45, 1.0), uniform(rng, 0.35, 1.0));
  const double roof_shift = uniform(rng, -0.3, 0.3);
  a.roof = a.body * (1.0 + roof_shift);
  a.stripe = uniform_int(rng, 0, 1) ? cv::Scalar(245, 245, 245) : cv::Scalar(20, 20, 20);
  a.marker = uniform_int(rng, 0, 1) ? cv::Scalar(250, 250, 250) : cv::Scalar(10, 10, 10);
  a.length = uniform(rng, 0.78, 1.08);
  a.aspect = uniform(rng, 0.36, 0.56);
  a.cabin_front = uniform(rng, 0.08, 0.4);
  a.cabin_length = uniform(rng, 0.22, 0.45);
  a.stripes = uniform_int(rng, 0, 2);
  a.transverse_stripes = uniform_int(rng, 0, 1) == 1;
  a.roof_marker = static_cast<RoofMarker>(uniform_int(rng, 0, 3));
  a.cargo_bed = uniform_int(rng, 0, 2) == 0;
  return a;
}

// Maps vehicle-local coordinates (u to the right, v towards the front) onto
// the image, where heading 0 points up and headings grow clockwise.
struct Frame {
  cv::Point2d centre;
  cv::Point2d forward;
  cv::Point2d right;

  cv::Point operator()(double u, double v) const {
    const cv::Point2d p = centre + right * u + forward * v;
    return {static_cast<int>(std::lround(p.x * 16.0)), static_cast<int>(std::lround(p.y * 16.0))};
  }
};

constexpr int kShift = 4;  // sub-pixel bits for the 16x fixed point coordinates above

void fill_quad(cv::Mat& img, const Frame& f, double u0, double v0, double u1, double v1,
               const cv::Scalar& colour) {
  std::array<cv::Point, 4> pts{f(u0, v0), f(u1, v0), f(u1, v1), f(u0, v1)};
  cv::fillConvexPoly(img, pts.data(), 4, colour, cv::LINE_AA, kShift);
}

void render_background(cv::Mat& img, Rng& rng) {
  const double base = uniform(rng, 70.0, 170.0);
  const cv::Scalar tint(base + uniform(rng, -25, 25), base + uniform(rng, -25, 25),
                        base + uniform(rng, -25, 25));
  img.setTo(tint);
  // road marking style clutter
  const int lines = uniform_int(rng, 0, 2);
  for (int i = 0; i < lines; ++i) {
    const double shade = uniform(rng, 0.0, 1.0) < 0.5 ? base * 0.6 : std::min(255.0, base * 1.5);
    cv::Point p0(uniform_int(rng, 0, img.cols - 1), 0);
    cv::Point p1(uniform_int(rng, 0, img.cols - 1), img.rows - 1);
    if (uniform_int(rng, 0, 1)) {
      p0 = {0, uniform_int(rng, 0, img.rows - 1)};
      p1 = {img.cols - 1, uniform_int(rng, 0, img.rows - 1)};
    }
    cv::line(img, p0, p1, cv::Scalar::all(shade), uniform_int(rng, 1, 3), cv::LINE_AA);
  }
  std::normal_distribution<double> noise(0.0, 6.0);
  for (int y = 0; y < img.rows; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      const double n = noise(rng);
      for (int c = 0; c < 3; ++c) row[x][c] = cv::saturate_cast<uchar>(row[x][c] + n);
    }
  }
}

void render_vehicle(cv::Mat& img, const Appearance& a, const Pose& pose) {
  const double canvas = std::min(img.rows, img.cols);
  const double length = 0.8 * canvas * a.length * pose.scale;
  const double width = length * a.aspect;
  const double theta = pose.heading_deg * std::numbers::pi / 180.0;
  Frame f;
  f.centre = cv::Point2d(img.cols / 2.0, img.rows / 2.0) + pose.offset;
  f.forward = {std::sin(theta), -std::cos(theta)};
  f.right = {std::cos(theta), std::sin(theta)};

  const double hl = length / 2.0;
  const double hw = width / 2.0;
  const double chamfer = 0.18 * width;

  // drop shadow gives the glyph a consistent silhouette against any background
  {
    Frame s = f;
    s.centre += cv::Point2d(2.0, 2.0);
    fill_quad(img, s, -hw, -hl, hw, hl, cv::Scalar(25, 25, 25));
  }
  // body with chamfered front corners
  std::array<cv::Point, 6> body{f(-hw, -hl), f(hw, -hl), f(hw, hl - chamfer), f(hw - chamfer, hl),
                                f(-hw + chamfer, hl), f(-hw, hl - chamfer)};
  cv::fillConvexPoly(img, body.data(), 6, a.body, cv::LINE_AA, kShift);

  // stripes
  if (a.stripes > 0) {
    const double t = 0.09 * width;
    for (int i = 0; i < a.stripes; ++i) {
      const double pos = (i + 1.0) / (a.stripes + 1.0);
      if (a.transverse_stripes) {
        const double v = -hl + pos * length * 0.5;
        fill_quad(img, f, -hw, v - t, hw, v + t, a.stripe);
      } else {
        const double u = -hw + pos * width;
        fill_quad(img, f, u - t, -hl, u + t, hl - chamfer, a.stripe);
      }
    }
  }

  // cabin: windshield, roof, rear window
  const double cabin_top = hl - a.cabin_front * length;
  const double cabin_bottom = cabin_top - a.cabin_length * length;
  const double glass = 0.1 * length;
  fill_quad(img, f, -0.42 * width, cabin_top - glass, 0.42 * width, cabin_top, cv::Scalar(35, 35, 40));
  fill_quad(img, f, -0.4 * width, cabin_bottom + 0.05 * length, 0.4 * width, cabin_top - glass, a.roof);
  fill_quad(img, f, -0.4 * width, cabin_bottom, 0.4 * width, cabin_bottom + 0.05 * length,
            cv::Scalar(35, 35, 40));

  // rear section
  const double rear_centre = (cabin_bottom - hl) / 2.0;
  if (a.cargo_bed) {
    std::array<cv::Point, 4> bed{f(-0.38 * width, -hl + 0.04 * length), f(0.38 * width, -hl + 0.04 * length),
                                 f(0.38 * width, cabin_bottom - 0.03 * length),
                                 f(-0.38 * width, cabin_bottom - 0.03 * length)};
    const cv::Point* pts = bed.data();
    const int npts = 4;
    cv::polylines(img, &pts, &npts, 1, true, cv::Scalar(30, 30, 30), 2, cv::LINE_AA, kShift);
  }
  const double m = 0.22 * width;
  switch (a.roof_marker) {
    case RoofMarker::none: break;
    case RoofMarker::circle:
      cv::circle(img, f(0.0, rear_centre), static_cast<int>(std::lround(m * 16.0)), a.marker,
                 cv::FILLED, cv::LINE_AA, kShift);
      break;
    case RoofMarker::square:
      fill_quad(img, f, -m, rear_centre - m, m, rear_centre + m, a.marker);
      break;
    case RoofMarker::cross:
      fill_quad(img, f, -m, rear_centre - 0.3 * m, m, rear_centre + 0.3 * m, a.marker);
      fill_quad(img, f, -0.3 * m, rear_centre - m, 0.3 * m, rear_centre + m, a.marker);
      break;
  }
}

Pose draw_pose(Rng& rng, int orientation) {
  Pose p;
  p.orientation = orientation;
  p.heading_deg = orientation * 45.0 + uniform(rng, -10.0, 10.0);
  p.scale = uniform(rng, 0.85, 1.12);
  p.offset = {uniform(rng, -5.0, 5.0), uniform(rng, -6.0, 6.0)};
  return p;
}

cv::Mat render_rgb(const Appearance& a, const Pose& pose, int h, int w, Rng& rng) {
  cv::Mat img(h, w, CV_8UC3);
  render_background(img, rng);
  render_vehicle(img, a, pose);
  return img;
}

// Luminance only, fixed monotone response curve, independent sensor noise.
cv::Mat render_ir(const Appearance& a, const Pose& pose, int h, int w, Rng& rng) {
  cv::Mat colour = render_rgb(a, pose, h, w, rng);
  cv::Mat gray;
  cv::cvtColor(colour, gray, cv::COLOR_BGR2GRAY);
  std::array<uchar, 256> lut{};
  for (int i = 0; i < 256; ++i) {
    lut[i] = cv::saturate_cast<uchar>(255.0 * std::pow(i / 255.0, 0.65));
  }
  std::normal_distribution<double> noise(0.0, 7.0);
  for (int y = 0; y < gray.rows; ++y) {
    auto* row = gray.ptr<uchar>(y);
    for (int x = 0; x < gray.cols; ++x) row[x] = cv::saturate_cast<uchar>(lut[row[x]] + noise(rng));
  }
  return gray;
}

Rng stream(std::uint64_t seed, std::uint64_t identity, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(identity), static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

}  // namespace

DatasetIndex generate_synthetic_dataset(const SyntheticSpec& spec, const fs::path& out) {
  if (spec.num_ids < 2) throw ValidationError("synthetic dataset needs num_ids >= 2");
  if (spec.samples_per_id_per_modality < 1) throw ValidationError("samples per identity must be >= 1");
  if (spec.test_ids < 0) throw ValidationError("test_ids must be >= 0");
  if (spec.height < 16 || spec.width < 16) throw ValidationError("image size must be at least 16x16");

  std::error_code ec;
  fs::create_directories(out / "rgb", ec);
  if (!ec) fs::create_directories(out / "ir", ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

  const int total = spec.num_ids + spec.test_ids;
  const int spm = spec.samples_per_id_per_modality;
  const std::vector<int> png_params{cv::IMWRITE_PNG_COMPRESSION, 6};
  std::vector<SampleRecord> records;
  records.reserve(static_cast<std::size_t>(total) * spm * 2);

  for (int id = 0; id < total; ++id) {
    Rng appearance_rng = stream(spec.seed, id, 0);
    Rng sample_rng = stream(spec.seed, id, 1);
    const Appearance look = draw_appearance(appearance_rng);
    const bool test = id >= spec.num_ids;

    // Orientations are dealt round-robin over both modalities then shuffled,
    // so every heading appears once 2 * spm reaches 8.
    std::vector<int> headings(static_cast<std::size_t>(2 * spm));
    for (std::size_t i = 0; i < headings.size(); ++i) headings[i] = static_cast<int>(i % kNumOrientations);
    std::shuffle(headings.begin(), headings.end(), sample_rng);

    for (Modality m : {Modality::rgb, Modality::ir}) {
      for (int n = 0; n < spm; ++n) {
        const int heading = headings[static_cast<std::size_t>(m == Modality::rgb ? n : spm + n)];
        const Pose pose = draw_pose(sample_rng, heading);
        const int camera = uniform_int(sample_rng, 1, 3);
        cv::Mat img = m == Modality::rgb ? render_rgb(look, pose, spec.height, spec.width, sample_rng)
                                         : render_ir(look, pose, spec.height, spec.width, sample_rng);
        SampleRecord r;
        r.identity = id;
        r.modality = m;
        r.orientation = heading;
        r.camera = camera;
        r.image_num = n;
        r.split = !test ? Split::train : (m == Modality::ir ? Split::query : Split::gallery);
        r.path = std::string(to_string(m)) + "/" + std::to_string(camera) + "_" + std::to_string(id) +
                 "_" + std::to_string(n) + ".png";
        const fs::path file = out / r.path;
        bool ok = false;
        try {
          ok = cv::imwrite(file.string(), img, png_params);
        } catch (const cv::Exception& e) {
          throw IoError("cannot write " + file.string() + ": " + e.what());
        }
        if (!ok) throw IoError("cannot write " + file.string());
        records.push_back(std::move(r));
      }
    }
  }
  write_labels_tsv(out / "labels.tsv", records);
  return DatasetIndex(out, std::move(records));
}

}  // namespace hwdnet
