#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "attrib/corpus.hpp"
#include "attrib/error.hpp"

namespace attrib {

namespace {

constexpr float kEdgeStep = 0.25f;     // luma jump that counts as a frame edge
constexpr double kMinCoverage = 0.5;   // fraction of scanlines that must see the edge
constexpr double kMaxResidualPx = 2.0; // RMS scatter allowed around the fitted line

Plane<float> replicate_pad(const Plane<float>& p) {
  const Eigen::Index h = p.rows(), w = p.cols();
  Plane<float> out(h + 2, w + 2);
  out.block(1, 1, h, w) = p;
  out.block(0, 1, 1, w) = p.row(0);
  out.block(h + 1, 1, 1, w) = p.row(h - 1);
  out.col(0) = out.col(1);
  out.col(w + 1) = out.col(w);
  return out;
}

Plane<float> box_blur3(const Plane<float>& p) {
  const Eigen::Index h = p.rows(), w = p.cols();
  const Plane<float> q = replicate_pad(p);
  Plane<float> sum = Plane<float>::Zero(h, w);
  for (int dy = 0; dy < 3; ++dy)
    for (int dx = 0; dx < 3; ++dx) sum += q.block(dy, dx, h, w);
  return sum / 9.0f;
}

// Scans each line inwards from one border and fits a straight line through the
// first strong luma step. `profile(i, t)` returns the luma at scanline i, depth t.
template <typename Profile>
std::optional<double> fit_edge(Profile profile, int lines, int depth) {
  std::vector<double> pos, hit;
  for (int i = 0; i < lines; ++i) {
    for (int t = 0; t + 1 < depth; ++t) {
      if (std::abs(profile(i, t + 1) - profile(i, t)) >= kEdgeStep) {
        pos.push_back(i);
        hit.push_back(t + 0.5);
        break;
      }
    }
  }
  if (pos.size() < 3 || static_cast<double>(pos.size()) < kMinCoverage * lines) return std::nullopt;

  const Eigen::Index n = static_cast<Eigen::Index>(pos.size());
  Eigen::MatrixXd design(n, 2);
  design.col(0) = Eigen::Map<const Eigen::VectorXd>(pos.data(), n);
  design.col(1).setOnes();
  const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(hit.data(), n);
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(target);
  const double rms = std::sqrt((design * coef - target).squaredNorm() / static_cast<double>(n));
  if (rms > kMaxResidualPx) return std::nullopt;
  return std::atan(coef[0]) * 180.0 / std::numbers::pi;
}

}  // namespace

double glare_fraction(const Image8& image, double saturation_level) {
  if (image.empty()) return 0.0;
  const int level = static_cast<int>(std::ceil(saturation_level * 255.0));
  const auto sat = (image[0].cast<int>() >= level) && (image[1].cast<int>() >= level) && (image[2].cast<int>() >= level);
  return static_cast<double>(sat.count()) / static_cast<double>(image[0].size());
}

double noise_score(const Image8& image) {
  if (image.empty()) return 0.0;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    const Plane<float> p = image[c].cast<float>() / 255.0f;
    total += (p - box_blur3(p)).abs().cast<double>().sum();
  }
  return total / (3.0 * static_cast<double>(image[0].size()));
}

FrameEdges detect_frame_edges(const Image8& image) {
  const Plane<float> l = luma(image);
  const int h = image.height(), w = image.width();
  const int dx = std::max(2, w / 4), dy = std::max(2, h / 4);
  FrameEdges edges;
  // Lines are parameterised as offset = a * position, so skew angles of opposite
  // edges are directly comparable (parallel edges give equal angles).
  edges.left_deg = fit_edge([&](int y, int t) { return l(y, t); }, h, dx);
  if (auto right = fit_edge([&](int y, int t) { return l(y, w - 1 - t); }, h, dx)) edges.right_deg = -*right;
  edges.top_deg = fit_edge([&](int x, int t) { return l(t, x); }, w, dy);
  if (auto bottom = fit_edge([&](int x, int t) { return l(h - 1 - t, x); }, w, dy)) edges.bottom_deg = -*bottom;
  return edges;
}

bool distortion_flag(const Image8& image, double max_skew_deg) {
  const FrameEdges e = detect_frame_edges(image);
  const auto skewed = [&](const std::optional<double>& a, const std::optional<double>& b) {
    return a && b && std::abs(*a - *b) > max_skew_deg;
  };
  return skewed(e.left_deg, e.right_deg) || skewed(e.top_deg, e.bottom_deg);
}

QualityReport quality_check(const ArtworkRecord& record, const Image8& image, const QcConfig& config) {
  if (image.width() != record.width_px || image.height() != record.height_px)
    throw Error(ErrorCode::DimensionMismatch,
                record.artwork_id + ": manifest says " + std::to_string(record.width_px) + "x" +
                    std::to_string(record.height_px) + ", image is " + std::to_string(image.width()) + "x" +
                    std::to_string(image.height()));
  QualityReport report;
  report.artwork_id = record.artwork_id;
  report.resolution_ok = record.px_per_mm >= config.min_px_per_mm && record.width_px >= kTileSize &&
                         record.height_px >= kTileSize;
  report.glare_fraction = glare_fraction(image, config.saturation_level);
  report.noise_score = noise_score(image);
  report.distortion_flag = distortion_flag(image, config.max_edge_skew_deg);
  report.passed = report.resolution_ok && report.glare_fraction <= config.glare_max &&
                  report.noise_score <= config.noise_max && !report.distortion_flag;
  return report;
}

}  // namespace attrib
