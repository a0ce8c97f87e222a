#include "attrib/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "attrib/error.hpp"

namespace attrib {

namespace {

// OpenCV stores colour pixels as BGR(A).
Image8 from_mat(const cv::Mat& raw) {
  const int n = raw.channels();
  Image8 out(raw.cols, raw.rows);
  for (int y = 0; y < raw.rows; ++y) {
    const std::uint8_t* row = raw.ptr<std::uint8_t>(y);
    for (int x = 0; x < raw.cols; ++x) {
      const std::uint8_t* px = row + x * n;
      if (n == 1) {
        out[0](y, x) = out[1](y, x) = out[2](y, x) = px[0];
      } else {
        out[0](y, x) = px[2];
        out[1](y, x) = px[1];
        out[2](y, x) = px[0];
      }
    }
  }
  return out;
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingImageFile, path.string());
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error(ErrorCode::Io, "cannot decode image " + path.string());
  if (raw.depth() != CV_8U) throw Error(ErrorCode::Io, "only 8-bit images are supported: " + path.string());
  if (raw.channels() != 1 && raw.channels() != 3 && raw.channels() != 4)
    throw Error(ErrorCode::Io, "unsupported channel count in " + path.string());
  return from_mat(raw);
}

std::pair<int, int> read_image_size(const std::filesystem::path& path) {
  const Image8 img = read_image(path);
  return {img.width(), img.height()};
}

void write_image(const std::filesystem::path& path, const Image8& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < bgr.rows; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) row[x] = cv::Vec3b(image[2](y, x), image[1](y, x), image[0](y, x));
  }
  if (!cv::imwrite(path.string(), bgr)) throw Error(ErrorCode::Io, "cannot write image " + path.string());
}

}  // namespace attrib
