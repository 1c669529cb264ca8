#include "advmark/imageio.hpp"

#include <opencv2/imgcodecs.hpp>

#include <stdexcept>
#include <vector>

#include "advmark/errors.hpp"

namespace advmark {
namespace {

cv::Mat to_bgr_mat(const ImageTensor& img) {
  const auto rgb = to_8bit(img);  // HWC, RGB
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * img.width + x) * 3;
      row[x] = cv::Vec3b(rgb[base + 2], rgb[base + 1], rgb[base + 0]);
    }
  }
  return mat;
}

ImageTensor from_bgr_mat(const cv::Mat& mat) {
  if (mat.empty()) throw FormatError("image decode produced no pixels");
  if (mat.type() != CV_8UC3) throw FormatError("expected an 8-bit 3-channel image");
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(mat.rows) * mat.cols * 3);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * mat.cols + x) * 3;
      rgb[base + 0] = row[x][2];
      rgb[base + 1] = row[x][1];
      rgb[base + 2] = row[x][0];
    }
  }
  return from_8bit(rgb.data(), mat.rows, mat.cols);
}

}  // namespace

void write_png(const ImageTensor& img, const std::string& path) {
  validate_image(img);
  if (!cv::imwrite(path, to_bgr_mat(img)))
    throw FormatError("cannot write image file " + path);
}

ImageTensor read_image(const std::string& path) {
  cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
  if (mat.empty()) throw FormatError("cannot read image file " + path);
  ImageTensor img = from_bgr_mat(mat);
  if (img.height % 8 != 0 || img.width % 8 != 0)
    throw FormatError("image dimensions must be multiples of 8: " + path);
  return img;
}

ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality) {
  if (quality < 1 || quality > 100)
    throw std::invalid_argument("jpeg quality must lie in [1, 100]");
  validate_image(img);
  std::vector<uchar> buf;
  if (!cv::imencode(".jpg", to_bgr_mat(img), buf, {cv::IMWRITE_JPEG_QUALITY, quality}))
    throw FormatError("jpeg encode failed");
  cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
  return from_bgr_mat(decoded);
}

}  // namespace advmark
