#include "advmark/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace advmark {

void validate_image(const ImageTensor& img) {
  if (img.height <= 0 || img.width <= 0)
    throw std::invalid_argument("image: non-positive dimensions");
  if (img.height % 8 != 0 || img.width % 8 != 0)
    throw std::invalid_argument("image: height and width must be multiples of 8, got " +
                                std::to_string(img.height) + "x" + std::to_string(img.width));
  if (img.size() != 3 * img.pixel_count())
    throw std::invalid_argument("image: buffer size does not match 3*H*W");
  for (double v : img.data) {
    if (!std::isfinite(v) || v < -1.0 || v > 1.0)
      throw std::invalid_argument("image: entry outside [-1,1] or non-finite");
  }
}

bool image_is_valid(const ImageTensor& img) {
  try {
    validate_image(img);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

void clamp_image(ImageTensor& img) {
  for (double& v : img.data) v = std::clamp(v, -1.0, 1.0);
}

std::vector<std::uint8_t> to_8bit(const ImageTensor& img) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(img.pixel_count()) * 3);
  const std::int64_t hw = img.pixel_count();
  for (std::int64_t i = 0; i < hw; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = img.data[static_cast<std::size_t>(c * hw + i)];
      const double scaled = (std::clamp(v, -1.0, 1.0) + 1.0) * 0.5 * 255.0;
      out[static_cast<std::size_t>(i * 3 + c)] =
          static_cast<std::uint8_t>(std::lround(scaled));
    }
  }
  return out;
}

ImageTensor from_8bit(const std::uint8_t* rgb, int height, int width) {
  ImageTensor img(height, width);
  const std::int64_t hw = img.pixel_count();
  for (std::int64_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c)
      img.data[static_cast<std::size_t>(c * hw + i)] =
          static_cast<double>(rgb[i * 3 + c]) / 255.0 * 2.0 - 1.0;
  return img;
}

Tensor image_to_batch(const ImageTensor& img) {
  Tensor t({1, 3, img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), t.data.begin());
  return t;
}

void set_batch_image(Tensor& batch, int n, const ImageTensor& img) {
  const std::int64_t per = 3LL * img.height * img.width;
  std::copy(img.data.begin(), img.data.end(), batch.data.begin() + n * per);
}

ImageTensor batch_image(const Tensor& batch, int n) {
  ImageTensor img(batch.dim(2), batch.dim(3));
  const std::int64_t per = img.size();
  std::copy(batch.data.begin() + n * per, batch.data.begin() + (n + 1) * per, img.data.begin());
  return img;
}

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

double mean_squared_error(const ImageTensor& a, const ImageTensor& b) {
  if (a.size() != b.size() || a.size() == 0)
    throw std::invalid_argument("mean_squared_error: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

}  // namespace advmark
