#pragma once

#include <cstdint>
#include <vector>

#include "advmark/tensor.hpp"

namespace advmark {

// H x W x 3 image in canonical range [-1, 1], stored channel-major (CHW).
// The canonical range is symmetric so that tanh-bounded generators and
// convex perturbation-strength mixing are range-safe by construction.
// Height and width must be multiples of 8 (8x8 block transforms).
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // size 3*height*width, CHW

  ImageTensor() = default;
  ImageTensor(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(3 * h * w), 0.0) {}

  double& at(int c, int y, int x) {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  double at(int c, int y, int x) const {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }

  std::int64_t pixel_count() const { return static_cast<std::int64_t>(height) * width; }
  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
};

// Throws std::invalid_argument when the invariants do not hold:
// finite entries in [-1,1], positive dims, H and W multiples of 8.
void validate_image(const ImageTensor& img);
bool image_is_valid(const ImageTensor& img);

void clamp_image(ImageTensor& img);

// 8-bit conversions: the canonical range maps linearly onto [0, 255].
// from_8bit(to_8bit(x)) is the identity on images that came from 8-bit data.
std::vector<std::uint8_t> to_8bit(const ImageTensor& img);  // HWC, RGB order
ImageTensor from_8bit(const std::uint8_t* rgb, int height, int width);

// Bridge to batched NCHW tensors used by the networks.
Tensor image_to_batch(const ImageTensor& img);
void set_batch_image(Tensor& batch, int n, const ImageTensor& img);
ImageTensor batch_image(const Tensor& batch, int n);

double max_abs_diff(const ImageTensor& a, const ImageTensor& b);
double mean_squared_error(const ImageTensor& a, const ImageTensor& b);

}  // namespace advmark
