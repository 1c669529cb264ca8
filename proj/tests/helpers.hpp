#pragma once

#include <cmath>
#include <string>

#include "advmark/image.hpp"
#include "advmark/rng.hpp"
#include "advmark/tensor.hpp"

namespace advmark::testing {

inline ImageTensor random_image(int h, int w, Rng& rng, double amp = 1.0) {
  ImageTensor img(h, w);
  for (double& v : img.data) v = rng.uniform(-amp, amp);
  return img;
}

// Smooth low-frequency image: sums of a few sinusoids per channel. Useful
// where pixel-noise images would saturate clamps or quantizers.
inline ImageTensor smooth_image(int h, int w, Rng& rng, double amp = 0.6) {
  ImageTensor img(h, w);
  for (int c = 0; c < 3; ++c) {
    const double fy = rng.uniform(0.5, 3.0), fx = rng.uniform(0.5, 3.0);
    const double py = rng.uniform(0.0, 6.28), px = rng.uniform(0.0, 6.28);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(c, y, x) = amp * 0.5 *
                          (std::sin(fy * y / h * 6.28318530717958647692 + py) +
                           std::cos(fx * x / w * 6.28318530717958647692 + px));
  }
  return img;
}

inline Tensor random_tensor(const std::vector<int>& shape, Rng& rng, double amp = 1.0) {
  Tensor t(shape);
  for (double& v : t.data) v = rng.uniform(-amp, amp);
  return t;
}

inline double rel_err(double got, double want) {
  const double denom = std::max(std::abs(want), 1e-12);
  return std::abs(got - want) / denom;
}

inline std::string temp_path(const std::string& stem) {
  return std::string("/tmp/advmark_test_") + stem;
}

}  // namespace advmark::testing
