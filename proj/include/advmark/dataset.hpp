#pragma once

#include <cstdint>
#include <vector>

#include "advmark/image.hpp"
#include "advmark/rng.hpp"
#include "advmark/tensor.hpp"

namespace advmark {

// Procedurally generated face-like images with three exactly-known binary
// attributes: dominant hue band (warm vs cool), brightness band, and a
// synthetic "glasses" bar across the eye line. Attributes control large,
// spatially coherent image statistics so a small classifier separates them.
struct FaceParams {
  bool warm_hue = false;   // attribute 0
  bool bright = false;     // attribute 1
  bool glasses = false;    // attribute 2

  double cy = 0.5, cx = 0.5;      // face center, fractional
  double ry = 0.32, rx = 0.26;    // face radii, fractional
  double skin_jitter = 0.0;
  double bg_jitter = 0.0;
  double tone_scale = 1.0;        // brightness multiplier, derived from `bright`
  std::uint64_t noise_seed = 0;
};

ImageTensor render_face(const FaceParams& p, int h, int w);
FaceParams sample_face_params(Rng& rng);

struct ToyFace {
  FaceParams params;
  ImageTensor image;
};

struct ToyDataset {
  static constexpr int kAttributes = 3;

  std::vector<ToyFace> faces;
  int height = 0, width = 0;

  int size() const { return static_cast<int>(faces.size()); }
  int attribute(int face, int attr) const;
};

ToyDataset make_toy_dataset(int n, int h, int w, std::uint64_t seed);

Tensor faces_to_batch(const ToyDataset& data, const std::vector<int>& indices);
Tensor attrs_to_labels(const ToyDataset& data, const std::vector<int>& indices);

}  // namespace advmark
