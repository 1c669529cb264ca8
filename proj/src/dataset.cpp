#include "advmark/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advmark {
namespace {

struct Rgb {
  double r, g, b;
};

void paint(ImageTensor& img01, int y, int x, const Rgb& c) {
  img01.at(0, y, x) = c.r;
  img01.at(1, y, x) = c.g;
  img01.at(2, y, x) = c.b;
}

}  // namespace

FaceParams sample_face_params(Rng& rng) {
  FaceParams p;
  p.warm_hue = rng.bernoulli();
  p.bright = rng.bernoulli();
  p.glasses = rng.bernoulli();
  p.cy = 0.5 + rng.uniform(-0.04, 0.04);
  p.cx = 0.5 + rng.uniform(-0.04, 0.04);
  p.ry = 0.32 + rng.uniform(-0.04, 0.04);
  p.rx = 0.26 + rng.uniform(-0.03, 0.03);
  p.skin_jitter = rng.uniform(-0.05, 0.05);
  p.bg_jitter = rng.uniform(-0.05, 0.05);
  p.tone_scale = p.bright ? rng.uniform(0.92, 1.05) : rng.uniform(0.52, 0.64);
  p.noise_seed = rng.next_u64();
  return p;
}

ImageTensor render_face(const FaceParams& p, int h, int w) {
  if (h < 16 || w < 16 || h % 8 != 0 || w % 8 != 0)
    throw std::invalid_argument("face size must be a multiple of 8, at least 16");

  // Work in [0,1], scale for the brightness band, then map to [-1,1].
  ImageTensor img(h, w);
  const Rgb skin = p.warm_hue ? Rgb{0.78 + p.skin_jitter, 0.48, 0.24}
                              : Rgb{0.24, 0.48, 0.78 + p.skin_jitter};
  const Rgb bg = p.warm_hue ? Rgb{0.58 + p.bg_jitter, 0.40, 0.28}
                            : Rgb{0.28, 0.40, 0.58 + p.bg_jitter};
  const Rgb eye{0.10, 0.10, 0.12};
  const Rgb mouth = p.warm_hue ? Rgb{0.55, 0.18, 0.20} : Rgb{0.20, 0.18, 0.55};
  const Rgb frame{0.07, 0.07, 0.07};

  const double cy = p.cy * h, cx = p.cx * w;
  const double ry = p.ry * h, rx = p.rx * w;
  const double eye_y = cy - 0.32 * ry;
  const double eye_dx = 0.45 * rx;
  const double eye_r = std::max(1.5, 0.14 * std::min(ry, rx));
  const double mouth_y = cy + 0.45 * ry;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Background with a gentle vertical ramp.
      const double ramp = 0.08 * (static_cast<double>(y) / h - 0.5);
      Rgb c{bg.r + ramp, bg.g + ramp, bg.b + ramp};

      const double fy = (y - cy) / ry, fx = (x - cx) / rx;
      if (fy * fy + fx * fx <= 1.0) {
        const double shade = 1.0 - 0.12 * (fy * fy + fx * fx);
        c = {skin.r * shade, skin.g * shade, skin.b * shade};

        for (int side = -1; side <= 1; side += 2) {
          const double dy = y - eye_y, dx = x - (cx + side * eye_dx);
          if (dy * dy + dx * dx <= eye_r * eye_r) c = eye;
        }
        if (std::abs(y - mouth_y) <= 0.10 * ry && std::abs(x - cx) <= 0.45 * rx) c = mouth;
      }

      if (p.glasses) {
        // Dark bar with lens rims across the eye line, inside the face span.
        const bool in_bar = std::abs(y - eye_y) <= std::max(2.0, 0.10 * ry) &&
                            std::abs(x - cx) <= 0.85 * rx;
        for (int side = -1; side <= 1; side += 2) {
          const double dy = y - eye_y, dx = x - (cx + side * eye_dx);
          const double rim = eye_r + 2.0;
          const double d2 = dy * dy + dx * dx;
          if (d2 <= rim * rim && d2 >= (rim - 1.8) * (rim - 1.8)) c = frame;
        }
        if (in_bar && std::abs(y - eye_y) <= 1.2) c = frame;
      }
      paint(img, y, x, c);
    }
  }

  Rng noise(p.noise_seed);
  for (double& v : img.data) {
    v = v * p.tone_scale + noise.uniform(-0.015, 0.015);
    v = std::clamp(v, 0.0, 1.0) * 2.0 - 1.0;
  }
  return img;
}

int ToyDataset::attribute(int face, int attr) const {
  const FaceParams& p = faces[static_cast<std::size_t>(face)].params;
  switch (attr) {
    case 0: return p.warm_hue ? 1 : 0;
    case 1: return p.bright ? 1 : 0;
    case 2: return p.glasses ? 1 : 0;
    default: throw std::invalid_argument("attribute index out of range");
  }
}

ToyDataset make_toy_dataset(int n, int h, int w, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("dataset size must be positive");
  ToyDataset data;
  data.height = h;
  data.width = w;
  data.faces.reserve(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    ToyFace face;
    face.params = sample_face_params(rng);
    face.image = render_face(face.params, h, w);
    data.faces.push_back(std::move(face));
  }
  return data;
}

Tensor faces_to_batch(const ToyDataset& data, const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("empty batch");
  Tensor batch({static_cast<int>(indices.size()), 3, data.height, data.width});
  for (std::size_t i = 0; i < indices.size(); ++i)
    set_batch_image(batch, static_cast<int>(i), data.faces[static_cast<std::size_t>(indices[i])].image);
  return batch;
}

Tensor attrs_to_labels(const ToyDataset& data, const std::vector<int>& indices) {
  Tensor labels({static_cast<int>(indices.size()), ToyDataset::kAttributes});
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (int a = 0; a < ToyDataset::kAttributes; ++a)
      labels.data[i * ToyDataset::kAttributes + a] = data.attribute(indices[i], a);
  return labels;
}

}  // namespace advmark
