#include "advmark/spectral.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace advmark::spectral {
namespace {

// BT.601 luma weights; the rest of both matrices derives from these, so the
// forward/inverse pair is algebraically exact.
constexpr double kKr = 0.299;
constexpr double kKb = 0.114;
constexpr double kKg = 1.0 - kKr - kKb;
constexpr double kCbScale = 0.5 / (1.0 - kKb);
constexpr double kCrScale = 0.5 / (1.0 - kKr);

struct CosTable {
  double c[8][8];  // c[u][x] = cos((2x+1)u pi / 16)
  CosTable() {
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x)
        c[u][x] = std::cos((2.0 * x + 1.0) * u * M_PI / 16.0);
  }
};
const CosTable kCos;

inline double beta_uv(int u, int v) { return (u == 0 && v == 0) ? 0.5 : 1.0; }

void check_plane_dims(int h, int w) {
  if (h <= 0 || w <= 0 || h % 8 != 0 || w % 8 != 0)
    throw std::invalid_argument("block_dct: dimensions must be positive multiples of 8, got " +
                                std::to_string(h) + "x" + std::to_string(w));
}

// tmp = A * block, out = tmp * B^T with A, B из kCos-derived 8x8 matrices.
inline void mul8(const double a[8][8], const double b[8][8], double out[8][8]) {
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += a[i][k] * b[k][j];
      out[i][j] = acc;
    }
}

inline void load_block(const double* plane, int w, int by, int bx, double blk[8][8]) {
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) blk[y][x] = plane[(by * 8 + y) * w + (bx * 8 + x)];
}

inline void store_block(double* plane, int w, int by, int bx, const double blk[8][8]) {
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) plane[(by * 8 + y) * w + (bx * 8 + x)] = blk[y][x];
}

}  // namespace

ImageTensor rgb_to_ycbcr(const ImageTensor& img) {
  ImageTensor out(img.height, img.width);
  const std::int64_t hw = img.pixel_count();
  const double* r = img.data.data();
  const double* g = r + hw;
  const double* b = g + hw;
  double* y = out.data.data();
  double* cb = y + hw;
  double* cr = cb + hw;
  for (std::int64_t i = 0; i < hw; ++i) {
    const double yy = kKr * r[i] + kKg * g[i] + kKb * b[i];
    y[i] = yy;
    cb[i] = kCbScale * (b[i] - yy);
    cr[i] = kCrScale * (r[i] - yy);
  }
  return out;
}

ImageTensor ycbcr_to_rgb(const ImageTensor& ycc) {
  ImageTensor out(ycc.height, ycc.width);
  const std::int64_t hw = ycc.pixel_count();
  const double* y = ycc.data.data();
  const double* cb = y + hw;
  const double* cr = cb + hw;
  double* r = out.data.data();
  double* g = r + hw;
  double* b = g + hw;
  for (std::int64_t i = 0; i < hw; ++i) {
    const double rr = y[i] + cr[i] / kCrScale;
    const double bb = y[i] + cb[i] / kCbScale;
    r[i] = rr;
    b[i] = bb;
    g[i] = (y[i] - kKr * rr - kKb * bb) / kKg;
  }
  return out;
}

void block_dct(const double* plane, int h, int w, double* coeffs) {
  check_plane_dims(h, w);
  double blk[8][8], tmp[8][8], out[8][8];
  // out = C * blk * C^T, then scale by (1/4) beta_uv
  double ct[8][8];
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) ct[i][j] = kCos.c[j][i];
  for (int by = 0; by < h / 8; ++by)
    for (int bx = 0; bx < w / 8; ++bx) {
      load_block(plane, w, by, bx, blk);
      mul8(kCos.c, blk, tmp);
      mul8(tmp, ct, out);
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) out[u][v] *= 0.25 * beta_uv(u, v);
      store_block(coeffs, w, by, bx, out);
    }
}

void block_idct(const double* coeffs, int h, int w, double* plane) {
  check_plane_dims(h, w);
  // invert: F0 = 4 F / beta; f = C^T D^-1 F0 D^-1 C with D = diag(8,4,...,4)
  double dinv[8];
  dinv[0] = 1.0 / 8.0;
  for (int i = 1; i < 8; ++i) dinv[i] = 1.0 / 4.0;
  double a[8][8];  // a = D^-1 C  (rows scaled)
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) a[i][j] = dinv[i] * kCos.c[i][j];
  double at[8][8];
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) at[i][j] = a[j][i];
  double blk[8][8], tmp[8][8], out[8][8];
  for (int by = 0; by < h / 8; ++by)
    for (int bx = 0; bx < w / 8; ++bx) {
      load_block(coeffs, w, by, bx, blk);
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) blk[u][v] *= 4.0 / beta_uv(u, v);
      mul8(at, blk, tmp);  // C^T D^-1 * F0
      mul8(tmp, a, out);   // ... * D^-1 C
      store_block(plane, w, by, bx, out);
    }
}

void block_dct_adjoint(const double* grad_coeffs, int h, int w, double* grad_plane) {
  check_plane_dims(h, w);
  // forward: F = S ⊙ (C f C^T); adjoint: g -> C^T (S ⊙ g) C
  double ct[8][8];
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) ct[i][j] = kCos.c[j][i];
  double blk[8][8], tmp[8][8], out[8][8];
  for (int by = 0; by < h / 8; ++by)
    for (int bx = 0; bx < w / 8; ++bx) {
      load_block(grad_coeffs, w, by, bx, blk);
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) blk[u][v] *= 0.25 * beta_uv(u, v);
      mul8(ct, blk, tmp);
      mul8(tmp, kCos.c, out);
      store_block(grad_plane, w, by, bx, out);
    }
}

void block_idct_adjoint(const double* grad_plane, int h, int w, double* grad_coeffs) {
  check_plane_dims(h, w);
  // forward: f = C^T D^-1 (4F/beta) D^-1 C; adjoint: h -> (4/beta) ⊙ (D^-1 C h C^T D^-1)
  double dinv[8];
  dinv[0] = 1.0 / 8.0;
  for (int i = 1; i < 8; ++i) dinv[i] = 1.0 / 4.0;
  double a[8][8];
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) a[i][j] = dinv[i] * kCos.c[i][j];
  double at[8][8];
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) at[i][j] = a[j][i];
  double blk[8][8], tmp[8][8], out[8][8];
  for (int by = 0; by < h / 8; ++by)
    for (int bx = 0; bx < w / 8; ++bx) {
      load_block(grad_plane, w, by, bx, blk);
      mul8(a, blk, tmp);
      mul8(tmp, at, out);
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) out[u][v] *= 4.0 / beta_uv(u, v);
      store_block(grad_coeffs, w, by, bx, out);
    }
}

QuantTable sample_quant_table(Rng& rng) {
  QuantTable t;
  for (auto& v : t.values) v = static_cast<int>(rng.uniform_int(1, 100));
  return t;
}

ImageTensor diffuse(const ImageTensor& img, Rng& rng, const SDToggles& toggles) {
  const QuantTable table = sample_quant_table(rng);
  return diffuse_traced(img, table, toggles, nullptr);
}

ImageTensor diffuse_traced(const ImageTensor& img, const QuantTable& table,
                           const SDToggles& toggles, DiffuseTrace* trace) {
  const int h = img.height, w = img.width;
  check_plane_dims(h, w);
  const std::int64_t hw = img.pixel_count();

  if (trace) {
    trace->height = h;
    trace->width = w;
    trace->factor.assign(static_cast<std::size_t>(3 * hw), 1.0);
    trace->pass.assign(static_cast<std::size_t>(3 * hw), 1);
  }

  ImageTensor ycc = rgb_to_ycbcr(img);
  std::vector<double> coeffs(static_cast<std::size_t>(hw));
  std::vector<double> plane(static_cast<std::size_t>(hw));
  ImageTensor shaped(h, w);

  for (int c = 0; c < 3; ++c) {
    const double* src = ycc.data.data() + c * hw;
    block_dct(src, h, w, coeffs.data());
    for (std::int64_t i = 0; i < hw; ++i) {
      const int u = static_cast<int>((i / w) % 8);
      const int v = static_cast<int>(i % 8);
      const double q = toggles.enable_quantization ? static_cast<double>(table.at(u, v)) : 1.0;
      const double scaled = coeffs[static_cast<std::size_t>(i)] / q;
      double result = scaled;
      double deriv = 1.0;
      if (toggles.enable_cubic && std::fabs(scaled) < 1.0) {
        result = scaled * scaled * scaled;
        deriv = 3.0 * scaled * scaled;
      }
      coeffs[static_cast<std::size_t>(i)] = result * q;
      if (trace) trace->factor[static_cast<std::size_t>(c * hw + i)] = deriv;
    }
    block_idct(coeffs.data(), h, w, plane.data());
    std::copy(plane.begin(), plane.end(), shaped.data.begin() + c * hw);
  }

  ImageTensor out = ycbcr_to_rgb(shaped);
  for (std::int64_t i = 0; i < 3 * hw; ++i) {
    double& v = out.data[static_cast<std::size_t>(i)];
    if (v < -1.0 || v > 1.0) {
      if (trace) trace->pass[static_cast<std::size_t>(i)] = 0;
      v = v < -1.0 ? -1.0 : 1.0;
    }
  }
  return out;
}

void diffuse_backward(const DiffuseTrace& trace, const double* grad_out, double* grad_in) {
  const int h = trace.height, w = trace.width;
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;

  // clamp mask
  std::vector<double> g(static_cast<std::size_t>(3 * hw));
  for (std::int64_t i = 0; i < 3 * hw; ++i)
    g[static_cast<std::size_t>(i)] = trace.pass[static_cast<std::size_t>(i)] ? grad_out[i] : 0.0;

  // adjoint of ycbcr_to_rgb: for each pixel, grad_ycc = M_inv^T grad_rgb.
  // Reuse rgb_to_ycbcr on a transposed-matrix trick is not possible since
  // the maps are not orthogonal; apply the transpose explicitly.
  const double m_inv[3][3] = {
      {1.0, 0.0, (1.0 - kKr) / 0.5},
      {1.0, -kKb * (1.0 - kKb) / (0.5 * kKg), -kKr * (1.0 - kKr) / (0.5 * kKg)},
      {1.0, (1.0 - kKb) / 0.5, 0.0}};
  std::vector<double> gy(static_cast<std::size_t>(3 * hw));
  for (std::int64_t i = 0; i < hw; ++i) {
    const double gr = g[static_cast<std::size_t>(i)];
    const double gg = g[static_cast<std::size_t>(hw + i)];
    const double gb = g[static_cast<std::size_t>(2 * hw + i)];
    for (int row = 0; row < 3; ++row)
      gy[static_cast<std::size_t>(row * hw + i)] =
          m_inv[0][row] * gr + m_inv[1][row] * gg + m_inv[2][row] * gb;
  }

  // per channel: idct adjoint -> factor -> dct adjoint
  std::vector<double> gc(static_cast<std::size_t>(hw));
  std::vector<double> gp(static_cast<std::size_t>(hw));
  std::vector<double> gfull(static_cast<std::size_t>(3 * hw));
  for (int c = 0; c < 3; ++c) {
    block_idct_adjoint(gy.data() + c * hw, h, w, gc.data());
    for (std::int64_t i = 0; i < hw; ++i)
      gc[static_cast<std::size_t>(i)] *= trace.factor[static_cast<std::size_t>(c * hw + i)];
    block_dct_adjoint(gc.data(), h, w, gp.data());
    std::copy(gp.begin(), gp.end(), gfull.begin() + c * hw);
  }

  // adjoint of rgb_to_ycbcr: grad_rgb = M^T grad_ycc per pixel.
  const double m_fwd[3][3] = {
      {kKr, kKg, kKb},
      {-kCbScale * kKr, -kCbScale * kKg, kCbScale * (1.0 - kKb)},
      {kCrScale * (1.0 - kKr), -kCrScale * kKg, -kCrScale * kKb}};
  for (std::int64_t i = 0; i < hw; ++i) {
    const double gyv = gfull[static_cast<std::size_t>(i)];
    const double gcb = gfull[static_cast<std::size_t>(hw + i)];
    const double gcr = gfull[static_cast<std::size_t>(2 * hw + i)];
    for (int col = 0; col < 3; ++col)
      grad_in[col * hw + i] = m_fwd[0][col] * gyv + m_fwd[1][col] * gcb + m_fwd[2][col] * gcr;
  }
}

}  // namespace advmark::spectral
