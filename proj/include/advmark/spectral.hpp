#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "advmark/image.hpp"
#include "advmark/rng.hpp"

namespace advmark::spectral {

// 8x8 divisor table applied to block-DCT coefficients. Values are sampled
// uniformly from [1, 100] rather than perceptually tuned, so that training
// randomly attenuates arbitrary frequency channels instead of only the
// high-frequency ones a codec would drop.
struct QuantTable {
  std::array<int, 64> values{};  // row-major (u, v), each in [1, 100]

  int at(int u, int v) const { return values[static_cast<std::size_t>(u * 8 + v)]; }
};

// Testability switches for the diffusion pipeline. Both on in training.
struct SDToggles {
  bool enable_quantization = true;
  bool enable_cubic = true;
};

// Full-range BT.601 luma/chroma transform on the canonical [-1,1] range,
// no chroma subsampling. Chroma is centered at 0. The pair is an exact
// algebraic inverse; chroma entries may leave [-1,1], so the result is
// returned as a raw ImageTensor-shaped buffer without range validation.
ImageTensor rgb_to_ycbcr(const ImageTensor& img);
ImageTensor ycbcr_to_rgb(const ImageTensor& ycc);

// Per-8x8-block DCT of one plane, coefficients stored in block layout:
// coefficient (u,v) of the block at (by,bx) lands at (by*8+u, bx*8+v).
// Normalization: F(u,v) = (1/4)*beta_uv*sum f(x,y) cos((2x+1)u pi/16) cos((2y+1)v pi/16),
// beta_uv = 1/2 iff u==v==0 else 1. A constant block c gives F(0,0)=8c.
void block_dct(const double* plane, int h, int w, double* coeffs);
void block_idct(const double* coeffs, int h, int w, double* plane);

// Adjoints of the (non-orthogonal) linear maps above, for backprop.
void block_dct_adjoint(const double* grad_coeffs, int h, int w, double* grad_plane);
void block_idct_adjoint(const double* grad_plane, int h, int w, double* grad_coeffs);

// 64 i.i.d. uniform integers on [1, 100].
QuantTable sample_quant_table(Rng& rng);

// Per-coefficient derivative factors and the output clamp mask, retained so
// the training loss can push gradients through the diffusion pipeline.
struct DiffuseTrace {
  int height = 0;
  int width = 0;
  std::vector<double> factor;         // 3*H*W, d(coeff_out)/d(coeff_in)
  std::vector<std::uint8_t> pass;     // 3*H*W, 1 where the final clamp passes gradient
};

// Differentiable JPEG-like pipeline:
//   rgb->ycbcr -> per-channel block DCT -> divide by the table -> cubic
//   shrinkage of sub-unit coefficients (v -> v^3, sign preserved) ->
//   multiply back -> inverse DCT -> ycbcr->rgb -> clamp to [-1,1].
// One table per invocation, shared across all blocks and channels.
// Training-only: not applied at inference.
ImageTensor diffuse(const ImageTensor& img, Rng& rng, const SDToggles& toggles = {});
ImageTensor diffuse_traced(const ImageTensor& img, const QuantTable& table,
                           const SDToggles& toggles, DiffuseTrace* trace);

// Chain rule through a traced diffuse call. grad_out and grad_in are CHW
// buffers of size 3*H*W; grad_in is overwritten.
void diffuse_backward(const DiffuseTrace& trace, const double* grad_out, double* grad_in);

}  // namespace advmark::spectral
