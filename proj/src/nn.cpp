#include "advmark/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace advmark::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// Patch gather shared by convolution and its transpose. `grid` enumerates
// kernel placements over `img`; placement (gy,gx) reads img row gy*stride-pad+ky.
void im2col(const double* img, int channels, int img_h, int img_w, int k, int stride, int pad,
            int grid_h, int grid_w, double* cols) {
  const int grid = grid_h * grid_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * grid;
        for (int gy = 0; gy < grid_h; ++gy) {
          const int iy = gy * stride - pad + ky;
          double* out = row + static_cast<std::size_t>(gy) * grid_w;
          if (iy < 0 || iy >= img_h) {
            std::memset(out, 0, sizeof(double) * grid_w);
            continue;
          }
          const double* src = img + (static_cast<std::size_t>(c) * img_h + iy) * img_w;
          for (int gx = 0; gx < grid_w; ++gx) {
            const int ix = gx * stride - pad + kx;
            out[gx] = (ix >= 0 && ix < img_w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
void col2im(const double* cols, int channels, int img_h, int img_w, int k, int stride, int pad,
            int grid_h, int grid_w, double* img) {
  const int grid = grid_h * grid_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * grid;
        for (int gy = 0; gy < grid_h; ++gy) {
          const int iy = gy * stride - pad + ky;
          if (iy < 0 || iy >= img_h) continue;
          double* dst = img + (static_cast<std::size_t>(c) * img_h + iy) * img_w;
          const double* src = row + static_cast<std::size_t>(gy) * grid_w;
          for (int gx = 0; gx < grid_w; ++gx) {
            const int ix = gx * stride - pad + kx;
            if (ix >= 0 && ix < img_w) dst[ix] += src[gx];
          }
        }
      }
    }
  }
}

void kaiming_fill(Tensor& w, int fan_in, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : w.data) v = rng.normal() * std;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int c_in, int c_out, int k, int stride, int pad)
    : c_in_(c_in), c_out_(c_out), k_(k), stride_(stride), pad_(pad) {
  weight.value = Tensor({c_out, c_in * k * k});
  weight.grad = Tensor({c_out, c_in * k * k});
  bias.value = Tensor({c_out});
  bias.grad = Tensor({c_out});
}

void Conv2d::init(Rng& rng) {
  kaiming_fill(weight.value, c_in_ * k_ * k_, rng);
  bias.value.zero();
}

void Conv2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  weight.name = prefix + ".weight";
  bias.name = prefix + ".bias";
  out.push_back(&weight);
  out.push_back(&bias);
}

Tensor Conv2d::forward(const Tensor& x) {
  x_ = x;
  const int n = x.shape[0], h = x.shape[2], w = x.shape[3];
  const int oh = conv_out(h, k_, stride_, pad_), ow = conv_out(w, k_, stride_, pad_);
  const int grid = oh * ow;
  Tensor y({n, c_out_, oh, ow});
  cols_.resize(static_cast<std::size_t>(c_in_) * k_ * k_ * grid);
  CMapMat wm(weight.value.ptr(), c_out_, c_in_ * k_ * k_);
  for (int i = 0; i < n; ++i) {
    im2col(x.ptr() + static_cast<std::size_t>(i) * c_in_ * h * w, c_in_, h, w, k_, stride_, pad_,
           oh, ow, cols_.data());
    CMapMat cm(cols_.data(), c_in_ * k_ * k_, grid);
    MapMat ym(y.ptr() + static_cast<std::size_t>(i) * c_out_ * grid, c_out_, grid);
    ym.noalias() = wm * cm;
    for (int c = 0; c < c_out_; ++c) ym.row(c).array() += bias.value.data[c];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const int n = x_.shape[0], h = x_.shape[2], w = x_.shape[3];
  const int oh = dy.shape[2], ow = dy.shape[3];
  const int grid = oh * ow;
  Tensor dx(x_.shape);
  dx.zero();
  MapMat dwm(weight.grad.ptr(), c_out_, c_in_ * k_ * k_);
  CMapMat wm(weight.value.ptr(), c_out_, c_in_ * k_ * k_);
  std::vector<double> dcols(static_cast<std::size_t>(c_in_) * k_ * k_ * grid);
  for (int i = 0; i < n; ++i) {
    im2col(x_.ptr() + static_cast<std::size_t>(i) * c_in_ * h * w, c_in_, h, w, k_, stride_, pad_,
           oh, ow, cols_.data());
    CMapMat cm(cols_.data(), c_in_ * k_ * k_, grid);
    CMapMat dym(dy.ptr() + static_cast<std::size_t>(i) * c_out_ * grid, c_out_, grid);
    dwm.noalias() += dym * cm.transpose();
    // Fixed-order sums: Eigen's redux splits at an alignment-dependent index,
    // which breaks bitwise run-to-run reproducibility.
    for (int c = 0; c < c_out_; ++c) {
      const double* rp = dy.ptr() + (static_cast<std::size_t>(i) * c_out_ + c) * grid;
      double s = 0.0;
      for (int g = 0; g < grid; ++g) s += rp[g];
      bias.grad.data[c] += s;
    }
    MapMat dcm(dcols.data(), c_in_ * k_ * k_, grid);
    dcm.noalias() = wm.transpose() * dym;
    col2im(dcols.data(), c_in_, h, w, k_, stride_, pad_, oh, ow,
           dx.ptr() + static_cast<std::size_t>(i) * c_in_ * h * w);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int c_in, int c_out, int k, int stride, int pad)
    : c_in_(c_in), c_out_(c_out), k_(k), stride_(stride), pad_(pad) {
  weight.value = Tensor({c_in, c_out * k * k});
  weight.grad = Tensor({c_in, c_out * k * k});
  bias.value = Tensor({c_out});
  bias.grad = Tensor({c_out});
}

void ConvTranspose2d::init(Rng& rng) {
  // Each output pixel receives c_in*(k/stride)^2 contributions.
  kaiming_fill(weight.value, c_in_ * (k_ / stride_) * (k_ / stride_), rng);
  bias.value.zero();
}

void ConvTranspose2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  weight.name = prefix + ".weight";
  bias.name = prefix + ".bias";
  out.push_back(&weight);
  out.push_back(&bias);
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
  x_ = x;
  const int n = x.shape[0], h = x.shape[2], w = x.shape[3];
  const int oh = (h - 1) * stride_ - 2 * pad_ + k_;
  const int ow = (w - 1) * stride_ - 2 * pad_ + k_;
  const int grid = h * w;
  Tensor y({n, c_out_, oh, ow});
  y.zero();
  cols_.resize(static_cast<std::size_t>(c_out_) * k_ * k_ * grid);
  CMapMat wm(weight.value.ptr(), c_in_, c_out_ * k_ * k_);
  for (int i = 0; i < n; ++i) {
    CMapMat xm(x.ptr() + static_cast<std::size_t>(i) * c_in_ * grid, c_in_, grid);
    MapMat cm(cols_.data(), c_out_ * k_ * k_, grid);
    cm.noalias() = wm.transpose() * xm;
    double* yp = y.ptr() + static_cast<std::size_t>(i) * c_out_ * oh * ow;
    col2im(cols_.data(), c_out_, oh, ow, k_, stride_, pad_, h, w, yp);
    for (int c = 0; c < c_out_; ++c) {
      double* plane = yp + static_cast<std::size_t>(c) * oh * ow;
      const double b = bias.value.data[c];
      for (int p = 0; p < oh * ow; ++p) plane[p] += b;
    }
  }
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  const int n = x_.shape[0], h = x_.shape[2], w = x_.shape[3];
  const int oh = dy.shape[2], ow = dy.shape[3];
  const int grid = h * w;
  Tensor dx(x_.shape);
  CMapMat wm(weight.value.ptr(), c_in_, c_out_ * k_ * k_);
  MapMat dwm(weight.grad.ptr(), c_in_, c_out_ * k_ * k_);
  for (int i = 0; i < n; ++i) {
    const double* dyp = dy.ptr() + static_cast<std::size_t>(i) * c_out_ * oh * ow;
    im2col(dyp, c_out_, oh, ow, k_, stride_, pad_, h, w, cols_.data());
    CMapMat cm(cols_.data(), c_out_ * k_ * k_, grid);
    MapMat dxm(dx.ptr() + static_cast<std::size_t>(i) * c_in_ * grid, c_in_, grid);
    dxm.noalias() = wm * cm;
    CMapMat xm(x_.ptr() + static_cast<std::size_t>(i) * c_in_ * grid, c_in_, grid);
    dwm.noalias() += xm * cm.transpose();
    for (int c = 0; c < c_out_; ++c) {
      const double* plane = dyp + static_cast<std::size_t>(c) * oh * ow;
      double s = 0.0;
      for (int p = 0; p < oh * ow; ++p) s += plane[p];
      bias.grad.data[c] += s;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// InstanceNorm

InstanceNorm::InstanceNorm(int channels, double eps) : channels_(channels), eps_(eps) {
  gamma.value = Tensor({channels});
  gamma.grad = Tensor({channels});
  beta.value = Tensor({channels});
  beta.grad = Tensor({channels});
}

void InstanceNorm::init(Rng&) {
  gamma.value.fill(1.0);
  beta.value.zero();
}

void InstanceNorm::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  gamma.name = prefix + ".gamma";
  beta.name = prefix + ".beta";
  out.push_back(&gamma);
  out.push_back(&beta);
}

Tensor InstanceNorm::forward(const Tensor& x) {
  const int n = x.shape[0], c = x.shape[1];
  const int hw = x.shape[2] * x.shape[3];
  Tensor y(x.shape);
  xhat_ = Tensor(x.shape);
  inv_std_.assign(static_cast<std::size_t>(n) * c, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x.ptr() + (static_cast<std::size_t>(i) * c + ch) * hw;
      double mean = 0.0;
      for (int p = 0; p < hw; ++p) mean += xp[p];
      mean /= hw;
      double var = 0.0;
      for (int p = 0; p < hw; ++p) {
        const double d = xp[p] - mean;
        var += d * d;
      }
      var /= hw;
      const double istd = 1.0 / std::sqrt(var + eps_);
      inv_std_[static_cast<std::size_t>(i) * c + ch] = istd;
      double* xh = xhat_.ptr() + (static_cast<std::size_t>(i) * c + ch) * hw;
      double* yp = y.ptr() + (static_cast<std::size_t>(i) * c + ch) * hw;
      const double g = gamma.value.data[ch], b = beta.value.data[ch];
      for (int p = 0; p < hw; ++p) {
        xh[p] = (xp[p] - mean) * istd;
        yp[p] = g * xh[p] + b;
      }
    }
  }
  return y;
}

Tensor InstanceNorm::backward(const Tensor& dy) {
  const int n = dy.shape[0], c = dy.shape[1];
  const int hw = dy.shape[2] * dy.shape[3];
  Tensor dx(dy.shape);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * hw;
      const double* dyp = dy.ptr() + off;
      const double* xh = xhat_.ptr() + off;
      double* dxp = dx.ptr() + off;
      const double g = gamma.value.data[ch];
      const double istd = inv_std_[static_cast<std::size_t>(i) * c + ch];
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (int p = 0; p < hw; ++p) {
        sum_dy += dyp[p];
        sum_dy_xh += dyp[p] * xh[p];
      }
      gamma.grad.data[ch] += sum_dy_xh;
      beta.grad.data[ch] += sum_dy;
      const double inv_m = 1.0 / hw;
      for (int p = 0; p < hw; ++p) {
        dxp[p] = g * istd * (dyp[p] - inv_m * sum_dy - xh[p] * inv_m * sum_dy_xh);
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Pointwise activations

Tensor ReLU::forward(const Tensor& x) {
  Tensor y(x.shape);
  mask_.resize(x.count());
  for (std::size_t i = 0; i < x.count(); ++i) {
    mask_[i] = x.data[i] > 0.0;
    y.data[i] = mask_[i] ? x.data[i] : 0.0;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx(dy.shape);
  for (std::size_t i = 0; i < dy.count(); ++i) dx.data[i] = mask_[i] ? dy.data[i] : 0.0;
  return dx;
}

Tensor LeakyReLU::forward(const Tensor& x) {
  Tensor y(x.shape);
  mask_.resize(x.count());
  for (std::size_t i = 0; i < x.count(); ++i) {
    mask_[i] = x.data[i] > 0.0;
    y.data[i] = mask_[i] ? x.data[i] : slope_ * x.data[i];
  }
  return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) {
  Tensor dx(dy.shape);
  for (std::size_t i = 0; i < dy.count(); ++i) dx.data[i] = mask_[i] ? dy.data[i] : slope_ * dy.data[i];
  return dx;
}

Tensor Tanh::forward(const Tensor& x) {
  y_ = Tensor(x.shape);
  for (std::size_t i = 0; i < x.count(); ++i) y_.data[i] = std::tanh(x.data[i]);
  return y_;
}

Tensor Tanh::backward(const Tensor& dy) {
  Tensor dx(dy.shape);
  for (std::size_t i = 0; i < dy.count(); ++i) dx.data[i] = dy.data[i] * (1.0 - y_.data[i] * y_.data[i]);
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
  y_ = Tensor(x.shape);
  for (std::size_t i = 0; i < x.count(); ++i) y_.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
  return y_;
}

Tensor Sigmoid::backward(const Tensor& dy) {
  Tensor dx(dy.shape);
  for (std::size_t i = 0; i < dy.count(); ++i) dx.data[i] = dy.data[i] * y_.data[i] * (1.0 - y_.data[i]);
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in, int out) : in_(in), out_(out) {
  weight.value = Tensor({out, in});
  weight.grad = Tensor({out, in});
  bias.value = Tensor({out});
  bias.grad = Tensor({out});
}

void Linear::init(Rng& rng) {
  kaiming_fill(weight.value, in_, rng);
  bias.value.zero();
}

void Linear::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  weight.name = prefix + ".weight";
  bias.name = prefix + ".bias";
  out.push_back(&weight);
  out.push_back(&bias);
}

Tensor Linear::forward(const Tensor& x) {
  x_ = x;
  const int n = x.shape[0];
  Tensor y({n, out_});
  CMapMat xm(x.ptr(), n, in_);
  CMapMat wm(weight.value.ptr(), out_, in_);
  MapMat ym(y.ptr(), n, out_);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < out_; ++o) ym(i, o) += bias.value.data[o];
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const int n = x_.shape[0];
  Tensor dx({n, in_});
  CMapMat dym(dy.ptr(), n, out_);
  CMapMat xm(x_.ptr(), n, in_);
  CMapMat wm(weight.value.ptr(), out_, in_);
  MapMat dwm(weight.grad.ptr(), out_, in_);
  MapMat dxm(dx.ptr(), n, in_);
  dwm.noalias() += dym.transpose() * xm;
  for (int o = 0; o < out_; ++o) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += dym(i, o);
    bias.grad.data[o] += s;
  }
  dxm.noalias() = dym * wm;
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling / reshape

Tensor GlobalAvgPool::forward(const Tensor& x) {
  in_shape_ = x.shape;
  const int n = x.shape[0], c = x.shape[1];
  const int hw = x.shape[2] * x.shape[3];
  Tensor y({n, c});
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x.ptr() + (static_cast<std::size_t>(i) * c + ch) * hw;
      double s = 0.0;
      for (int p = 0; p < hw; ++p) s += xp[p];
      y.data[static_cast<std::size_t>(i) * c + ch] = s / hw;
    }
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  const int n = in_shape_[0], c = in_shape_[1];
  const int hw = in_shape_[2] * in_shape_[3];
  Tensor dx(in_shape_);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double g = dy.data[static_cast<std::size_t>(i) * c + ch] / hw;
      double* dxp = dx.ptr() + (static_cast<std::size_t>(i) * c + ch) * hw;
      for (int p = 0; p < hw; ++p) dxp[p] = g;
    }
  }
  return dx;
}

Tensor Flatten::forward(const Tensor& x) {
  in_shape_ = x.shape;
  int flat = 1;
  for (std::size_t d = 1; d < x.shape.size(); ++d) flat *= x.shape[d];
  Tensor y = x;
  y.shape = {x.shape[0], flat};
  return y;
}

Tensor Flatten::backward(const Tensor& dy) {
  Tensor dx = dy;
  dx.shape = in_shape_;
  return dx;
}

// ---------------------------------------------------------------------------
// Sequential

Tensor Sequential::forward(const Tensor& x) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur);
  return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor cur = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

void Sequential::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_params(prefix + "." + std::to_string(i), out);
  }
}

void Sequential::init(Rng& rng) {
  for (auto& l : layers_) l->init(rng);
}

// ---------------------------------------------------------------------------
// Tensor plumbing

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const int n = parts[0]->shape[0];
  const int h = parts[0]->shape[2], w = parts[0]->shape[3];
  int c_total = 0;
  for (const Tensor* p : parts) {
    if (p->shape[0] != n || p->shape[2] != h || p->shape[3] != w)
      throw std::invalid_argument("concat_channels: mismatched shapes");
    c_total += p->shape[1];
  }
  Tensor y({n, c_total, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    std::size_t dst_c = 0;
    for (const Tensor* p : parts) {
      const int c = p->shape[1];
      std::memcpy(y.ptr() + (static_cast<std::size_t>(i) * c_total + dst_c) * hw,
                  p->ptr() + static_cast<std::size_t>(i) * c * hw, sizeof(double) * c * hw);
      dst_c += c;
    }
  }
  return y;
}

std::vector<Tensor> split_channels(const Tensor& x, const std::vector<int>& widths) {
  const int n = x.shape[0], h = x.shape[2], w = x.shape[3];
  int sum = 0;
  for (int c : widths) sum += c;
  if (sum != x.shape[1]) throw std::invalid_argument("split_channels: widths do not cover input");
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<Tensor> parts;
  parts.reserve(widths.size());
  int c0 = 0;
  for (int c : widths) {
    Tensor p({n, c, h, w});
    for (int i = 0; i < n; ++i) {
      std::memcpy(p.ptr() + static_cast<std::size_t>(i) * c * hw,
                  x.ptr() + (static_cast<std::size_t>(i) * x.shape[1] + c0) * hw,
                  sizeof(double) * c * hw);
    }
    parts.push_back(std::move(p));
    c0 += c;
  }
  return parts;
}

void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->grad.zero();
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.emplace_back(p->value.shape);
    v_.emplace_back(p->value.shape);
  }
}

void Adam::zero_grad() { zero_grads(params_); }

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& val = params_[i]->value;
    const Tensor& g = params_[i]->grad;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < val.count(); ++j) {
      m.data[j] = beta1_ * m.data[j] + (1.0 - beta1_) * g.data[j];
      v.data[j] = beta2_ * v.data[j] + (1.0 - beta2_) * g.data[j] * g.data[j];
      const double mhat = m.data[j] / bc1;
      const double vhat = v.data[j] / bc2;
      val.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::vector<std::pair<std::string, const Tensor*>> Adam::state_arrays() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(params_.size() * 2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back("adam.m." + params_[i]->name, &m_[i]);
    out.emplace_back("adam.v." + params_[i]->name, &v_[i]);
  }
  return out;
}

void Adam::load_state(const std::string& name, const Tensor& t) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (name == "adam.m." + params_[i]->name) {
      if (!t.same_shape(m_[i])) throw std::invalid_argument("adam state shape mismatch: " + name);
      m_[i] = t;
      return;
    }
    if (name == "adam.v." + params_[i]->name) {
      if (!t.same_shape(v_[i])) throw std::invalid_argument("adam state shape mismatch: " + name);
      v_[i] = t;
      return;
    }
  }
  throw std::invalid_argument("adam state has no slot named " + name);
}

}  // namespace advmark::nn
