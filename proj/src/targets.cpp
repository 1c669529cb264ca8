#include "advmark/targets.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "advmark/archive.hpp"
#include "advmark/errors.hpp"
#include "advmark/networks.hpp"

namespace advmark {
namespace {

constexpr double kPi = 3.14159265358979323846;

void shuffle_indices(std::vector<int>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[std::size_t(rng.uniform_int(0, std::int64_t(i) - 1))]);
}

void check_batch(const Tensor& x, int h, int w) {
  if (x.shape.size() != 4 || x.shape[1] != 3)
    throw std::invalid_argument("target input must be a (N,3,H,W) batch");
  if (x.shape[2] != h || x.shape[3] != w)
    throw std::invalid_argument("target input size does not match the size it was built for");
}

// Fixed convex per-pixel channel mixing; rotates the dominant hue while
// keeping every output a convex combination of in-range values.
class HueShiftNet : public ManipulationTarget {
 public:
  HueShiftNet(const double* mix, int h, int w) : name_("hue_shift_net"), h_(h), w_(w) {
    for (int i = 0; i < 9; ++i) mix_[i] = mix[i];
  }

  static HueShiftNet sampled(Rng& rng, int h, int w) {
    double alpha = rng.uniform(0.75, 0.85);
    double mix[9] = {};
    for (int c = 0; c < 3; ++c) {
      mix[c * 3 + c] = 1.0 - alpha;
      mix[c * 3 + (c + 1) % 3] = alpha;
    }
    return HueShiftNet(mix, h, w);
  }

  const std::string& name() const override { return name_; }

  Tensor apply(const Tensor& x) override {
    check_batch(x, h_, w_);
    Tensor out(x.shape);
    std::int64_t plane = x.shape[2] * x.shape[3];
    for (std::int64_t n = 0; n < x.shape[0]; ++n) {
      const double* in = x.data.data() + n * 3 * plane;
      double* o = out.data.data() + n * 3 * plane;
      for (int c = 0; c < 3; ++c)
        for (std::int64_t p = 0; p < plane; ++p)
          o[c * plane + p] = mix_[c * 3 + 0] * in[0 * plane + p] +
                             mix_[c * 3 + 1] * in[1 * plane + p] +
                             mix_[c * 3 + 2] * in[2 * plane + p];
    }
    return out;
  }

  Tensor backward(const Tensor& dy) override {
    check_batch(dy, h_, w_);
    Tensor dx(dy.shape);
    std::int64_t plane = dy.shape[2] * dy.shape[3];
    for (std::int64_t n = 0; n < dy.shape[0]; ++n) {
      const double* g = dy.data.data() + n * 3 * plane;
      double* o = dx.data.data() + n * 3 * plane;
      for (int k = 0; k < 3; ++k)
        for (std::int64_t p = 0; p < plane; ++p)
          o[k * plane + p] = mix_[0 * 3 + k] * g[0 * plane + p] +
                             mix_[1 * 3 + k] * g[1 * plane + p] +
                             mix_[2 * 3 + k] * g[2 * plane + p];
    }
    return dx;
  }

  void save(const std::string& path) override {
    Tensor mix({3, 3});
    for (int i = 0; i < 9; ++i) mix.data[i] = mix_[i];
    Tensor size({2});
    size.data[0] = h_;
    size.data[1] = w_;
    nlohmann::json meta = {{"kind", "manipulation_target"}, {"target_kind", "hue_shift_net"}};
    write_archive(path, meta, {{"mix", &mix}, {"size", &size}});
  }

 private:
  std::string name_;
  int h_, w_;
  double mix_[9];
};

// Fixed sinusoidal coordinate warp with bilinear resampling. The sample
// weights are convex, so outputs stay inside the input range; the map is
// linear in the image, so backward is a transposed scatter of the same
// weights.
class SmoothWarpNet : public ManipulationTarget {
 public:
  SmoothWarpNet(const double* params, int h, int w) : name_("smooth_warp_net"), h_(h), w_(w) {
    for (int i = 0; i < 6; ++i) params_[i] = params[i];
    build_tables();
  }

  static SmoothWarpNet sampled(Rng& rng, int h, int w) {
    double p[6];
    p[0] = rng.uniform(1.5, 3.0);          // vertical amplitude, pixels
    p[1] = rng.uniform(1.5, 3.0);          // horizontal amplitude
    p[2] = rng.uniform(1.0, 2.0);          // cycles across width
    p[3] = rng.uniform(1.0, 2.0);          // cycles across height
    p[4] = rng.uniform(0.0, 2.0 * kPi);    // phases
    p[5] = rng.uniform(0.0, 2.0 * kPi);
    return SmoothWarpNet(p, h, w);
  }

  const std::string& name() const override { return name_; }

  Tensor apply(const Tensor& x) override {
    check_batch(x, h_, w_);
    Tensor out(x.shape);
    std::int64_t plane = std::int64_t(h_) * w_;
    std::int64_t planes = x.shape[0] * 3;
    for (std::int64_t pc = 0; pc < planes; ++pc) {
      const double* in = x.data.data() + pc * plane;
      double* o = out.data.data() + pc * plane;
      for (std::int64_t p = 0; p < plane; ++p) {
        const Tap& t = taps_[p];
        o[p] = t.w00 * in[t.i00] + t.w01 * in[t.i01] + t.w10 * in[t.i10] + t.w11 * in[t.i11];
      }
    }
    return out;
  }

  Tensor backward(const Tensor& dy) override {
    check_batch(dy, h_, w_);
    Tensor dx(dy.shape);
    std::int64_t plane = std::int64_t(h_) * w_;
    std::int64_t planes = dy.shape[0] * 3;
    for (std::int64_t pc = 0; pc < planes; ++pc) {
      const double* g = dy.data.data() + pc * plane;
      double* o = dx.data.data() + pc * plane;
      for (std::int64_t p = 0; p < plane; ++p) {
        const Tap& t = taps_[p];
        o[t.i00] += t.w00 * g[p];
        o[t.i01] += t.w01 * g[p];
        o[t.i10] += t.w10 * g[p];
        o[t.i11] += t.w11 * g[p];
      }
    }
    return dx;
  }

  void save(const std::string& path) override {
    Tensor params({6});
    for (int i = 0; i < 6; ++i) params.data[i] = params_[i];
    Tensor size({2});
    size.data[0] = h_;
    size.data[1] = w_;
    nlohmann::json meta = {{"kind", "manipulation_target"}, {"target_kind", "smooth_warp_net"}};
    write_archive(path, meta, {{"warp", &params}, {"size", &size}});
  }

 private:
  struct Tap {
    std::int32_t i00, i01, i10, i11;
    double w00, w01, w10, w11;
  };

  void build_tables() {
    taps_.resize(std::size_t(h_) * w_);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        double sy = y + params_[0] * std::sin(2.0 * kPi * params_[2] * x / w_ + params_[4]);
        double sx = x + params_[1] * std::sin(2.0 * kPi * params_[3] * y / h_ + params_[5]);
        sy = std::min(std::max(sy, 0.0), double(h_ - 1));
        sx = std::min(std::max(sx, 0.0), double(w_ - 1));
        int y0 = int(sy), x0 = int(sx);
        int y1 = std::min(y0 + 1, h_ - 1), x1 = std::min(x0 + 1, w_ - 1);
        double fy = sy - y0, fx = sx - x0;
        Tap& t = taps_[std::size_t(y) * w_ + x];
        t.i00 = y0 * w_ + x0;
        t.i01 = y0 * w_ + x1;
        t.i10 = y1 * w_ + x0;
        t.i11 = y1 * w_ + x1;
        t.w00 = (1 - fy) * (1 - fx);
        t.w01 = (1 - fy) * fx;
        t.w10 = fy * (1 - fx);
        t.w11 = fy * fx;
      }
    }
  }

  std::string name_;
  int h_, w_;
  double params_[6];
  std::vector<Tap> taps_;
};

nn::Sequential build_ae(int base) {
  nn::Sequential net;
  net.add<nn::Conv2d>(3, base, 3, 2, 1);
  net.add<nn::InstanceNorm>(base);
  net.add<nn::ReLU>();
  net.add<nn::Conv2d>(base, base * 2, 3, 2, 1);
  net.add<nn::InstanceNorm>(base * 2);
  net.add<nn::ReLU>();
  net.add<nn::Conv2d>(base * 2, base * 2, 3, 1, 1);
  net.add<nn::InstanceNorm>(base * 2);
  net.add<nn::ReLU>();
  net.add<nn::ConvTranspose2d>(base * 2, base);
  net.add<nn::InstanceNorm>(base);
  net.add<nn::ReLU>();
  net.add<nn::ConvTranspose2d>(base, base);
  net.add<nn::InstanceNorm>(base);
  net.add<nn::ReLU>();
  net.add<nn::Conv2d>(base, 3, 3, 1, 1);
  net.add<nn::Tanh>();
  return net;
}

// Encoder-decoder trained to toggle the glasses attribute: each training pair
// renders the same face with and without glasses, so the net learns an
// identity map plus a localized edit it must infer from the input.
class TrainedAttributeAe : public ManipulationTarget {
 public:
  static constexpr int kBase = 16;

  TrainedAttributeAe(int h, int w) : name_("trained_attribute_ae"), h_(h), w_(w), net_(build_ae(kBase)) {}

  void train(const ToyDataset& data, const TranslatorConfig& cfg, Rng& rng) {
    net_.init(rng);
    if (data.height != h_ || data.width != w_)
      throw std::invalid_argument("dataset size does not match translator size");
    int n = data.size();
    if (n < 2) throw std::invalid_argument("attribute translator needs at least two faces");
    std::vector<Tensor> inputs(n), wants(n);
    for (int i = 0; i < n; ++i) {
      FaceParams flipped = data.faces[i].params;
      flipped.glasses = !flipped.glasses;
      inputs[i] = image_to_batch(data.faces[i].image);
      wants[i] = image_to_batch(render_face(flipped, h_, w_));
    }
    std::vector<nn::Param*> params;
    net_.collect_params("ae", params);
    nn::Adam opt(params, cfg.learning_rate);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    int bs = std::max(1, cfg.batch_size);
    std::int64_t plane = std::int64_t(3) * h_ * w_;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      shuffle_indices(order, rng);
      for (int start = 0; start < n; start += bs) {
        int m = std::min(bs, n - start);
        Tensor x({m, 3, h_, w_}), y({m, 3, h_, w_});
        for (int j = 0; j < m; ++j) {
          const Tensor& xi = inputs[order[start + j]];
          const Tensor& yi = wants[order[start + j]];
          std::copy(xi.data.begin(), xi.data.end(), x.data.begin() + j * plane);
          std::copy(yi.data.begin(), yi.data.end(), y.data.begin() + j * plane);
        }
        Tensor out = net_.forward(x);
        Tensor dout(out.shape);
        double inv = 2.0 / double(out.data.size());
        for (std::size_t i = 0; i < out.data.size(); ++i)
          dout.data[i] = inv * (out.data[i] - y.data[i]);
        opt.zero_grad();
        net_.backward(dout);
        opt.step();
      }
    }
  }

  const std::string& name() const override { return name_; }

  Tensor apply(const Tensor& x) override {
    check_batch(x, h_, w_);
    return net_.forward(x);
  }

  Tensor backward(const Tensor& dy) override { return net_.backward(dy); }

  void save(const std::string& path) override {
    std::vector<nn::Param*> params;
    net_.collect_params("ae", params);
    Tensor size({2});
    size.data[0] = h_;
    size.data[1] = w_;
    std::vector<std::pair<std::string, const Tensor*>> arrays;
    arrays.emplace_back("size", &size);
    for (nn::Param* p : params) arrays.emplace_back(p->name, &p->value);
    nlohmann::json meta = {{"kind", "manipulation_target"}, {"target_kind", "trained_attribute_ae"}};
    write_archive(path, meta, arrays);
  }

  void load_params(const std::vector<std::pair<std::string, Tensor>>& arrays) {
    std::vector<nn::Param*> params;
    net_.collect_params("ae", params);
    std::vector<std::pair<std::string, Tensor>> weights;
    for (const auto& entry : arrays)
      if (entry.first != "size") weights.push_back(entry);
    for (nn::Param* p : params) {
      bool found = false;
      for (const auto& [name, t] : weights) found = found || name == p->name;
      if (!found) throw IncompatibilityError("stored translator is missing parameter " + p->name);
    }
    load_named_params(params, weights);
  }

 private:
  std::string name_;
  int h_, w_;
  nn::Sequential net_;
};

}  // namespace

std::shared_ptr<ManipulationTarget> make_toy_translator(const std::string& kind,
                                                        const TranslatorConfig& cfg, Rng& rng) {
  if (cfg.image_h < 8 || cfg.image_w < 8)
    throw std::invalid_argument("translator image size must be at least 8x8");
  if (kind == "hue_shift_net")
    return std::make_shared<HueShiftNet>(HueShiftNet::sampled(rng, cfg.image_h, cfg.image_w));
  if (kind == "smooth_warp_net")
    return std::make_shared<SmoothWarpNet>(SmoothWarpNet::sampled(rng, cfg.image_h, cfg.image_w));
  if (kind == "trained_attribute_ae") {
    if (!cfg.dataset) throw std::invalid_argument("trained_attribute_ae needs a dataset to train on");
    auto ae = std::make_shared<TrainedAttributeAe>(cfg.image_h, cfg.image_w);
    ae->train(*cfg.dataset, cfg, rng);
    return ae;
  }
  throw std::invalid_argument("unknown translator kind: " + kind);
}

std::shared_ptr<ManipulationTarget> load_target(const std::string& path) {
  Archive a = read_archive(path);
  if (a.meta.value("kind", "") != "manipulation_target")
    throw FormatError("archive does not hold a manipulation target");
  std::string tk = a.meta.value("target_kind", "");
  const Tensor& size = a.get("size");
  if (size.data.size() != 2) throw FormatError("malformed target size record");
  int h = int(size.data[0]), w = int(size.data[1]);
  if (tk == "hue_shift_net") {
    const Tensor& mix = a.get("mix");
    if (mix.data.size() != 9) throw FormatError("malformed hue mix record");
    return std::make_shared<HueShiftNet>(mix.data.data(), h, w);
  }
  if (tk == "smooth_warp_net") {
    const Tensor& p = a.get("warp");
    if (p.data.size() != 6) throw FormatError("malformed warp record");
    return std::make_shared<SmoothWarpNet>(p.data.data(), h, w);
  }
  if (tk == "trained_attribute_ae") {
    auto ae = std::make_shared<TrainedAttributeAe>(h, w);
    ae->load_params(a.arrays);
    return ae;
  }
  throw FormatError("unknown stored translator kind: " + tk);
}

void TargetRegistry::add(std::shared_ptr<ManipulationTarget> target) {
  if (!target) throw std::invalid_argument("null manipulation target");
  for (const auto& t : targets_)
    if (t->name() == target->name())
      throw std::invalid_argument("duplicate target name: " + target->name());
  targets_.push_back(std::move(target));
}

std::vector<std::string> TargetRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(targets_.size());
  for (const auto& t : targets_) out.push_back(t->name());
  return out;
}

}  // namespace advmark
