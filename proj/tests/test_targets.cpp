#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "advmark/errors.hpp"
#include "advmark/perceptual.hpp"
#include "advmark/targets.hpp"
#include "helpers.hpp"

using namespace advmark;
using namespace advmark::testing;

namespace {

TranslatorConfig cfg_for(int h, int w) {
  TranslatorConfig cfg;
  cfg.image_h = h;
  cfg.image_w = w;
  return cfg;
}

Tensor random_batch(int n, int h, int w, Rng& rng, double amp = 0.9) {
  Tensor x({n, 3, h, w});
  for (double& v : x.data) v = rng.uniform(-amp, amp);
  return x;
}

double dot(const Tensor& a, const Tensor& b) {
  REQUIRE(a.data.size() == b.data.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

void check_range(const Tensor& t) {
  for (double v : t.data) {
    REQUIRE(std::isfinite(v));
    REQUIRE(v >= -1.0);
    REQUIRE(v <= 1.0);
  }
}

// For a linear map the adjoint identity <Ax, y> == <x, A^T y> verifies the
// whole Jacobian at once.
void check_adjoint(ManipulationTarget& t, int h, int w, Rng& rng) {
  Tensor x = random_batch(2, h, w, rng);
  Tensor y = random_batch(2, h, w, rng);
  Tensor ax = t.apply(x);
  Tensor aty = t.backward(y);
  CHECK(dot(ax, y) == doctest::Approx(dot(x, aty)).epsilon(1e-10));
}

}  // namespace

TEST_CASE("unknown translator kinds and missing dataset are rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(make_toy_translator("sepia", cfg_for(16, 16), rng), std::invalid_argument);
  CHECK_THROWS_AS(make_toy_translator("trained_attribute_ae", cfg_for(16, 16), rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_toy_translator("hue_shift_net", cfg_for(4, 16), rng),
                  std::invalid_argument);
}

TEST_CASE("translator construction is deterministic in the seed") {
  for (const char* kind : {"hue_shift_net", "smooth_warp_net"}) {
    CAPTURE(kind);
    Rng r1(42), r2(42), rx(5);
    auto a = make_toy_translator(kind, cfg_for(16, 24), r1);
    auto b = make_toy_translator(kind, cfg_for(16, 24), r2);
    Tensor x = random_batch(1, 16, 24, rx);
    CHECK(a->apply(x).data == b->apply(x).data);
    CHECK(a->name() == kind);
    CHECK(a->differentiable());
  }
}

TEST_CASE("hue shift keeps shape and range and moves the dominant channel") {
  Rng rng(7);
  auto t = make_toy_translator("hue_shift_net", cfg_for(16, 16), rng);
  Tensor x({1, 3, 16, 16});
  // Strongly red input.
  for (int p = 0; p < 256; ++p) {
    x.data[p] = 0.8;
    x.data[256 + p] = -0.2;
    x.data[512 + p] = -0.6;
  }
  Tensor y = t->apply(x);
  REQUIRE(y.shape == x.shape);
  check_range(y);
  double mr = 0, mb = 0;
  for (int p = 0; p < 256; ++p) {
    mr += y.data[p];
    mb += y.data[512 + p];
  }
  CHECK(mr / 256 < 0.4);        // red drained away
  CHECK(mb / 256 > 0.2);        // blue picked up the red mass
  check_adjoint(*t, 16, 16, rng);
}

TEST_CASE("hue shift is linear") {
  Rng rng(8);
  auto t = make_toy_translator("hue_shift_net", cfg_for(16, 16), rng);
  Tensor a = random_batch(1, 16, 16, rng, 0.45);
  Tensor b = random_batch(1, 16, 16, rng, 0.45);
  Tensor sum(a.shape);
  for (std::size_t i = 0; i < a.data.size(); ++i) sum.data[i] = a.data[i] + b.data[i];
  Tensor ta = t->apply(a), tb = t->apply(b), ts = t->apply(sum);
  for (std::size_t i = 0; i < ts.data.size(); ++i)
    CHECK(ts.data[i] == doctest::Approx(ta.data[i] + tb.data[i]).epsilon(1e-12));
}

TEST_CASE("smooth warp keeps shape and range and displaces structure") {
  Rng rng(9);
  auto t = make_toy_translator("smooth_warp_net", cfg_for(24, 32), rng);
  Rng ir(3);
  ImageTensor img = smooth_image(24, 32, ir);
  Tensor x = image_to_batch(img);
  Tensor y = t->apply(x);
  REQUIRE(y.shape == x.shape);
  check_range(y);
  double moved = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) moved += std::abs(y.data[i] - x.data[i]);
  CHECK(moved / double(y.data.size()) > 1e-3);
  check_adjoint(*t, 24, 32, rng);
}

TEST_CASE("warp of a constant image is the same constant") {
  Rng rng(10);
  auto t = make_toy_translator("smooth_warp_net", cfg_for(16, 16), rng);
  Tensor x({1, 3, 16, 16});
  for (double& v : x.data) v = 0.37;
  Tensor y = t->apply(x);
  for (double v : y.data) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("targets reject inputs of the wrong size") {
  Rng rng(11);
  for (const char* kind : {"hue_shift_net", "smooth_warp_net"}) {
    CAPTURE(kind);
    auto t = make_toy_translator(kind, cfg_for(16, 16), rng);
    Tensor wrong_hw({1, 3, 16, 24});
    Tensor wrong_c({1, 1, 16, 16});
    CHECK_THROWS_AS(t->apply(wrong_hw), std::invalid_argument);
    CHECK_THROWS_AS(t->apply(wrong_c), std::invalid_argument);
  }
}

TEST_CASE("attribute autoencoder gradients match finite differences") {
  ToyDataset tiny = make_toy_dataset(2, 16, 16, 200);
  TranslatorConfig cfg = cfg_for(16, 16);
  cfg.dataset = &tiny;
  cfg.epochs = 0;  // randomly initialized net is enough for the Jacobian test
  Rng rng(12);
  auto t = make_toy_translator("trained_attribute_ae", cfg, rng);
  Rng xr(13);
  Tensor x = random_batch(1, 16, 16, xr, 0.5);
  Tensor w = random_batch(1, 16, 16, xr, 1.0);

  t->apply(x);
  Tensor dx = t->backward(w);
  int checked = 0;
  for (int probe = 0; probe < 20; ++probe) {
    std::size_t i = std::size_t(xr.uniform_int(0, std::int64_t(x.data.size()) - 1));
    const double h = 1e-6;
    Tensor xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    double jp = dot(t->apply(xp), w);
    double jm = dot(t->apply(xm), w);
    double fd = (jp - jm) / (2 * h);
    CHECK(rel_err(dx.data[i], fd) < 2e-3);
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("attribute autoencoder learns to toggle the glasses render") {
  ToyDataset data = make_toy_dataset(140, 32, 32, 201);
  ToyDataset held = make_toy_dataset(24, 32, 32, 202);
  TranslatorConfig cfg = cfg_for(32, 32);
  cfg.dataset = &data;
  cfg.epochs = 16;
  Rng rng(14);
  auto t = make_toy_translator("trained_attribute_ae", cfg, rng);

  int closer_to_flip = 0;
  double mse_to_flip = 0.0, mse_to_input = 0.0;
  for (int i = 0; i < held.size(); ++i) {
    FaceParams flipped = held.faces[i].params;
    flipped.glasses = !flipped.glasses;
    ImageTensor want = render_face(flipped, 32, 32);
    Tensor out = t->apply(image_to_batch(held.faces[i].image));
    ImageTensor got = batch_image(out, 0);
    double to_flip = mean_squared_error(got, want);
    double to_input = mean_squared_error(got, held.faces[i].image);
    closer_to_flip += to_flip < to_input;
    mse_to_flip += to_flip;
    mse_to_input += to_input;
  }
  CHECK(closer_to_flip >= 17);                    // edits most held-out faces
  CHECK(mse_to_flip / 24 < mse_to_input / 24);    // and on average
}

TEST_CASE("registry keeps insertion order and rejects duplicates") {
  Rng rng(15);
  TargetRegistry reg;
  CHECK(reg.empty());
  reg.add(make_toy_translator("smooth_warp_net", cfg_for(16, 16), rng));
  reg.add(make_toy_translator("hue_shift_net", cfg_for(16, 16), rng));
  CHECK(reg.size() == 2);
  CHECK(reg.names() == std::vector<std::string>({"smooth_warp_net", "hue_shift_net"}));
  CHECK_THROWS_AS(reg.add(make_toy_translator("hue_shift_net", cfg_for(16, 16), rng)),
                  std::invalid_argument);
  CHECK(reg.size() == 2);
  CHECK_THROWS_AS(reg.add(nullptr), std::invalid_argument);
}

TEST_CASE("targets save and load back with identical behavior") {
  ToyDataset tiny = make_toy_dataset(4, 16, 16, 203);
  Rng rng(16);
  Rng xr(17);
  Tensor x = random_batch(2, 16, 16, xr);
  for (const char* kind : {"hue_shift_net", "smooth_warp_net", "trained_attribute_ae"}) {
    CAPTURE(kind);
    TranslatorConfig cfg = cfg_for(16, 16);
    cfg.dataset = &tiny;
    cfg.epochs = 1;
    auto t = make_toy_translator(kind, cfg, rng);
    std::string path = temp_path(std::string("target_") + kind + ".bin");
    t->save(path);
    auto back = load_target(path);
    CHECK(back->name() == t->name());
    CHECK(back->apply(x).data == t->apply(x).data);
    std::filesystem::remove(path);
  }
}

TEST_CASE("loading a non-target archive fails as a format error") {
  ToyDataset data = make_toy_dataset(20, 16, 16, 204);
  ExtractorConfig ecfg;
  ecfg.feature_dim = 8;
  ecfg.epochs = 0;
  Rng rng(18);
  FeatureNet f = train_attribute_extractor(data, ecfg, rng);
  std::string path = temp_path("extractor_as_target.bin");
  save_extractor(f, path);
  CHECK_THROWS_AS(load_target(path), FormatError);
  std::filesystem::remove(path);
}
