#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "advmark/errors.hpp"
#include "advmark/evaluation.hpp"
#include "advmark/imageio.hpp"
#include "advmark/perceptual.hpp"
#include "advmark/training.hpp"
#include "helpers.hpp"

using namespace advmark;
using namespace advmark::testing;

namespace {

std::string fresh_dir(const std::string& stem) {
  std::string d = temp_path(stem);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

Hyperparams eval_hp() {
  Hyperparams hp;
  hp.image_h = hp.image_w = 32;
  hp.L = 16;
  hp.msg_h = hp.msg_w = 4;
  hp.msg_channels = hp.img_channels = 8;
  hp.batch_size = 4;
  hp.lambda_C = 0.0;
  hp.lambda_A = 0.0;
  hp.learning_rate = 1e-2;
  hp.epochs = 30;
  hp.seed = 99;
  return hp;
}

// Watermark-capable bundle with an attribute extractor, trained once.
ModelBundle& trained_bundle() {
  static ModelBundle b = [] {
    ToyDataset data = make_toy_dataset(60, 32, 32, 555);
    TrainConfig cfg;
    cfg.hp = eval_hp();
    cfg.dataset = &data;
    cfg.use_diffusion = false;
    cfg.holdout_frac = 0.2;
    cfg.log_cadence = 0;
    auto [bundle, hist] = train(cfg);
    ToyDataset exdata = make_toy_dataset(300, 32, 32, 101);
    ExtractorConfig ecfg;
    ecfg.feature_dim = 32;
    ecfg.epochs = 12;
    ecfg.batch_size = 16;
    Rng erng(7);
    bundle.extractor.emplace(train_attribute_extractor(exdata, ecfg, erng));
    return bundle;
  }();
  return b;
}

TargetRegistry& toy_targets() {
  static TargetRegistry reg = [] {
    TargetRegistry r;
    TranslatorConfig tcfg;
    tcfg.image_h = tcfg.image_w = 32;
    Rng rng(5);
    r.add(make_toy_translator("hue_shift_net", tcfg, rng));
    r.add(make_toy_translator("smooth_warp_net", tcfg, rng));
    return r;
  }();
  return reg;
}

}  // namespace

TEST_CASE("psnr measures canonical-range fidelity") {
  Rng rng(3);
  ImageTensor x = smooth_image(16, 16, rng);
  CHECK(std::isinf(psnr(x, x)));
  CHECK(psnr(x, x) > 0);

  // Uniform offset of 0.2 has MSE 0.04 against peak 2: 10*log10(4/0.04).
  ImageTensor a(16, 16), b(16, 16);
  for (auto& v : b.data) v = 0.2;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));

  ImageTensor y = smooth_image(16, 16, rng);
  double se = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    se += (x.data[i] - y.data[i]) * (x.data[i] - y.data[i]);
  }
  const double want = 10.0 * std::log10(4.0 / (se / double(x.data.size())));
  CHECK(rel_err(psnr(x, y), want) <= 1e-6);
  CHECK(psnr(x, y) == psnr(y, x));

  ImageTensor other(24, 24);
  CHECK_THROWS_AS(psnr(x, other), std::invalid_argument);
  ImageTensor bad = x;
  bad.data[0] = 5.0;
  CHECK_THROWS_AS(psnr(bad, x), std::invalid_argument);
}

TEST_CASE("ssim matches an independent reference on random pairs") {
  // Expected values computed with a separate implementation of the same
  // convention: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
  // range 2.0, windows fully inside the image, mean over channels.
  const double expected[10] = {0.0067472088,  -0.0082644363, -0.0265014879, 0.0198357642,
                               0.0284838017,  0.9473419671,  0.9391142100,  0.9304731838,
                               0.9650862395,  0.9552396049};
  for (int i = 0; i < 5; ++i) {
    Rng ra(100 + static_cast<std::uint64_t>(i)), rb(200 + static_cast<std::uint64_t>(i));
    ImageTensor a = random_image(16, 16, ra);
    ImageTensor b = random_image(16, 16, rb);
    CHECK(std::abs(ssim(a, b) - expected[i]) <= 1e-4);
  }
  for (int i = 5; i < 10; ++i) {
    Rng ra(300 + static_cast<std::uint64_t>(i)), rn(400 + static_cast<std::uint64_t>(i));
    ImageTensor a = random_image(16, 16, ra);
    ImageTensor nz = random_image(16, 16, rn);
    ImageTensor b(16, 16);
    for (std::size_t k = 0; k < b.data.size(); ++k) {
      b.data[k] = 0.9 * a.data[k] + 0.1 * nz.data[k];
    }
    CHECK(std::abs(ssim(a, b) - expected[i]) <= 1e-4);
  }

  Rng rng(4);
  ImageTensor x = smooth_image(16, 16, rng);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  ImageTensor neg = x;
  for (auto& v : neg.data) v = -v;
  CHECK(ssim(x, neg) < 1.0 - 1e-6);
  ImageTensor y = smooth_image(16, 16, rng);
  CHECK(ssim(x, y) == ssim(y, x));
  CHECK(ssim(x, y) >= -1.0);
  CHECK(ssim(x, y) <= 1.0);

  ImageTensor tiny(8, 8);
  CHECK_THROWS_AS(ssim(tiny, tiny), std::invalid_argument);
}

TEST_CASE("attack_success thresholds manipulated feature similarity") {
  Rng rng(6);
  FeatureNet F(3, 32);
  F.init(rng);
  TranslatorConfig tcfg;
  tcfg.image_h = tcfg.image_w = 32;
  auto G = make_toy_translator("hue_shift_net", tcfg, rng);

  ImageTensor x = smooth_image(32, 32, rng);
  CHECK_FALSE(attack_success(F, *G, x, x, 0.7));  // fcm is exactly 1
  CHECK(attack_success(F, *G, x, x, 1.0));        // cosine never exceeds 1

  ImageTensor x_adv = x;
  Rng noise(7);
  for (auto& v : x_adv.data) v = std::clamp(v + noise.uniform(-0.4, 0.4), -1.0, 1.0);
  ImageTensor gx = batch_image(G->apply(image_to_batch(x)), 0);
  ImageTensor ga = batch_image(G->apply(image_to_batch(x_adv)), 0);
  const double f = fcm(F, gx, ga);
  REQUIRE(f < 1.0);
  REQUIRE(f > -1.0);
  CHECK(attack_success(F, *G, x, x_adv, f + 1e-9));
  CHECK_FALSE(attack_success(F, *G, x, x_adv, f - 1e-9));
  bool prev = false;
  for (double gamma : {0.0, 0.25, 0.5, 0.75, 0.9, 1.0}) {
    const bool now = attack_success(F, *G, x, x_adv, gamma);
    CHECK((!prev || now));  // success is monotone in gamma
    prev = now;
  }
}

TEST_CASE("corruptions stay in range and hit their documented edges") {
  Rng rng(8);
  ImageTensor img = smooth_image(64, 64, rng);

  Rng crng(1);
  CHECK(corrupt(img, CorruptionKind::cropout, 0.0, crng).data == img.data);
  ImageTensor cropped = corrupt(img, CorruptionKind::cropout, 0.25, crng);
  std::int64_t zeros = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (cropped.at(0, y, x) == 0.0 && cropped.at(1, y, x) == 0.0 && cropped.at(2, y, x) == 0.0)
        ++zeros;
    }
  }
  CHECK(zeros >= 1024);  // a 32x32 block of a 64x64 image is exactly a quarter
  CHECK(zeros <= 1100);
  Rng crng_a(1), crng_b(1), crng_c(999);
  ImageTensor det1 = corrupt(img, CorruptionKind::cropout, 0.25, crng_a);
  ImageTensor det2 = corrupt(img, CorruptionKind::cropout, 0.25, crng_b);
  CHECK(det1.data == det2.data);
  // consumed state positions the next rectangle elsewhere
  CHECK(corrupt(img, CorruptionKind::cropout, 0.25, crng_c).data != det1.data);
  CHECK_THROWS_AS(corrupt(img, CorruptionKind::cropout, 1.0, crng), std::invalid_argument);
  CHECK_THROWS_AS(corrupt(img, CorruptionKind::cropout, -0.1, crng), std::invalid_argument);

  CHECK(max_abs_diff(corrupt(img, CorruptionKind::gaussian_blur, 1e-3, crng), img) <= 1e-6);
  ImageTensor noisy = random_image(64, 64, rng);
  ImageTensor blurred = corrupt(noisy, CorruptionKind::gaussian_blur, 2.0, crng);
  validate_image(blurred);
  auto variance = [](const ImageTensor& t) {
    double mean = 0.0;
    for (double v : t.data) mean += v;
    mean /= double(t.data.size());
    double var = 0.0;
    for (double v : t.data) var += (v - mean) * (v - mean);
    return var / double(t.data.size());
  };
  CHECK(variance(blurred) < 0.5 * variance(noisy));
  CHECK_THROWS_AS(corrupt(img, CorruptionKind::gaussian_blur, 0.0, crng), std::invalid_argument);
  CHECK_THROWS_AS(corrupt(img, CorruptionKind::gaussian_blur, -1.0, crng), std::invalid_argument);

  ImageTensor fine = corrupt(img, CorruptionKind::jpeg, 100, crng);
  validate_image(fine);
  CHECK(psnr(img, fine) >= 40.0);
  CHECK(psnr(img, corrupt(img, CorruptionKind::jpeg, 90, crng)) >
        psnr(img, corrupt(img, CorruptionKind::jpeg, 10, crng)));
  CHECK(corrupt(img, CorruptionKind::jpeg, 50, crng).data == jpeg_roundtrip(img, 50).data);
  CHECK_THROWS_AS(corrupt(img, CorruptionKind::jpeg, 0, crng), std::invalid_argument);
  CHECK_THROWS_AS(corrupt(img, CorruptionKind::jpeg, 101, crng), std::invalid_argument);
  CHECK_THROWS_AS(corrupt(img, CorruptionKind::jpeg, std::nan(""), crng), std::invalid_argument);

  CHECK(corruption_from_string("jpeg") == CorruptionKind::jpeg);
  CHECK(corruption_from_string("gaussian_blur") == CorruptionKind::gaussian_blur);
  CHECK(corruption_from_string("cropout") == CorruptionKind::cropout);
  CHECK(to_string(CorruptionKind::cropout) == "cropout");
  CHECK_THROWS_AS(corruption_from_string("saltpepper"), std::invalid_argument);
}

TEST_CASE("spectrogram concentrates energy where the signal lives") {
  ImageTensor flat(16, 16);
  for (auto& v : flat.data) v = 0.3;
  Tensor spec = spectrogram(flat);
  REQUIRE(spec.shape == std::vector<int>{16, 16});
  CHECK(spec.data[8 * 16 + 8] > 1.0);  // DC bin at the center
  for (int u = 0; u < 16; ++u) {
    for (int v = 0; v < 16; ++v) {
      if (u == 8 && v == 8) continue;
      CHECK(spec.data[u * 16 + v] <= 1e-9);
    }
  }

  // Horizontal cosine with 3 periods: one symmetric pair of peaks.
  ImageTensor wave(16, 16);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        wave.at(c, y, x) = 0.5 * std::cos(2.0 * M_PI * 3.0 * x / 16.0);
      }
    }
  }
  Tensor wspec = spectrogram(wave);
  CHECK(wspec.data[8 * 16 + (8 + 3)] > 3.0);
  CHECK(wspec.data[8 * 16 + (8 - 3)] > 3.0);
  for (int u = 0; u < 16; ++u) {
    for (int v = 0; v < 16; ++v) {
      if (u == 8 && (v == 5 || v == 11)) continue;
      CHECK(wspec.data[u * 16 + v] <= 1e-9);
    }
  }

  // The magnitude map ignores circular translation.
  Rng rng(9);
  ImageTensor a = smooth_image(32, 32, rng);
  ImageTensor shifted(32, 32);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        shifted.at(c, (y + 5) % 32, (x + 9) % 32) = a.at(c, y, x);
      }
    }
  }
  Tensor sa = spectrogram(a), sb = spectrogram(shifted);
  double worst = 0.0;
  for (std::size_t i = 0; i < sa.data.size(); ++i) {
    worst = std::max(worst, std::abs(sa.data[i] - sb.data[i]));
  }
  CHECK(worst <= 1e-6);

  // Manipulation visibly changes the spectrum; panels render side by side.
  TranslatorConfig tcfg;
  tcfg.image_h = tcfg.image_w = 32;
  Rng trng(5);
  auto hue = make_toy_translator("hue_shift_net", tcfg, trng);
  ImageTensor face = make_toy_dataset(1, 32, 32, 77).faces[0].image;
  ImageTensor manip = batch_image(hue->apply(image_to_batch(face)), 0);
  Tensor sf = spectrogram(face), sm = spectrogram(manip);
  double diff = 0.0;
  for (std::size_t i = 0; i < sf.data.size(); ++i) diff += std::abs(sf.data[i] - sm.data[i]);
  CHECK(diff / double(sf.data.size()) > 1e-6);

  std::string dir = fresh_dir("eval_spec");
  write_spectrogram_png(sf, dir + "/single.png");
  ImageTensor single = read_image(dir + "/single.png");
  CHECK(single.height == 32);
  CHECK(single.width == 32);
  write_spectrogram_panel({face, manip}, dir + "/panel.png");
  ImageTensor panel = read_image(dir + "/panel.png");
  CHECK(panel.height == 32);
  CHECK(panel.width == 2 * 32 + 8);
  CHECK_THROWS_AS(write_spectrogram_panel({}, dir + "/empty.png"), std::invalid_argument);
}

TEST_CASE("roc sweeps thresholds and ranks separability") {
  RocResult perfect = roc({0.9, 0.8, 0.1, 0.2}, {true, true, false, false});
  CHECK(perfect.auroc == 1.0);
  CHECK(perfect.fpr_at_tpr95 == 0.0);
  CHECK(perfect.detacc == 1.0);
  REQUIRE(perfect.curve.size() >= 2);
  CHECK(perfect.curve.front().fpr == 0.0);
  CHECK(perfect.curve.front().tpr == 0.0);
  CHECK(perfect.curve.back().fpr == 1.0);
  CHECK(perfect.curve.back().tpr == 1.0);
  for (std::size_t i = 1; i < perfect.curve.size(); ++i) {
    CHECK(perfect.curve[i].fpr >= perfect.curve[i - 1].fpr);
    CHECK(perfect.curve[i].tpr >= perfect.curve[i - 1].tpr);
  }

  // Hand-checked small case: positive ranks 2 and 4 of 4 give AUROC 3/4;
  // the best threshold classifies 3 of 4; TPR reaches 0.95 only at FPR 1/2.
  RocResult hand = roc({0.1, 0.4, 0.35, 0.8}, {false, false, true, true});
  CHECK(hand.auroc == 0.75);
  CHECK(hand.detacc == 0.75);
  CHECK(hand.fpr_at_tpr95 == 0.5);

  CHECK(roc({0.5, 0.5}, {false, true}).auroc == 0.5);  // cross-class tie midranks

  std::vector<double> scores;
  std::vector<bool> labels;
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    scores.push_back(rng.uniform());
    labels.push_back(i % 2 == 0);
  }
  RocResult chance = roc(scores, labels);
  CHECK(std::abs(chance.auroc - 0.5) <= 0.05);

  std::vector<double> rescaled = scores;
  for (double& s : rescaled) s = 2.0 * s + 1.0;
  RocResult same = roc(rescaled, labels);
  CHECK(same.auroc == chance.auroc);
  CHECK(same.fpr_at_tpr95 == chance.fpr_at_tpr95);
  CHECK(same.detacc == chance.detacc);

  CHECK_THROWS_AS(roc({0.1, 0.2}, {true, true}), std::invalid_argument);
  CHECK_THROWS_AS(roc({0.1, 0.2}, {false, false}), std::invalid_argument);
  CHECK_THROWS_AS(roc({0.1}, {true, false}), std::invalid_argument);
  CHECK_THROWS_AS(roc({std::nan(""), 0.2}, {true, false}), std::invalid_argument);
}

TEST_CASE("evaluate_suite aggregates deterministic tagged cells") {
  ModelBundle& b = trained_bundle();
  TargetRegistry& reg = toy_targets();
  Hyperparams hp = eval_hp();
  ToyDataset data = make_toy_dataset(16, 32, 32, 321);

  EvalOptions opts;
  opts.n_images = 12;
  opts.jpeg_qualities = {50};
  opts.blur_sigmas = {1.0};
  opts.cropout_fracs = {0.25};

  ToyDataset empty;
  CHECK_THROWS_AS(evaluate_suite(b, reg, empty, hp, opts), std::invalid_argument);
  auto saved = std::move(*b.extractor);
  b.extractor.reset();
  CHECK_THROWS_AS(evaluate_suite(b, reg, data, hp, opts), ConfigError);
  b.extractor.emplace(std::move(saved));

  EvalReport report = evaluate_suite(b, reg, data, hp, opts);
  CHECK(report.n == 12);
  CHECK(report.seed == hp.seed);
  auto cell = [&report](const std::string& metric, const std::string& detail) -> const EvalCell& {
    for (const auto& c : report.cells) {
      if (c.metric == metric && c.detail == detail) return c;
    }
    REQUIRE_MESSAGE(false, "missing cell ", metric, "/", detail);
    static EvalCell dummy;
    return dummy;
  };
  for (const auto& c : report.cells) {
    CHECK(c.n == 12);
    CHECK(c.seed == hp.seed);
  }
  CHECK(report.cells.size() == 3 + 3 + 2 + 3);  // base, corruptions, targets, roc

  CHECK(cell("psnr", "clean").value >= 10.0);
  CHECK(cell("ssim", "clean").value <= 1.0);
  CHECK(cell("ber", "clean").value <= 0.02);
  CHECK(cell("ber", "jpeg_q50").value >= cell("ber", "clean").value);
  CHECK(cell("ber", "blur_s1").value >= 0.0);
  CHECK(cell("ber", "cropout_f0.25").value >= 0.0);
  CHECK(cell("asr", "hue_shift_net").value >= 0.0);
  CHECK(cell("asr", "hue_shift_net").value <= 1.0);
  CHECK(cell("asr", "smooth_warp_net").value >= 0.0);
  CHECK(cell("auroc", "message_score").value > 0.55);  // protected scores rank higher
  CHECK(cell("auroc", "message_score").value == report.protection_roc.auroc);
  CHECK(cell("detacc", "message_score").value >= 0.5);
  CHECK(cell("fpr_at_tpr95", "message_score").value >= 0.0);

  EvalReport rerun = evaluate_suite(b, reg, data, hp, opts);
  CHECK(rerun.cells == report.cells);
  CHECK(rerun.protection_roc.auroc == report.protection_roc.auroc);

  std::string dir = fresh_dir("eval_suite");
  opts.out_dir = dir;
  evaluate_suite(b, reg, data, hp, opts);
  CHECK(std::filesystem::exists(dir + "/report.tsv"));
  CHECK(std::filesystem::exists(dir + "/roc_curve.tsv"));
  CHECK(std::filesystem::exists(dir + "/roc.png"));
  CHECK(std::filesystem::exists(dir + "/spectrogram_panel.png"));
  std::ifstream in(dir + "/report.tsv");
  std::string line;
  std::size_t lines = 0, headers = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') ++headers;
    ++lines;
  }
  CHECK(headers == 2);
  CHECK(lines == report.cells.size() + 2);

  std::ostringstream first;
  first << std::ifstream(dir + "/report.tsv").rdbuf();
  std::string again = fresh_dir("eval_suite2");
  opts.out_dir = again;
  evaluate_suite(b, reg, data, hp, opts);
  std::ostringstream second;
  second << std::ifstream(again + "/report.tsv").rdbuf();
  CHECK(first.str() == second.str());
}
