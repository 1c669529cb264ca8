#include "advmark/evaluation.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

#include "advmark/errors.hpp"
#include "advmark/imageio.hpp"
#include "advmark/message.hpp"
#include "advmark/perceptual.hpp"
#include "advmark/protection.hpp"

namespace advmark {
namespace {

constexpr double kPeak = 2.0;  // full canonical range

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* who) {
  validate_image(a);
  validate_image(b);
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
  }
}

std::string format_param(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double luma_at(const ImageTensor& img, int y, int x) {
  return 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
}

}  // namespace

double psnr(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "psnr");
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeak * kPeak / mse);
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "ssim");
  constexpr int kWin = 11, kHalf = 5;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = (0.01 * kPeak) * (0.01 * kPeak);
  constexpr double kC2 = (0.03 * kPeak) * (0.03 * kPeak);
  if (a.height < kWin || a.width < kWin) {
    throw std::invalid_argument("ssim: images smaller than the 11x11 window");
  }
  double w[kWin][kWin];
  double wsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    for (int j = 0; j < kWin; ++j) {
      const double dy = i - kHalf, dx = j - kHalf;
      w[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
      wsum += w[i][j];
    }
  }
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) w[i][j] /= wsum;

  double total = 0.0;
  std::int64_t count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y = kHalf; y < a.height - kHalf; ++y) {
      for (int x = kHalf; x < a.width - kHalf; ++x) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < kWin; ++i) {
          for (int j = 0; j < kWin; ++j) {
            const double va = a.at(c, y + i - kHalf, x + j - kHalf);
            const double vb = b.at(c, y + i - kHalf, x + j - kHalf);
            mx += w[i][j] * va;
            my += w[i][j] * vb;
            xx += w[i][j] * (va * va);
            yy += w[i][j] * (vb * vb);
            xy += w[i][j] * (va * vb);  // grouped so the result is symmetric
          }
        }
        const double sx = xx - mx * mx, sy = yy - my * my, sxy = xy - mx * my;
        total += ((2.0 * mx * my + kC1) * (2.0 * sxy + kC2)) /
                 ((mx * mx + my * my + kC1) * (sx + sy + kC2));
        ++count;
      }
    }
  }
  return total / double(count);
}

bool attack_success(FeatureNet& F, ManipulationTarget& G, const ImageTensor& x_in,
                    const ImageTensor& x_adv, double gamma) {
  require_same_shape(x_in, x_adv, "attack_success");
  ImageTensor g_in = batch_image(G.apply(image_to_batch(x_in)), 0);
  ImageTensor g_adv = batch_image(G.apply(image_to_batch(x_adv)), 0);
  return fcm(F, g_in, g_adv) <= gamma;
}

CorruptionKind corruption_from_string(const std::string& name) {
  if (name == "jpeg") return CorruptionKind::jpeg;
  if (name == "gaussian_blur") return CorruptionKind::gaussian_blur;
  if (name == "cropout") return CorruptionKind::cropout;
  throw std::invalid_argument("unknown corruption kind: " + name);
}

std::string to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::jpeg: return "jpeg";
    case CorruptionKind::gaussian_blur: return "gaussian_blur";
    case CorruptionKind::cropout: return "cropout";
  }
  throw std::invalid_argument("unknown corruption kind");
}

namespace {

ImageTensor corrupt_blur(const ImageTensor& img, double sigma) {
  if (!std::isfinite(sigma) || sigma <= 0.0) {
    throw std::invalid_argument("gaussian_blur: sigma must be positive");
  }
  int k = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  const int kmax = 2 * std::min(img.height, img.width) - 1;
  k = std::min(k, kmax % 2 == 1 ? kmax : kmax - 1);
  cv::Mat src(img.height, img.width, CV_64FC3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      auto& px = src.at<cv::Vec3d>(y, x);
      for (int c = 0; c < 3; ++c) px[c] = img.at(c, y, x);
    }
  }
  cv::Mat dst;
  cv::GaussianBlur(src, dst, cv::Size(k, k), sigma, sigma, cv::BORDER_REFLECT);
  ImageTensor out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto& px = dst.at<cv::Vec3d>(y, x);
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = px[c];
    }
  }
  clamp_image(out);  // convex weights keep values in range up to rounding
  return out;
}

ImageTensor corrupt_cropout(const ImageTensor& img, double frac, Rng& rng) {
  if (!std::isfinite(frac) || frac < 0.0 || frac >= 1.0) {
    throw std::invalid_argument("cropout: fraction must lie in [0,1)");
  }
  ImageTensor out = img;
  if (frac == 0.0) return out;  // identity, consumes no randomness
  const int h = img.height, w = img.width;
  int rh = std::clamp<int>(static_cast<int>(std::llround(std::sqrt(frac) * h)), 1, h);
  int rw = std::clamp<int>(static_cast<int>(std::llround(frac * h * w / double(rh))), 1, w);
  const int y0 = static_cast<int>(rng.uniform_int(0, h - rh));
  const int x0 = static_cast<int>(rng.uniform_int(0, w - rw));
  for (int c = 0; c < 3; ++c) {
    for (int y = y0; y < y0 + rh; ++y) {
      for (int x = x0; x < x0 + rw; ++x) out.at(c, y, x) = 0.0;
    }
  }
  return out;
}

}  // namespace

ImageTensor corrupt(const ImageTensor& img, CorruptionKind kind, double param, Rng& rng) {
  validate_image(img);
  switch (kind) {
    case CorruptionKind::jpeg: {
      const int q = static_cast<int>(std::llround(param));
      if (!std::isfinite(param) || q < 1 || q > 100) {
        throw std::invalid_argument("jpeg: quality must lie in [1,100]");
      }
      return jpeg_roundtrip(img, q);
    }
    case CorruptionKind::gaussian_blur:
      return corrupt_blur(img, param);
    case CorruptionKind::cropout:
      return corrupt_cropout(img, param, rng);
  }
  throw std::invalid_argument("unknown corruption kind");
}

Tensor spectrogram(const ImageTensor& img) {
  validate_image(img);
  const int h = img.height, w = img.width;
  const int wc = w / 2 + 1;
  double* in = fftw_alloc_real(static_cast<std::size_t>(h) * w);
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(h) * wc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) in[y * w + x] = luma_at(img, y, x);
  }
  fftw_plan plan = fftw_plan_dft_r2c_2d(h, w, in, out, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  Tensor spec({h, w});
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      int uu = u, vv = v;
      if (vv >= wc) {  // Hermitian half-spectrum: mirror the missing columns
        uu = (h - u) % h;
        vv = (w - v) % w;
      }
      const double re = out[uu * wc + vv][0];
      const double im = out[uu * wc + vv][1];
      const int ci = (u + h / 2) % h;
      const int cj = (v + w / 2) % w;
      spec.data[static_cast<std::size_t>(ci) * w + cj] = std::log1p(std::hypot(re, im));
    }
  }
  fftw_free(in);
  fftw_free(out);
  return spec;
}

namespace {

ImageTensor spec_to_gray(const Tensor& spec, double peak) {
  const int h = spec.shape[0], w = spec.shape[1];
  ImageTensor img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = peak > 0.0 ? spec.data[static_cast<std::size_t>(y) * w + x] / peak : 0.0;
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = std::clamp(2.0 * v - 1.0, -1.0, 1.0);
    }
  }
  return img;
}

}  // namespace

void write_spectrogram_png(const Tensor& spec, const std::string& path) {
  if (spec.shape.size() != 2) throw std::invalid_argument("spectrogram map must be 2D");
  const double peak = *std::max_element(spec.data.begin(), spec.data.end());
  write_png(spec_to_gray(spec, peak), path);
}

void write_spectrogram_panel(const std::vector<ImageTensor>& images, const std::string& path) {
  if (images.empty()) throw std::invalid_argument("spectrogram panel needs at least one image");
  std::vector<Tensor> specs;
  specs.reserve(images.size());
  double peak = 0.0;
  for (const auto& img : images) {
    if (img.height != images[0].height || img.width != images[0].width) {
      throw std::invalid_argument("spectrogram panel images must share one shape");
    }
    specs.push_back(spectrogram(img));
    peak = std::max(peak, *std::max_element(specs.back().data.begin(), specs.back().data.end()));
  }
  const int h = images[0].height, w = images[0].width;
  const int gap = 8;  // keeps the panel width a multiple of 8
  const int k = static_cast<int>(specs.size());
  ImageTensor panel(h, k * w + (k - 1) * gap);
  for (auto& v : panel.data) v = -1.0;
  for (int s = 0; s < k; ++s) {
    ImageTensor gray = spec_to_gray(specs[static_cast<std::size_t>(s)], peak);
    const int x0 = s * (w + gap);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) panel.at(c, y, x0 + x) = gray.at(c, y, x);
      }
    }
  }
  write_png(panel, path);
}

RocResult roc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  const std::size_t n = scores.size();
  if (labels.size() != n) throw std::invalid_argument("roc: scores/labels size mismatch");
  std::size_t pos = 0;
  for (bool l : labels) pos += l ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc: both classes must be present");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("roc: non-finite score");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

  // AUROC as the Mann-Whitney statistic with midranks for ties.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * double(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) pos_rank_sum += midrank;
    }
    i = j;
  }
  RocResult r;
  r.auroc = (pos_rank_sum - 0.5 * double(pos) * double(pos + 1)) / (double(pos) * double(neg));

  // Threshold sweep from +inf down through every distinct score.
  r.curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double best_acc = double(neg) / double(n);  // predict-nothing baseline
  double fpr95 = 1.0;
  bool fpr95_set = false;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = n; i > 0;) {
    std::size_t j = i;
    const double t = scores[order[i - 1]];
    while (j > 0 && scores[order[j - 1]] == t) {
      if (labels[order[j - 1]]) ++tp;
      else ++fp;
      --j;
    }
    i = j;
    const double tpr = double(tp) / double(pos);
    const double fpr = double(fp) / double(neg);
    r.curve.push_back({t, fpr, tpr});
    best_acc = std::max(best_acc, double(tp + (neg - fp)) / double(n));
    if (!fpr95_set && tpr >= 0.95) {
      fpr95 = fpr;
      fpr95_set = true;
    }
  }
  r.fpr_at_tpr95 = fpr95;
  r.detacc = best_acc;
  return r;
}

namespace {

ImageTensor render_roc(const RocResult& r) {
  const int dim = 256;
  ImageTensor img(dim, dim);
  for (auto& v : img.data) v = -1.0;
  for (int i = 0; i < dim; ++i) {
    for (int c = 0; c < 3; ++c) img.at(c, dim - 1 - i, i) = 0.0;  // chance diagonal
  }
  auto plot = [&img, dim](double fpr, double tpr) {
    const int x = std::clamp(static_cast<int>(std::lround(fpr * (dim - 1))), 0, dim - 1);
    const int y = std::clamp(static_cast<int>(std::lround((1.0 - tpr) * (dim - 1))), 0, dim - 1);
    for (int c = 0; c < 3; ++c) img.at(c, y, x) = 1.0;
  };
  for (std::size_t i = 1; i < r.curve.size(); ++i) {
    const auto& a = r.curve[i - 1];
    const auto& b = r.curve[i];
    for (int s = 0; s <= dim; ++s) {
      const double t = double(s) / dim;
      plot(a.fpr + t * (b.fpr - a.fpr), a.tpr + t * (b.tpr - a.tpr));
    }
  }
  return img;
}

}  // namespace

EvalReport evaluate_suite(ModelBundle& b, const TargetRegistry& registry,
                          const ToyDataset& data, const Hyperparams& hp,
                          const EvalOptions& opts) {
  if (data.faces.empty()) throw std::invalid_argument("evaluate_suite: empty dataset");
  if (!registry.empty() && !b.extractor) {
    throw ConfigError("evaluate_suite: attack metrics need the bundle's feature extractor");
  }
  const int total = static_cast<int>(data.faces.size());
  const int n = opts.n_images > 0 ? std::min(opts.n_images, total) : total;

  Rng rng(hp.seed);
  double psnr_sum = 0.0, ssim_sum = 0.0, ber_clean_sum = 0.0;
  struct Level {
    CorruptionKind kind;
    double param;
    std::string detail;
    double ber_sum = 0.0;
  };
  std::vector<Level> lv;
  for (int q : opts.jpeg_qualities)
    lv.push_back({CorruptionKind::jpeg, double(q), "jpeg_q" + format_param(q)});
  for (double s : opts.blur_sigmas)
    lv.push_back({CorruptionKind::gaussian_blur, s, "blur_s" + format_param(s)});
  for (double f : opts.cropout_fracs)
    lv.push_back({CorruptionKind::cropout, f, "cropout_f" + format_param(f)});

  std::vector<double> asr_count(registry.size(), 0.0);
  std::vector<double> scores;
  std::vector<bool> labels;
  scores.reserve(2 * static_cast<std::size_t>(n));
  ImageTensor first_clean, first_protected, first_manipulated;

  for (int i = 0; i < n; ++i) {
    const ImageTensor& x = data.faces[static_cast<std::size_t>(i)].image;
    Message msg = sample_message(hp.L, rng);
    ImageTensor x_adv = encode(b, x, msg);
    ImageTensor x_b = apply_strength(x, x_adv, hp.beta);

    psnr_sum += psnr(x, x_b);
    ssim_sum += ssim(x, x_b);
    ber_clean_sum += bit_error_rate(harden(decode(b, x_b)), msg);
    for (auto& level : lv) {
      ImageTensor corrupted = corrupt(x_b, level.kind, level.param, rng);
      level.ber_sum += bit_error_rate(harden(decode(b, corrupted)), msg);
    }
    scores.push_back(message_score(decode(b, x_b)));
    labels.push_back(true);
    scores.push_back(message_score(decode(b, x)));
    labels.push_back(false);
    for (std::size_t t = 0; t < registry.size(); ++t) {
      ManipulationTarget& g = *registry.targets()[t];
      if (attack_success(*b.extractor, g, x, x_b, hp.gamma)) asr_count[t] += 1.0;
      if (i == 0 && t == 0) first_manipulated = batch_image(g.apply(image_to_batch(x_b)), 0);
    }
    if (i == 0) {
      first_clean = x;
      first_protected = x_b;
    }
  }

  EvalReport report;
  report.seed = hp.seed;
  report.n = n;
  auto cell = [&report, n, &hp](const std::string& metric, const std::string& detail, double v) {
    report.cells.push_back({metric, detail, v, n, hp.seed});
  };
  cell("psnr", "clean", psnr_sum / n);
  cell("ssim", "clean", ssim_sum / n);
  cell("ber", "clean", ber_clean_sum / n);
  for (const auto& level : lv) cell("ber", level.detail, level.ber_sum / n);
  for (std::size_t t = 0; t < registry.size(); ++t) {
    cell("asr", registry.targets()[t]->name(), asr_count[t] / n);
  }
  report.protection_roc = roc(scores, labels);
  cell("auroc", "message_score", report.protection_roc.auroc);
  cell("fpr_at_tpr95", "message_score", report.protection_roc.fpr_at_tpr95);
  cell("detacc", "message_score", report.protection_roc.detacc);

  if (!opts.out_dir.empty()) {
    write_report(report, opts.out_dir);
    std::vector<ImageTensor> panel = {first_clean, first_protected};
    if (!registry.empty()) panel.push_back(first_manipulated);
    write_spectrogram_panel(panel, opts.out_dir + "/spectrogram_panel.png");
  }
  return report;
}

void write_report(const EvalReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/report.tsv");
  if (!out) throw std::runtime_error("cannot write report in " + dir);
  out << "# psnr uses peak 2.0 over the canonical [-1,1] range; identical to the "
         "255-peak convention on 8-bit data because both scale together\n";
  out << "# metric\tdetail\tvalue\tn\tseed\n";
  char buf[64];
  for (const auto& c : report.cells) {
    std::snprintf(buf, sizeof buf, "%.10g", c.value);
    out << c.metric << '\t' << c.detail << '\t' << buf << '\t' << c.n << '\t' << c.seed << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("report write failed in " + dir);

  std::ofstream curve(dir + "/roc_curve.tsv");
  curve << "# threshold\tfpr\ttpr\n";
  for (const auto& p : report.protection_roc.curve) {
    std::snprintf(buf, sizeof buf, "%.10g\t%.10g\t%.10g", p.threshold, p.fpr, p.tpr);
    curve << buf << '\n';
  }
  if (!report.protection_roc.curve.empty()) {
    write_png(render_roc(report.protection_roc), dir + "/roc.png");
  }
}

}  // namespace advmark
