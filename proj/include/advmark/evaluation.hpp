#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advmark/dataset.hpp"
#include "advmark/hyperparams.hpp"
#include "advmark/image.hpp"
#include "advmark/networks.hpp"
#include "advmark/rng.hpp"
#include "advmark/targets.hpp"
#include "advmark/tensor.hpp"

namespace advmark {

// Peak signal-to-noise ratio in dB with peak equal to the full canonical
// range (2.0). Identical under any affine rescaling applied to both images,
// so values match the usual 255-peak convention on 8-bit data exactly.
// Identical images return +infinity.
double psnr(const ImageTensor& a, const ImageTensor& b);

// Mean structural similarity over all channels and all 11x11 windows that
// fit entirely inside the image (Gaussian weights, sigma 1.5, K1=0.01,
// K2=0.03, dynamic range 2.0). Requires both dimensions >= 11.
double ssim(const ImageTensor& a, const ImageTensor& b);

// The protection counts as a successful attack when the manipulated
// protected image no longer resembles the manipulated original:
// fcm(G(x_in), G(x_adv)) <= gamma.
bool attack_success(FeatureNet& F, ManipulationTarget& G, const ImageTensor& x_in,
                    const ImageTensor& x_adv, double gamma);

enum class CorruptionKind { jpeg, gaussian_blur, cropout };
CorruptionKind corruption_from_string(const std::string& name);
std::string to_string(CorruptionKind kind);

// jpeg: real codec roundtrip at integer quality in [1,100] (param rounded).
// gaussian_blur: sigma > 0, kernel radius ceil(3*sigma), reflect padding.
// cropout: zeroes a seeded axis-aligned rectangle covering about `param`
// of the pixels, param in [0,1); 0 is the identity. Out-of-range
// parameters raise invalid-argument. Only cropout consumes the rng.
ImageTensor corrupt(const ImageTensor& img, CorruptionKind kind, double param, Rng& rng);

// log(1 + |centered 2D DFT|) of the luma channel; DC lands at (h/2, w/2).
// Returns a (h, w) tensor. The map is invariant to circular translation.
Tensor spectrogram(const ImageTensor& img);

// Renders one magnitude map (normalized to its own peak) or several side by
// side (normalized to the common peak, 8px separators) as grayscale PNGs.
void write_spectrogram_png(const Tensor& spec, const std::string& path);
void write_spectrogram_panel(const std::vector<ImageTensor>& images, const std::string& path);

struct RocPoint {
  double threshold;  // predict positive when score >= threshold
  double fpr;
  double tpr;
};

struct RocResult {
  double auroc = 0.0;         // rank statistic, ties averaged
  double fpr_at_tpr95 = 0.0;  // lowest FPR among points with TPR >= 0.95
  double detacc = 0.0;        // best accuracy over the enumerated thresholds
  std::vector<RocPoint> curve;
};

// Threshold-sweep ROC treating higher scores as the positive class. All
// metrics depend only on score ranks, hence are invariant under strictly
// increasing transforms. Throws invalid-argument unless both classes are
// present and sizes match.
RocResult roc(const std::vector<double>& scores, const std::vector<bool>& labels);

// One aggregate number plus its provenance (sample count and seed).
struct EvalCell {
  std::string metric;  // e.g. "psnr", "ber", "asr", "auroc"
  std::string detail;  // e.g. "clean", "jpeg_q50", target name
  double value = 0.0;
  int n = 0;
  std::uint64_t seed = 0;

  bool operator==(const EvalCell&) const = default;
};

struct EvalOptions {
  int n_images = 0;  // 0 means the whole dataset
  std::vector<int> jpeg_qualities = {10, 30, 50, 70, 90};
  std::vector<double> blur_sigmas = {0.5, 1.0, 2.0};
  std::vector<double> cropout_fracs = {0.1, 0.25, 0.5};
  std::string out_dir;  // when nonempty: report.tsv, roc.png, spectrogram_panel.png
};

struct EvalReport {
  std::uint64_t seed = 0;
  int n = 0;
  std::vector<EvalCell> cells;
  RocResult protection_roc;  // message score: protected vs clean
};

// Embeds a fresh message into each of the first n images (strength
// hp.beta), then aggregates: PSNR/SSIM to the originals, clean-decode BER,
// BER under every requested corruption level, per-target attack success at
// hp.gamma, and the protection-detection ROC over message scores.
// Deterministic given hp.seed. A nonempty registry requires b.extractor.
EvalReport evaluate_suite(ModelBundle& b, const TargetRegistry& registry,
                          const ToyDataset& data, const Hyperparams& hp,
                          const EvalOptions& opts = {});

void write_report(const EvalReport& report, const std::string& dir);

}  // namespace advmark
