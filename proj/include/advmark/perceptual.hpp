#pragma once

#include <string>
#include <vector>

#include "advmark/dataset.hpp"
#include "advmark/networks.hpp"

namespace advmark {

struct ExtractorConfig {
  int feature_dim = 128;
  int epochs = 12;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double holdout_frac = 0.2;
};

// Trains an attribute classifier with per-attribute binary cross-entropy and
// returns it as the frozen perceptual embedding bank. When holdout_accuracy
// is given, it receives the mean per-attribute accuracy on the held-out split.
FeatureNet train_attribute_extractor(const ToyDataset& data, const ExtractorConfig& cfg, Rng& rng,
                                     double* holdout_accuracy = nullptr);

std::vector<double> features(FeatureNet& f, const ImageTensor& img);

// Cosine similarity of pooled penultimate activations. Symmetric, in [-1,1].
// Throws DegenerateInputError when either feature norm is below 1e-12.
double fcm(FeatureNet& f, const ImageTensor& a, const ImageTensor& b);

// Cosine with a zero-norm guard, shared by the losses.
double cosine_similarity(const double* a, const double* b, int n);

void save_extractor(FeatureNet& f, const std::string& path);
FeatureNet load_extractor(const std::string& path);

}  // namespace advmark
