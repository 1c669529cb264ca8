#include "advmark/perceptual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "advmark/archive.hpp"
#include "advmark/errors.hpp"

namespace advmark {

double cosine_similarity(const double* a, const double* b, int n) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < 1e-12 || nb < 1e-12)
    throw DegenerateInputError("cosine of a zero-norm feature vector");
  return dot / (na * nb);
}

std::vector<double> features(FeatureNet& f, const ImageTensor& img) {
  validate_image(img);
  const Tensor out = f.features(image_to_batch(img));
  return {out.data.begin(), out.data.end()};
}

double fcm(FeatureNet& f, const ImageTensor& a, const ImageTensor& b) {
  const std::vector<double> fa = features(f, a);
  const std::vector<double> fb = features(f, b);
  return cosine_similarity(fa.data(), fb.data(), static_cast<int>(fa.size()));
}

FeatureNet train_attribute_extractor(const ToyDataset& data, const ExtractorConfig& cfg, Rng& rng,
                                     double* holdout_accuracy) {
  if (data.size() < 1) throw std::invalid_argument("extractor training needs a nonempty dataset");

  FeatureNet net(ToyDataset::kAttributes, cfg.feature_dim);
  net.init(rng);

  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

  const int holdout = std::min(data.size() - 1,
                               static_cast<int>(std::lround(cfg.holdout_frac * data.size())));
  const std::vector<int> train_idx(order.begin(), order.end() - holdout);
  const std::vector<int> val_idx(order.end() - holdout, order.end());

  std::vector<nn::Param*> params;
  net.collect_params("extractor", params);
  nn::Adam opt(params, cfg.learning_rate);

  const int k = ToyDataset::kAttributes;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> shuffled = train_idx;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    for (std::size_t off = 0; off < shuffled.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<int> batch_idx(
          shuffled.begin() + static_cast<std::ptrdiff_t>(off),
          shuffled.begin() + static_cast<std::ptrdiff_t>(std::min(off + cfg.batch_size, shuffled.size())));
      const Tensor x = faces_to_batch(data, batch_idx);
      const Tensor y = attrs_to_labels(data, batch_idx);
      const int n = x.shape[0];

      Tensor z = net.logits(x);
      Tensor dz(z.shape);
      for (std::size_t i = 0; i < z.count(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-z.data[i]));
        dz.data[i] = (p - y.data[i]) / static_cast<double>(n * k);
      }
      opt.zero_grad();
      net.backward_logits(dz);
      opt.step();
    }
  }

  if (holdout_accuracy != nullptr) {
    if (val_idx.empty()) {
      *holdout_accuracy = 0.0;
    } else {
      const Tensor x = faces_to_batch(data, val_idx);
      const Tensor y = attrs_to_labels(data, val_idx);
      const Tensor z = net.logits(x);
      int correct = 0;
      for (std::size_t i = 0; i < z.count(); ++i)
        correct += (z.data[i] > 0.0) == (y.data[i] > 0.5);
      *holdout_accuracy = static_cast<double>(correct) / static_cast<double>(z.count());
    }
  }
  return net;
}

void save_extractor(FeatureNet& f, const std::string& path) {
  nlohmann::json meta;
  meta["kind"] = "feature_extractor";
  meta["attributes"] = f.attribute_count();
  meta["feature_dim"] = f.feature_dim();
  std::vector<nn::Param*> params;
  f.collect_params("extractor", params);
  std::vector<std::pair<std::string, const Tensor*>> arrays;
  for (nn::Param* p : params) arrays.emplace_back(p->name, &p->value);
  write_archive(path, meta, arrays);
}

FeatureNet load_extractor(const std::string& path) {
  Archive a = read_archive(path);
  if (a.meta.value("kind", "") != "feature_extractor")
    throw FormatError("not a feature extractor checkpoint: " + path);
  FeatureNet f(a.meta.at("attributes").get<int>(), a.meta.at("feature_dim").get<int>());
  std::vector<nn::Param*> params;
  f.collect_params("extractor", params);
  load_named_params(params, a.arrays);
  return f;
}

}  // namespace advmark
