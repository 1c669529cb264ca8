#pragma once

#include <memory>
#include <string>
#include <vector>

#include "advmark/dataset.hpp"
#include "advmark/nn.hpp"
#include "advmark/rng.hpp"
#include "advmark/tensor.hpp"

namespace advmark {

// A differentiable image-to-image system the perturbation must disrupt.
// apply preserves shape and the [-1,1] range; backward is the vector-Jacobian
// product for the most recent apply call.
class ManipulationTarget {
 public:
  virtual ~ManipulationTarget() = default;
  virtual const std::string& name() const = 0;
  virtual bool differentiable() const { return true; }
  virtual Tensor apply(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void save(const std::string& path) = 0;
};

struct TranslatorConfig {
  int image_h = 64, image_w = 64;
  const ToyDataset* dataset = nullptr;  // required by trained_attribute_ae
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 1e-3;
};

// kind is one of: hue_shift_net (fixed convex channel mixing),
// smooth_warp_net (fixed differentiable coordinate warp),
// trained_attribute_ae (small encoder-decoder trained to flip the glasses
// attribute on the toy dataset). Unknown kind -> invalid-argument.
std::shared_ptr<ManipulationTarget> make_toy_translator(const std::string& kind,
                                                        const TranslatorConfig& cfg, Rng& rng);

std::shared_ptr<ManipulationTarget> load_target(const std::string& path);

// Ordered collection with unique names; training iterates in insertion order.
class TargetRegistry {
 public:
  void add(std::shared_ptr<ManipulationTarget> target);
  std::vector<std::string> names() const;
  const std::vector<std::shared_ptr<ManipulationTarget>>& targets() const { return targets_; }
  bool empty() const { return targets_.empty(); }
  std::size_t size() const { return targets_.size(); }

 private:
  std::vector<std::shared_ptr<ManipulationTarget>> targets_;
};

}  // namespace advmark
