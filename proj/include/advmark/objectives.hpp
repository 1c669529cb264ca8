#pragma once

#include <map>
#include <string>
#include <vector>

#include "advmark/hyperparams.hpp"
#include "advmark/image.hpp"
#include "advmark/message.hpp"
#include "advmark/networks.hpp"
#include "advmark/perceptual.hpp"
#include "advmark/spectral.hpp"
#include "advmark/targets.hpp"

namespace advmark {

struct LossReport {
  double l_E = 0.0;  // reconstruction MSE
  double l_C = 0.0;  // realism log-likelihood term
  double l_A = 0.0;  // mean feature similarity after manipulation
  double l_D = 0.0;  // message MSE through the diffusion path
  double total = 0.0;
  double l_M = 0.0;  // clean-path message MSE, diagnostic only
  std::map<std::string, double> per_target_l_A;
};

double loss_reconstruction(const ImageTensor& x_in, const ImageTensor& x_adv);

// log(real) + log(1 - adv), scores clamped to [eps, 1-eps], eps = 1e-7.
// The discriminator ascends this; the encoder descends it through the adv
// term only.
double loss_gan(double score_real, double score_adv);

// Mean over registered targets of the feature cosine between the manipulated
// clean image and the manipulated perturbed image. The clean branch is a
// constant reference (no gradients flow through it).
double loss_attack(FeatureNet& extractor, const TargetRegistry& registry,
                   const ImageTensor& x_in, const ImageTensor& x_adv,
                   std::map<std::string, double>* per_target = nullptr);

// MSE between the message and its decode after re-encoding and diffusing.
// A fresh quantization table is drawn from rng per call.
double loss_message(ModelBundle& b, const ImageTensor& x_in, const Message& msg, Rng& rng);

// Deterministic variant with an explicit table. When with_grads is set, the
// lambda-free gradients of the loss are accumulated into the encoder and
// decoder parameter slots.
double loss_message_traced(ModelBundle& b, const ImageTensor& x_in, const Message& msg,
                           const spectral::QuantTable& table, bool with_grads = false);

// Weighted sum with hp's lambda values. Throws NumericError naming the first
// non-finite part.
LossReport combined_loss(const Hyperparams& hp, double l_E, double l_C, double l_A, double l_D);

// Full training objective on a batch. Fills out's parts and diagnostics, then
// sets out.total through combined_loss (so a non-finite part throws with the
// raw parts still readable in out). When with_grads is set, lambda-weighted
// gradients for the encoder and decoder parameters are accumulated; the
// discriminator and extractor parameters are read but never stepped by this
// path. tables supplies one quantization table per batch image; with
// use_diffusion false the decode runs directly on the perturbed images.
void joint_loss(ModelBundle& b, FeatureNet* extractor, const TargetRegistry* registry,
                const Hyperparams& hp, const Tensor& x, const std::vector<Message>& msgs,
                const std::vector<spectral::QuantTable>& tables, bool use_diffusion,
                bool with_grads, LossReport& out);

// Realism loss on a real/perturbed batch pair for the discriminator's own
// update. When with_grads is set, gradients of the NEGATED loss go into the
// discriminator parameters, so a descending optimizer ascends the loss.
double discriminator_gan_loss(ModelBundle& b, const Tensor& x_real, const Tensor& x_adv,
                              bool with_grads);

// Projected-gradient baseline: sign-ascent on MSE(G(x), G(x0)) with an
// L-infinity budget eps around x0 and the canonical range clamp.
ImageTensor pgd_mse_attack(ManipulationTarget& g, const ImageTensor& x0, double eps, double step,
                           int iters);

}  // namespace advmark
