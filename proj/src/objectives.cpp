#include "advmark/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "advmark/errors.hpp"

namespace advmark {
namespace {

constexpr double kScoreEps = 1e-7;

double clamp_score(double s) { return std::clamp(s, kScoreEps, 1.0 - kScoreEps); }

void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss term ") + term);
}

// Per-sample cosine rows of (N, d) feature matrices; optionally the gradient
// with respect to the second (perturbed-branch) features.
double batch_cosine(const Tensor& fin, const Tensor& fadv, Tensor* dfadv) {
  const int n = fin.shape[0], d = fin.shape[1];
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* a = fin.data.data() + std::size_t(i) * d;
    const double* b = fadv.data.data() + std::size_t(i) * d;
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (int j = 0; j < d; ++j) {
      dot += a[j] * b[j];
      na2 += a[j] * a[j];
      nb2 += b[j] * b[j];
    }
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    if (na < 1e-12 || nb < 1e-12)
      throw DegenerateInputError("cosine of a zero-norm feature vector");
    const double c = dot / (na * nb);
    total += c;
    if (dfadv) {
      double* g = dfadv->data.data() + std::size_t(i) * d;
      for (int j = 0; j < d; ++j) g[j] = a[j] / (na * nb) - c * b[j] / nb2;
    }
  }
  return total / n;
}

}  // namespace

double loss_reconstruction(const ImageTensor& x_in, const ImageTensor& x_adv) {
  if (x_in.height != x_adv.height || x_in.width != x_adv.width)
    throw std::invalid_argument("reconstruction loss needs equal image shapes");
  return mean_squared_error(x_in, x_adv);
}

double loss_gan(double score_real, double score_adv) {
  return std::log(clamp_score(score_real)) + std::log(1.0 - clamp_score(score_adv));
}

double loss_attack(FeatureNet& extractor, const TargetRegistry& registry,
                   const ImageTensor& x_in, const ImageTensor& x_adv,
                   std::map<std::string, double>* per_target) {
  if (registry.empty())
    throw ConfigError("attack loss needs at least one registered manipulation target");
  double sum = 0.0;
  for (const auto& target : registry.targets()) {
    Tensor gin = target->apply(image_to_batch(x_in));
    Tensor gadv = target->apply(image_to_batch(x_adv));
    double c = fcm(extractor, batch_image(gin, 0), batch_image(gadv, 0));
    if (per_target) (*per_target)[target->name()] = c;
    sum += c;
  }
  return sum / double(registry.size());
}

double loss_message(ModelBundle& b, const ImageTensor& x_in, const Message& msg, Rng& rng) {
  return loss_message_traced(b, x_in, msg, spectral::sample_quant_table(rng));
}

double loss_message_traced(ModelBundle& b, const ImageTensor& x_in, const Message& msg,
                           const spectral::QuantTable& table, bool with_grads) {
  Hyperparams hp;
  hp.lambda_E = hp.lambda_C = hp.lambda_A = 0.0;
  hp.lambda_D = 1.0;
  LossReport report;
  joint_loss(b, nullptr, nullptr, hp, image_to_batch(x_in), {msg}, {table}, true, with_grads,
             report);
  return report.l_D;
}

LossReport combined_loss(const Hyperparams& hp, double l_E, double l_C, double l_A, double l_D) {
  require_finite(l_E, "l_E");
  require_finite(l_C, "l_C");
  require_finite(l_A, "l_A");
  require_finite(l_D, "l_D");
  LossReport r;
  r.l_E = l_E;
  r.l_C = l_C;
  r.l_A = l_A;
  r.l_D = l_D;
  r.total = hp.lambda_E * l_E + hp.lambda_C * l_C + hp.lambda_A * l_A + hp.lambda_D * l_D;
  require_finite(r.total, "total");
  return r;
}

void joint_loss(ModelBundle& b, FeatureNet* extractor, const TargetRegistry* registry,
                const Hyperparams& hp, const Tensor& x, const std::vector<Message>& msgs,
                const std::vector<spectral::QuantTable>& tables, bool use_diffusion,
                bool with_grads, LossReport& out) {
  const int n = x.shape[0];
  if (int(msgs.size()) != n) throw std::invalid_argument("one message per batch image required");
  if (use_diffusion && int(tables.size()) != n)
    throw std::invalid_argument("one quantization table per batch image required");
  if (hp.lambda_A != 0.0) {
    if (!extractor) throw ConfigError("attack term needs a feature extractor");
    if (!registry || registry->empty())
      throw ConfigError("attack loss needs at least one registered manipulation target");
  }
  out = LossReport{};

  const Tensor msg_t = messages_to_tensor(msgs);
  const Tensor x_adv = b.encoder.forward(x, msg_t);
  const std::size_t count = x_adv.data.size();
  Tensor d_xadv(x_adv.shape);

  // Reconstruction term.
  for (std::size_t i = 0; i < count; ++i) {
    const double diff = x_adv.data[i] - x.data[i];
    out.l_E += diff * diff;
    if (with_grads) d_xadv.data[i] = hp.lambda_E * 2.0 * diff / double(count);
  }
  out.l_E /= double(count);
  // A non-finite perturbed image would otherwise surface as a validation
  // error inside the diffusion stage; fail as a numeric error up front.
  if (!std::isfinite(out.l_E)) combined_loss(hp, out.l_E, out.l_C, out.l_A, out.l_D);

  // Clean-path decode diagnostic, value-only, before the backward-carrying
  // decoder forward below.
  {
    const Tensor clean = b.decoder.forward(x_adv);
    for (std::size_t i = 0; i < clean.data.size(); ++i) {
      const double diff = clean.data[i] - msg_t.data[i];
      out.l_M += diff * diff;
    }
    out.l_M /= double(clean.data.size());
  }

  // Realism term: the clean-batch scores are a constant reference; encoder
  // gradients flow only through the perturbed branch.
  if (hp.lambda_C != 0.0) {
    const Tensor score_real = b.discriminator.forward(x);
    const Tensor score_adv = b.discriminator.forward(x_adv);
    Tensor dscore(score_adv.shape);
    for (int i = 0; i < n; ++i) {
      const double sr = clamp_score(score_real.data[i]);
      const double sa = clamp_score(score_adv.data[i]);
      out.l_C += std::log(sr) + std::log(1.0 - sa);
      dscore.data[i] = hp.lambda_C * (-1.0 / (1.0 - sa)) / double(n);
    }
    out.l_C /= double(n);
    if (with_grads) {
      const Tensor dc = b.discriminator.backward(dscore);
      for (std::size_t i = 0; i < count; ++i) d_xadv.data[i] += dc.data[i];
    }
  }

  // Disruption term, one manipulation target at a time. The clean branch of
  // each target and of the extractor runs first so the cached activations
  // left behind belong to the perturbed branch the backward pass needs.
  if (hp.lambda_A != 0.0) {
    const double scale = hp.lambda_A / (double(n) * double(registry->size()));
    for (const auto& target : registry->targets()) {
      const Tensor fin = extractor->features(target->apply(x));
      const Tensor fadv = extractor->features(target->apply(x_adv));
      Tensor dfadv(fadv.shape);
      const double mean_cos = batch_cosine(fin, fadv, with_grads ? &dfadv : nullptr);
      out.per_target_l_A[target->name()] = mean_cos;
      out.l_A += mean_cos;
      if (with_grads) {
        for (double& v : dfadv.data) v *= scale;
        const Tensor dg = extractor->backward_features(dfadv);
        const Tensor dx = target->backward(dg);
        for (std::size_t i = 0; i < count; ++i) d_xadv.data[i] += dx.data[i];
      }
    }
    out.l_A /= double(registry->size());
  }

  // Message term through the diffusion pipeline (or directly, for the
  // identity ablation).
  {
    Tensor diffused = x_adv;
    std::vector<spectral::DiffuseTrace> traces(std::size_t(use_diffusion ? n : 0));
    if (use_diffusion) {
      for (int i = 0; i < n; ++i) {
        const ImageTensor img = batch_image(x_adv, i);
        const ImageTensor d =
            spectral::diffuse_traced(img, tables[std::size_t(i)], {}, &traces[std::size_t(i)]);
        set_batch_image(diffused, i, d);
      }
    }
    const Tensor decoded = b.decoder.forward(diffused);
    Tensor ddec(decoded.shape);
    for (std::size_t i = 0; i < decoded.data.size(); ++i) {
      const double diff = decoded.data[i] - msg_t.data[i];
      out.l_D += diff * diff;
      ddec.data[i] = hp.lambda_D * 2.0 * diff / double(decoded.data.size());
    }
    out.l_D /= double(decoded.data.size());
    if (with_grads) {
      const Tensor ddiff = b.decoder.backward(ddec);
      if (use_diffusion) {
        const std::size_t plane = count / std::size_t(n);
        std::vector<double> grad_in(plane);
        for (int i = 0; i < n; ++i) {
          spectral::diffuse_backward(traces[std::size_t(i)],
                                     ddiff.data.data() + std::size_t(i) * plane, grad_in.data());
          double* dst = d_xadv.data.data() + std::size_t(i) * plane;
          for (std::size_t j = 0; j < plane; ++j) dst[j] += grad_in[j];
        }
      } else {
        for (std::size_t i = 0; i < count; ++i) d_xadv.data[i] += ddiff.data[i];
      }
    }
  }

  if (with_grads) b.encoder.backward(d_xadv);

  const LossReport weighted = combined_loss(hp, out.l_E, out.l_C, out.l_A, out.l_D);
  out.total = weighted.total;
}

double discriminator_gan_loss(ModelBundle& b, const Tensor& x_real, const Tensor& x_adv,
                              bool with_grads) {
  if (x_real.shape != x_adv.shape)
    throw std::invalid_argument("real and perturbed batches must share a shape");
  const int n = x_real.shape[0];
  // One concatenated forward keeps the discriminator's single activation
  // cache valid for the backward pass over both halves.
  Tensor stacked({2 * n, x_real.shape[1], x_real.shape[2], x_real.shape[3]});
  std::copy(x_real.data.begin(), x_real.data.end(), stacked.data.begin());
  std::copy(x_adv.data.begin(), x_adv.data.end(),
            stacked.data.begin() + std::ptrdiff_t(x_real.data.size()));
  const Tensor scores = b.discriminator.forward(stacked);
  double loss = 0.0;
  Tensor dscores(scores.shape);
  for (int i = 0; i < n; ++i) {
    const double sr = clamp_score(scores.data[i]);
    const double sa = clamp_score(scores.data[n + i]);
    loss += std::log(sr) + std::log(1.0 - sa);
    // Gradients of the negated loss: a descending optimizer then ascends.
    dscores.data[i] = -1.0 / (sr * double(n));
    dscores.data[n + i] = 1.0 / ((1.0 - sa) * double(n));
  }
  if (with_grads) b.discriminator.backward(dscores);
  return loss / double(n);
}

ImageTensor pgd_mse_attack(ManipulationTarget& g, const ImageTensor& x0, double eps, double step,
                           int iters) {
  if (!g.differentiable())
    throw UnsupportedTargetError("gradient attack on a non-differentiable target: " + g.name());
  if (eps <= 0.0 || step <= 0.0) throw std::invalid_argument("eps and step must be positive");
  if (iters < 0) throw std::invalid_argument("iteration count must be nonnegative");
  validate_image(x0);

  const Tensor y0 = g.apply(image_to_batch(x0));
  ImageTensor x = x0;
  for (int it = 0; it < iters; ++it) {
    const Tensor y = g.apply(image_to_batch(x));
    Tensor dy(y.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i)
      dy.data[i] = 2.0 * (y.data[i] - y0.data[i]) / double(y.data.size());
    const Tensor dx = g.backward(dy);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      double v = x.data[i];
      const double gr = dx.data[i];
      if (gr > 0.0) v += step;
      else if (gr < 0.0) v -= step;
      v = std::clamp(v, x0.data[i] - eps, x0.data[i] + eps);
      x.data[i] = std::clamp(v, -1.0, 1.0);
    }
  }
  return x;
}

}  // namespace advmark
