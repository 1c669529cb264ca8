#include "advmark/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "advmark/archive.hpp"
#include "advmark/spectral.hpp"

namespace advmark {
namespace {

constexpr std::uint64_t kSplitSalt = 0x5eedb0a710c0ffeeULL;

void shuffle_ints(std::vector<int>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = std::size_t(rng.uniform_int(0, std::int64_t(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

ArchConfig arch_from(const Hyperparams& hp) {
  ArchConfig arch;
  arch.message_bits = hp.L;
  arch.msg_h = hp.msg_h;
  arch.msg_w = hp.msg_w;
  arch.image_h = hp.image_h;
  arch.image_w = hp.image_w;
  arch.msg_channels = hp.msg_channels;
  arch.img_channels = hp.img_channels;
  return arch;
}

// Messages and diffusion draws during validation come from a stream derived
// from the config seed and the epoch alone, so a resumed run reproduces the
// straight run's validation exactly.
std::uint64_t validation_seed(std::uint64_t seed, int epoch) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (std::uint64_t(epoch) + 2));
}

struct SplitIndices {
  std::vector<int> train, holdout;
};

SplitIndices split_dataset(const TrainConfig& cfg) {
  const int n = int(cfg.dataset->faces.size());
  std::vector<int> all(static_cast<std::size_t>(n), 0);
  std::iota(all.begin(), all.end(), 0);
  Rng split_rng(cfg.hp.seed ^ kSplitSalt);
  shuffle_ints(all, split_rng);
  int h = int(std::llround(cfg.holdout_frac * n));
  h = std::clamp(h, 0, n - 1);
  SplitIndices s;
  s.holdout.assign(all.begin(), all.begin() + h);
  s.train.assign(all.begin() + h, all.end());
  return s;
}

void append_log_line(std::ofstream& log, std::int64_t step, const LossReport& r) {
  char line[256];
  std::snprintf(line, sizeof(line), "%lld\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\n",
                static_cast<long long>(step), r.l_E, r.l_C, r.l_A, r.l_D, r.total);
  log << line;
  log.flush();
}

}  // namespace

void TrainConfig::validate() const {
  hp.validate();
  if (!dataset || dataset->faces.empty()) throw ConfigError("training needs a nonempty dataset");
  const ImageTensor& first = dataset->faces.front().image;
  if (first.height != hp.image_h || first.width != hp.image_w)
    throw ConfigError("dataset image size does not match the configured size");
  if (hp.lambda_A != 0.0) {
    if (!extractor) throw ConfigError("attack weight set but no feature extractor given");
    if (!registry || registry->empty())
      throw ConfigError("attack weight set but no manipulation targets registered");
  }
  if (holdout_frac < 0.0 || holdout_frac >= 1.0)
    throw ConfigError("holdout fraction must lie in [0, 1)");
  if (checkpoint_cadence < 0 || log_cadence < 0)
    throw ConfigError("cadences must be nonnegative");
}

Trainer::Trainer(ModelBundle&& bundle, const TrainConfig& cfg)
    : cfg_(cfg), bundle_(std::move(bundle)) {
  joint_params_ = bundle_.encoder_params();
  const std::vector<nn::Param*> dec = bundle_.decoder_params();
  joint_params_.insert(joint_params_.end(), dec.begin(), dec.end());
  disc_params_ = bundle_.discriminator_params();
  joint_opt_ = std::make_unique<nn::Adam>(joint_params_, cfg_.hp.learning_rate);
  disc_opt_ = std::make_unique<nn::Adam>(disc_params_, cfg_.hp.learning_rate);
  step_ = bundle_.trained_steps;
}

double Trainer::discriminator_phase(const Tensor& batch, const std::vector<Message>& msgs) {
  if (int(msgs.size()) != batch.shape[0])
    throw std::invalid_argument("one message per batch image required");
  const Tensor x_adv = bundle_.encoder.forward(batch, messages_to_tensor(msgs));
  disc_opt_->zero_grad();
  const double l_C = discriminator_gan_loss(bundle_, batch, x_adv, true);
  if (!std::isfinite(l_C)) {
    LossReport r;
    r.l_C = l_C;
    throw TrainAbortError("non-finite realism objective in the discriminator phase", r,
                          step_ + 1);
  }
  disc_opt_->step();
  return l_C;
}

LossReport Trainer::joint_phase(const Tensor& batch, const std::vector<Message>& msgs,
                                const std::vector<spectral::QuantTable>& tables) {
  joint_opt_->zero_grad();
  if (cfg_.extractor) {
    std::vector<nn::Param*> fp;
    cfg_.extractor->collect_params("extractor", fp);
    nn::zero_grads(fp);  // the through-flow pollutes them; keep diagnostics clean
  }
  LossReport r;
  try {
    joint_loss(bundle_, cfg_.extractor, cfg_.registry, cfg_.hp, batch, msgs, tables,
               cfg_.use_diffusion, true, r);
  } catch (const NumericError& e) {
    throw TrainAbortError(e.what(), r, step_ + 1);
  }
  joint_opt_->step();
  return r;
}

LossReport Trainer::train_step(const Tensor& batch, Rng& rng) {
  const int n = batch.shape[0];
  if (n < 1) throw std::invalid_argument("empty batch");
  std::vector<Message> msgs;
  msgs.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) msgs.push_back(sample_message(cfg_.hp.L, rng));
  std::vector<spectral::QuantTable> tables;
  if (cfg_.use_diffusion) {
    tables.reserve(std::size_t(n));
    for (int i = 0; i < n; ++i) tables.push_back(spectral::sample_quant_table(rng));
  }
  discriminator_phase(batch, msgs);
  const LossReport r = joint_phase(batch, msgs, tables);
  last_messages_ = std::move(msgs);
  ++step_;
  bundle_.trained_steps = step_;
  return r;
}

TrainerState Trainer::capture() const {
  TrainerState s;
  s.values.reserve(joint_params_.size() + disc_params_.size());
  for (const nn::Param* p : joint_params_) s.values.push_back(p->value);
  for (const nn::Param* p : disc_params_) s.values.push_back(p->value);
  for (const auto& [name, t] : joint_opt_->state_arrays())
    (name.rfind("adam.m.", 0) == 0 ? s.joint_m : s.joint_v).push_back(*t);
  for (const auto& [name, t] : disc_opt_->state_arrays())
    (name.rfind("adam.m.", 0) == 0 ? s.disc_m : s.disc_v).push_back(*t);
  s.joint_t = joint_opt_->step_count();
  s.disc_t = disc_opt_->step_count();
  s.step = step_;
  return s;
}

void Trainer::restore(const TrainerState& s) {
  if (s.values.size() != joint_params_.size() + disc_params_.size())
    throw IncompatibilityError("trainer state does not match the parameter layout");
  std::size_t k = 0;
  for (nn::Param* p : joint_params_) p->value = s.values[k++];
  for (nn::Param* p : disc_params_) p->value = s.values[k++];
  for (std::size_t i = 0; i < joint_params_.size(); ++i) {
    joint_opt_->load_state("adam.m." + joint_params_[i]->name, s.joint_m[i]);
    joint_opt_->load_state("adam.v." + joint_params_[i]->name, s.joint_v[i]);
  }
  for (std::size_t i = 0; i < disc_params_.size(); ++i) {
    disc_opt_->load_state("adam.m." + disc_params_[i]->name, s.disc_m[i]);
    disc_opt_->load_state("adam.v." + disc_params_[i]->name, s.disc_v[i]);
  }
  joint_opt_->set_step_count(s.joint_t);
  disc_opt_->set_step_count(s.disc_t);
  step_ = s.step;
  bundle_.trained_steps = s.step;
}

void Trainer::save_checkpoint(const std::string& path, int epoch, int pos,
                              const std::vector<int>& order, const std::string& rng_state) const {
  nlohmann::json meta;
  meta["kind"] = "train_checkpoint";
  meta["arch"] = {{"message_bits", bundle_.arch.message_bits},
                  {"msg_h", bundle_.arch.msg_h},
                  {"msg_w", bundle_.arch.msg_w},
                  {"image_h", bundle_.arch.image_h},
                  {"image_w", bundle_.arch.image_w},
                  {"msg_channels", bundle_.arch.msg_channels},
                  {"img_channels", bundle_.arch.img_channels}};
  meta["step"] = step_;
  meta["epoch"] = epoch;
  meta["pos"] = pos;
  meta["order"] = order;
  meta["rng"] = rng_state;
  meta["joint_t"] = joint_opt_->step_count();
  meta["disc_t"] = disc_opt_->step_count();
  meta["use_diffusion"] = cfg_.use_diffusion;

  std::vector<std::pair<std::string, const Tensor*>> arrays;
  for (const nn::Param* p : joint_params_) arrays.emplace_back(p->name, &p->value);
  for (const nn::Param* p : disc_params_) arrays.emplace_back(p->name, &p->value);
  std::vector<std::pair<std::string, const Tensor*>> joint_state = joint_opt_->state_arrays();
  std::vector<std::pair<std::string, const Tensor*>> disc_state = disc_opt_->state_arrays();
  for (auto& [name, t] : joint_state) arrays.emplace_back("joint." + name, t);
  for (auto& [name, t] : disc_state) arrays.emplace_back("disc." + name, t);
  write_archive(path, meta, arrays);
}

ValidationRecord validate_split(ModelBundle& b, const ToyDataset& data,
                                const std::vector<int>& indices, std::uint64_t seed) {
  if (indices.empty()) throw std::invalid_argument("validation needs at least one image");
  Rng vrng(seed);
  ValidationRecord r;
  for (int idx : indices) {
    const ImageTensor& img = data.faces.at(std::size_t(idx)).image;
    const Message msg = sample_message(b.arch.message_bits, vrng);
    const ImageTensor x_adv = encode(b, img, msg);
    r.ber_clean += bit_error_rate(harden(decode(b, x_adv)), msg);
    const ImageTensor diffused = spectral::diffuse(x_adv, vrng);
    r.ber_diffused += bit_error_rate(harden(decode(b, diffused)), msg);
    const double mse = mean_squared_error(img, x_adv);
    r.psnr_db += mse == 0.0 ? std::numeric_limits<double>::infinity()
                            : 10.0 * std::log10(4.0 / mse);
  }
  const double n = double(indices.size());
  r.ber_clean /= n;
  r.ber_diffused /= n;
  r.psnr_db /= n;
  return r;
}

namespace {

// State the batch loop keeps so an abort can roll back to the last
// completed step and persist it.
struct LastGood {
  std::optional<TrainerState> state;
  std::string rng;
  int epoch = 0, pos = 0;
  std::vector<int> order;
};

void run_epoch_from(Trainer& trainer, const TrainConfig& cfg, const std::vector<int>& order,
                    int epoch, int start_pos, Rng& master, TrainHistory& hist,
                    std::ofstream* log, LastGood& good) {
  const int bs = cfg.hp.batch_size;
  const int total = int(order.size());
  if (!good.state) {  // a first-step abort rolls back to the initial state
    good.state = trainer.capture();
    good.rng = master.serialize();
    good.epoch = epoch;
    good.pos = start_pos;
    good.order = order;
  }
  for (int pos = start_pos; pos < total; pos += bs) {
    const int take = std::min(bs, total - pos);
    const std::vector<int> rows(order.begin() + pos, order.begin() + pos + take);
    const Tensor batch = faces_to_batch(*cfg.dataset, rows);
    LossReport r;
    try {
      r = trainer.train_step(batch, master);
    } catch (const TrainAbortError&) {
      if (good.state) {
        trainer.restore(*good.state);
        if (!cfg.checkpoint_path.empty())
          trainer.save_checkpoint(cfg.checkpoint_path, good.epoch, good.pos, good.order,
                                  good.rng);
      }
      throw;
    }
    good.state = trainer.capture();
    good.rng = master.serialize();
    good.epoch = epoch;
    good.pos = pos + take;
    good.order = order;

    const std::int64_t step = trainer.step_count();
    if (cfg.log_cadence > 0 && step % cfg.log_cadence == 0) {
      hist.steps.push_back({step, r});
      if (log) append_log_line(*log, step, r);
    }
    if (cfg.checkpoint_cadence > 0 && !cfg.checkpoint_path.empty() &&
        step % cfg.checkpoint_cadence == 0)
      trainer.save_checkpoint(cfg.checkpoint_path, epoch, pos + take, order,
                              master.serialize());
  }
}

std::pair<ModelBundle, TrainHistory> drive(Trainer& trainer, const TrainConfig& cfg,
                                           Rng& master, int start_epoch, int start_pos,
                                           std::vector<int> first_order) {
  const SplitIndices split = split_dataset(cfg);
  if (split.train.empty()) throw ConfigError("training split is empty");

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::app);
    if (!log) throw std::runtime_error("cannot open training log " + cfg.log_path);
  }
  std::ofstream* logp = cfg.log_path.empty() ? nullptr : &log;

  TrainHistory hist;
  LastGood good;
  for (int epoch = start_epoch; epoch < cfg.hp.epochs; ++epoch) {
    std::vector<int> order;
    int pos = 0;
    if (epoch == start_epoch && !first_order.empty()) {
      order = std::move(first_order);
      pos = start_pos;
    } else {
      order = split.train;
      shuffle_ints(order, master);
    }
    run_epoch_from(trainer, cfg, order, epoch, pos, master, hist, logp, good);
    if (!split.holdout.empty()) {
      ValidationRecord v = validate_split(trainer.bundle(), *cfg.dataset, split.holdout,
                                          validation_seed(cfg.hp.seed, epoch));
      v.epoch = epoch;
      hist.epochs.push_back(v);
    }
  }
  return {trainer.take_bundle(), std::move(hist)};
}

}  // namespace

std::pair<ModelBundle, TrainHistory> train(const TrainConfig& cfg) {
  cfg.validate();
  Rng master(cfg.hp.seed);
  ModelBundle bundle = init_bundle(cfg.hp, master);
  Trainer trainer(std::move(bundle), cfg);
  return drive(trainer, cfg, master, 0, 0, {});
}

std::pair<ModelBundle, TrainHistory> resume(const std::string& checkpoint_path,
                                            const TrainConfig& cfg) {
  cfg.validate();
  Archive a = read_archive(checkpoint_path);
  if (a.meta.value("kind", std::string()) != "train_checkpoint")
    throw FormatError("not a training checkpoint: " + checkpoint_path);

  const ArchConfig want = arch_from(cfg.hp);
  const auto& j = a.meta.at("arch");
  const bool arch_ok = j.at("message_bits").get<int>() == want.message_bits &&
                       j.at("msg_h").get<int>() == want.msg_h &&
                       j.at("msg_w").get<int>() == want.msg_w &&
                       j.at("image_h").get<int>() == want.image_h &&
                       j.at("image_w").get<int>() == want.image_w &&
                       j.at("msg_channels").get<int>() == want.msg_channels &&
                       j.at("img_channels").get<int>() == want.img_channels;
  if (!arch_ok)
    throw IncompatibilityError("checkpoint architecture does not match the configuration");
  if (a.meta.value("use_diffusion", true) != cfg.use_diffusion)
    throw IncompatibilityError("checkpoint diffusion mode does not match the configuration");

  ModelBundle bundle(want);
  Trainer trainer(std::move(bundle), cfg);

  std::vector<std::pair<std::string, Tensor>> plain;
  for (auto& [name, t] : a.arrays) {
    if (name.rfind("joint.", 0) == 0)
      trainer.joint_opt_->load_state(name.substr(6), t);
    else if (name.rfind("disc.", 0) == 0)
      trainer.disc_opt_->load_state(name.substr(5), t);
    else
      plain.emplace_back(name, t);
  }
  load_named_params(trainer.bundle_.all_params(), plain);
  trainer.joint_opt_->set_step_count(a.meta.at("joint_t").get<std::int64_t>());
  trainer.disc_opt_->set_step_count(a.meta.at("disc_t").get<std::int64_t>());
  trainer.step_ = a.meta.at("step").get<std::int64_t>();
  trainer.bundle_.trained_steps = trainer.step_;

  Rng master;
  master.deserialize(a.meta.at("rng").get<std::string>());
  const int epoch = a.meta.at("epoch").get<int>();
  const int pos = a.meta.at("pos").get<int>();
  std::vector<int> order = a.meta.at("order").get<std::vector<int>>();
  return drive(trainer, cfg, master, epoch, pos, std::move(order));
}

}  // namespace advmark
