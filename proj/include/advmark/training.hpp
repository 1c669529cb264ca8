#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "advmark/dataset.hpp"
#include "advmark/errors.hpp"
#include "advmark/networks.hpp"
#include "advmark/objectives.hpp"
#include "advmark/targets.hpp"

namespace advmark {

struct TrainConfig {
  Hyperparams hp;
  const ToyDataset* dataset = nullptr;
  const TargetRegistry* registry = nullptr;
  FeatureNet* extractor = nullptr;
  int checkpoint_cadence = 0;     // steps between checkpoints, 0 disables
  int log_cadence = 1;            // steps between history/log entries
  bool use_diffusion = true;      // false runs the identity ablation
  double holdout_frac = 0.1;      // validation split, 0 skips validation
  std::string checkpoint_path;    // empty disables checkpoint files
  std::string log_path;           // empty disables the text log

  // Throws ConfigError on inconsistent settings (missing dataset, attack
  // weight without extractor or targets, bad fractions or cadences).
  void validate() const;
};

struct StepRecord {
  std::int64_t step = 0;
  LossReport report;
};

struct ValidationRecord {
  int epoch = 0;
  double ber_clean = 0.0;     // decode of the perturbed image as-is
  double ber_diffused = 0.0;  // decode after one random diffusion pass
  double psnr_db = 0.0;       // perturbed vs. input, peak-to-peak 2
};

struct TrainHistory {
  std::vector<StepRecord> steps;        // strictly increasing step indices
  std::vector<ValidationRecord> epochs;
};

// A loss term turned non-finite; carries whatever parts were computed
// before the failure and the step that was being executed.
class TrainAbortError : public NumericError {
 public:
  TrainAbortError(const std::string& what, const LossReport& report, std::int64_t step)
      : NumericError(what), report_(report), step_(step) {}

  const LossReport& report() const { return report_; }
  std::int64_t step() const { return step_; }

 private:
  LossReport report_;
  std::int64_t step_;
};

// Opaque capture of everything a step mutates, for abort recovery.
struct TrainerState {
  std::vector<Tensor> values;           // bundle parameters, group order
  std::vector<Tensor> joint_m, joint_v, disc_m, disc_v;
  std::int64_t joint_t = 0, disc_t = 0;
  std::int64_t step = 0;
};

// Alternating-phase optimizer around one model bundle. Phase one ascends
// the discriminator on the realism objective alone; phase two descends the
// encoder and decoder on the combined objective with the discriminator
// frozen. The feature extractor and all manipulation targets are never
// stepped.
class Trainer {
 public:
  Trainer(ModelBundle&& bundle, const TrainConfig& cfg);

  // One ascent step on the discriminator parameters. Returns the realism
  // objective value before the step.
  double discriminator_phase(const Tensor& batch, const std::vector<Message>& msgs);

  // One descent step on encoder and decoder parameters.
  LossReport joint_phase(const Tensor& batch, const std::vector<Message>& msgs,
                         const std::vector<spectral::QuantTable>& tables);

  // Fresh messages and quantization tables, then both phases in order.
  LossReport train_step(const Tensor& batch, Rng& rng);

  std::int64_t step_count() const { return step_; }
  ModelBundle& bundle() { return bundle_; }
  const std::vector<Message>& last_messages() const { return last_messages_; }

  TrainerState capture() const;
  void restore(const TrainerState& s);

  // Full resume state: parameters, both moment sets, counters, plus the
  // caller-supplied epoch position and rng state.
  void save_checkpoint(const std::string& path, int epoch, int pos,
                       const std::vector<int>& order, const std::string& rng_state) const;

  ModelBundle&& take_bundle() { return std::move(bundle_); }

 private:
  TrainConfig cfg_;
  ModelBundle bundle_;
  std::vector<nn::Param*> joint_params_, disc_params_;
  std::unique_ptr<nn::Adam> joint_opt_, disc_opt_;
  std::vector<Message> last_messages_;
  std::int64_t step_ = 0;

  friend std::pair<ModelBundle, TrainHistory> resume(const std::string& checkpoint_path,
                                                     const TrainConfig& cfg);
};

// Mean decode quality of a bundle over the given dataset rows. Messages and
// diffusion draws come from a dedicated stream, so evaluation never disturbs
// a training rng.
ValidationRecord validate_split(ModelBundle& b, const ToyDataset& data,
                                const std::vector<int>& indices, std::uint64_t seed);

// Epochs x batches of alternating-phase steps over a shuffled training
// split, with per-epoch validation, cadence-based logging and checkpoints.
// Deterministic given cfg.hp.seed. On a numeric abort the last good state is
// written to cfg.checkpoint_path (when set) before the error propagates.
std::pair<ModelBundle, TrainHistory> train(const TrainConfig& cfg);

// Continues a checkpointed run to cfg.hp.epochs. The checkpoint must match
// cfg.hp's architecture; throws IncompatibilityError otherwise.
std::pair<ModelBundle, TrainHistory> resume(const std::string& checkpoint_path,
                                            const TrainConfig& cfg);

}  // namespace advmark
