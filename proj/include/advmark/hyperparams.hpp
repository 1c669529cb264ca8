#pragma once

#include <cstdint>
#include <string>

namespace advmark {

// Every tunable constant of the system in one place. Defaults are the
// published operating point of the training objective; desk-scale runs
// override epochs and dataset size from the CLI or config file.
struct Hyperparams {
  // Loss weights for the combined objective.
  double lambda_E = 1.0;       // image reconstruction
  double lambda_C = 0.0001;    // realism (discriminator) term
  double lambda_A = 0.0025;    // manipulation-disruption term
  double lambda_D = 10.0;      // message recovery through spectral diffusion

  int L = 64;                  // message length in bits; L = msg_h * msg_w
  int msg_h = 8;
  int msg_w = 8;

  double beta = 1.0;           // perturbation strength at inference
  double gamma = 0.7;          // FCM threshold for attack success

  double learning_rate = 1e-3;
  int batch_size = 4;
  int epochs = 100;

  int image_h = 64;
  int image_w = 64;

  int msg_channels = 64;       // C_M
  int img_channels = 64;       // C_X

  double ms_threshold = 0.25;    // message score >= this means "protected"
  double auth_threshold = 0.9;   // FCM to the stored source >= this means "authentic"

  std::uint64_t seed = 1234;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

}  // namespace advmark
