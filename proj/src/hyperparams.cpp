#include "advmark/hyperparams.hpp"

#include <stdexcept>

namespace advmark {

void Hyperparams::validate() const {
  auto fail = [](const char* msg) { throw std::invalid_argument(std::string("hyperparams: ") + msg); };
  if (lambda_E < 0 || lambda_C < 0 || lambda_A < 0 || lambda_D < 0)
    fail("loss weights must be nonnegative");
  if (L < 1) fail("L must be positive");
  if (msg_h < 1 || msg_w < 1 || msg_h * msg_w != L) fail("msg_h * msg_w must equal L");
  if (beta < 0) fail("beta must be nonnegative");
  if (gamma < -1.0 || gamma > 1.0) fail("gamma must lie in [-1,1]");
  if (learning_rate <= 0) fail("learning_rate must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (epochs < 0) fail("epochs must be nonnegative");
  if (image_h < 8 || image_w < 8 || image_h % 8 != 0 || image_w % 8 != 0)
    fail("image dimensions must be positive multiples of 8");
  if (msg_channels < 1 || img_channels < 1) fail("channel widths must be positive");
  if (ms_threshold < 0) fail("ms_threshold must be nonnegative");
  if (auth_threshold < -1.0 || auth_threshold > 1.0) fail("auth_threshold must lie in [-1,1]");
}

}  // namespace advmark
