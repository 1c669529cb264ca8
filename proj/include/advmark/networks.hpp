#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "advmark/hyperparams.hpp"
#include "advmark/image.hpp"
#include "advmark/message.hpp"
#include "advmark/nn.hpp"
#include "advmark/rng.hpp"

namespace advmark {

struct ArchConfig {
  int message_bits = 64;
  int msg_h = 8, msg_w = 8;
  int image_h = 64, image_w = 64;
  int msg_channels = 64, img_channels = 64;
};

// Message branch: 1xhxw plane upsampled by stride-2 transposed convolutions to
// C_M x H x W, then refined. Image branch: conv stack to C_X x H x W. Both are
// concatenated together with the raw input and fused down to a bounded
// 3-channel residual-free output.
class Encoder {
 public:
  explicit Encoder(const ArchConfig& arch);

  Tensor forward(const Tensor& img, const Tensor& msg);        // msg (N, L)
  std::pair<Tensor, Tensor> backward(const Tensor& dy);        // (d_img, d_msg)
  void collect_params(const std::string& prefix, std::vector<nn::Param*>& out);
  void init(Rng& rng);

 private:
  ArchConfig arch_;
  nn::Sequential msg_net_, img_net_, fusion_;
};

// Stride-2 conv pyramid back down to a 1xhxw plane, flattened to L reals.
// No output activation: soft message values are unbounded.
class Decoder {
 public:
  explicit Decoder(const ArchConfig& arch);

  Tensor forward(const Tensor& img);  // -> (N, L)
  Tensor backward(const Tensor& dy);
  void collect_params(const std::string& prefix, std::vector<nn::Param*>& out);
  void init(Rng& rng);

 private:
  ArchConfig arch_;
  nn::Sequential net_;
};

// Conv stack, global average pooling, linear head, sigmoid: probability that
// the input is a natural image.
class Discriminator {
 public:
  explicit Discriminator(const ArchConfig& arch);

  Tensor forward(const Tensor& img);  // -> (N, 1), strictly inside (0,1)
  Tensor backward(const Tensor& dy);
  void collect_params(const std::string& prefix, std::vector<nn::Param*>& out);
  void init(Rng& rng);

 private:
  nn::Sequential net_;
};

// Attribute-classifier backbone whose pooled penultimate activations serve as
// the perceptual embedding. Trained once on labeled data, then frozen.
class FeatureNet {
 public:
  FeatureNet(int n_attributes, int feature_dim = 128);

  Tensor features(const Tensor& img);        // -> (N, feature_dim)
  Tensor backward_features(const Tensor& dfeat);
  Tensor logits(const Tensor& img);          // -> (N, n_attributes)
  Tensor backward_logits(const Tensor& dlogits);
  void collect_params(const std::string& prefix, std::vector<nn::Param*>& out);
  void init(Rng& rng);

  int feature_dim() const { return feature_dim_; }
  int attribute_count() const { return n_attributes_; }

 private:
  int n_attributes_, feature_dim_;
  nn::Sequential trunk_;
  nn::Linear head_;
};

struct ModelBundle {
  ArchConfig arch;
  Encoder encoder;
  Decoder decoder;
  Discriminator discriminator;
  std::optional<FeatureNet> extractor;
  std::int64_t trained_steps = 0;

  explicit ModelBundle(const ArchConfig& a)
      : arch(a), encoder(a), decoder(a), discriminator(a) {}

  std::vector<nn::Param*> encoder_params();
  std::vector<nn::Param*> decoder_params();
  std::vector<nn::Param*> discriminator_params();
  std::vector<nn::Param*> all_params();  // includes extractor when present
};

ModelBundle init_bundle(const Hyperparams& hp, Rng& rng);

ImageTensor encode(ModelBundle& b, const ImageTensor& img, const Message& msg);
SoftMessage decode(ModelBundle& b, const ImageTensor& img);
double discriminate(ModelBundle& b, const ImageTensor& img);

void save_bundle(ModelBundle& b, const std::string& path);
ModelBundle load_bundle(const std::string& path);

// Copies values for every name present in both lists; throws on shape clash.
void load_named_params(const std::vector<nn::Param*>& params,
                       const std::vector<std::pair<std::string, Tensor>>& arrays);

Tensor message_to_tensor(const Message& msg);      // (1, L) of {0,1}
Tensor messages_to_tensor(const std::vector<Message>& msgs);

}  // namespace advmark
