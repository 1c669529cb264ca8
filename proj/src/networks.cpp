#include "advmark/networks.hpp"

#include <cmath>
#include <stdexcept>

#include "advmark/archive.hpp"
#include "advmark/errors.hpp"

namespace advmark {
namespace {

int upsample_stages(int image_dim, int msg_dim) {
  if (msg_dim <= 0 || image_dim % msg_dim != 0)
    throw std::invalid_argument("image dim " + std::to_string(image_dim) +
                                " is not a multiple of message grid dim " + std::to_string(msg_dim));
  int ratio = image_dim / msg_dim;
  int stages = 0;
  while (ratio > 1) {
    if (ratio % 2 != 0)
      throw std::invalid_argument("image dim " + std::to_string(image_dim) +
                                  " is not a power-of-two multiple of " + std::to_string(msg_dim));
    ratio /= 2;
    ++stages;
  }
  return stages;
}

void add_conv_block(nn::Sequential& net, int c_in, int c_out, int stride) {
  net.add<nn::Conv2d>(c_in, c_out, 3, stride, 1);
  net.add<nn::InstanceNorm>(c_out);
  net.add<nn::ReLU>();
}

}  // namespace

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const ArchConfig& arch) : arch_(arch) {
  const int stages = upsample_stages(arch.image_h, arch.msg_h);
  const int stages_w = upsample_stages(arch.image_w, arch.msg_w);
  if (stages != stages_w)
    throw std::invalid_argument("message grid aspect must match image aspect");
  const int cm = arch.msg_channels, cx = arch.img_channels;
  for (int i = 0; i < stages; ++i) {
    msg_net_.add<nn::ConvTranspose2d>(i == 0 ? 1 : cm, cm);
    msg_net_.add<nn::InstanceNorm>(cm);
    msg_net_.add<nn::ReLU>();
  }
  add_conv_block(msg_net_, stages == 0 ? 1 : cm, cm, 1);
  add_conv_block(msg_net_, cm, cm, 1);

  add_conv_block(img_net_, 3, cx, 1);
  for (int i = 0; i < 3; ++i) add_conv_block(img_net_, cx, cx, 1);

  add_conv_block(fusion_, cm + cx + 3, cx, 1);
  fusion_.add<nn::Conv2d>(cx, 3, 3, 1, 1);
  fusion_.add<nn::Tanh>();
}

void Encoder::init(Rng& rng) {
  msg_net_.init(rng);
  img_net_.init(rng);
  fusion_.init(rng);
}

void Encoder::collect_params(const std::string& prefix, std::vector<nn::Param*>& out) {
  msg_net_.collect_params(prefix + ".msg", out);
  img_net_.collect_params(prefix + ".img", out);
  fusion_.collect_params(prefix + ".fuse", out);
}

Tensor Encoder::forward(const Tensor& img, const Tensor& msg) {
  const int n = img.shape[0];
  if (msg.shape.size() != 2 || msg.shape[0] != n || msg.shape[1] != arch_.message_bits)
    throw std::invalid_argument("encoder message tensor must be (N, L)");
  if (img.shape[1] != 3 || img.shape[2] != arch_.image_h || img.shape[3] != arch_.image_w)
    throw std::invalid_argument("encoder image tensor has wrong shape");
  Tensor plane = msg;
  plane.shape = {n, 1, arch_.msg_h, arch_.msg_w};
  Tensor msg_feat = msg_net_.forward(plane);
  Tensor img_feat = img_net_.forward(img);
  Tensor joint = nn::concat_channels({&msg_feat, &img_feat, &img});
  return fusion_.forward(joint);
}

std::pair<Tensor, Tensor> Encoder::backward(const Tensor& dy) {
  Tensor djoint = fusion_.backward(dy);
  auto parts = nn::split_channels(djoint, {arch_.msg_channels, arch_.img_channels, 3});
  Tensor dmsg_plane = msg_net_.backward(parts[0]);
  dmsg_plane.shape = {dmsg_plane.shape[0], arch_.message_bits};
  Tensor dimg = img_net_.backward(parts[1]);
  for (std::size_t i = 0; i < dimg.count(); ++i) dimg.data[i] += parts[2].data[i];
  return {std::move(dimg), std::move(dmsg_plane)};
}

// ---------------------------------------------------------------------------
// Decoder

Decoder::Decoder(const ArchConfig& arch) : arch_(arch) {
  const int stages = upsample_stages(arch.image_h, arch.msg_h);
  const int c = arch.img_channels;
  add_conv_block(net_, 3, c, 1);
  for (int i = 0; i < stages; ++i) add_conv_block(net_, c, c, 2);
  add_conv_block(net_, c, c, 1);
  net_.add<nn::Conv2d>(c, 1, 3, 1, 1);
  net_.add<nn::Flatten>();
}

void Decoder::init(Rng& rng) { net_.init(rng); }

void Decoder::collect_params(const std::string& prefix, std::vector<nn::Param*>& out) {
  net_.collect_params(prefix, out);
}

Tensor Decoder::forward(const Tensor& img) { return net_.forward(img); }

Tensor Decoder::backward(const Tensor& dy) { return net_.backward(dy); }

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const ArchConfig&) {
  auto block = [&](int c_in, int c_out) {
    net_.add<nn::Conv2d>(c_in, c_out, 3, 2, 1);
    net_.add<nn::InstanceNorm>(c_out);
    net_.add<nn::LeakyReLU>(0.2);
  };
  block(3, 32);
  block(32, 64);
  block(64, 64);
  net_.add<nn::GlobalAvgPool>();
  net_.add<nn::Linear>(64, 1);
  net_.add<nn::Sigmoid>();
}

void Discriminator::init(Rng& rng) { net_.init(rng); }

void Discriminator::collect_params(const std::string& prefix, std::vector<nn::Param*>& out) {
  net_.collect_params(prefix, out);
}

Tensor Discriminator::forward(const Tensor& img) { return net_.forward(img); }

Tensor Discriminator::backward(const Tensor& dy) { return net_.backward(dy); }

// ---------------------------------------------------------------------------
// FeatureNet

FeatureNet::FeatureNet(int n_attributes, int feature_dim)
    : n_attributes_(n_attributes), feature_dim_(feature_dim), head_(feature_dim, n_attributes) {
  if (n_attributes < 1) throw std::invalid_argument("feature net needs at least one attribute");
  auto block = [&](int c_in, int c_out) {
    trunk_.add<nn::Conv2d>(c_in, c_out, 3, 2, 1);
    trunk_.add<nn::InstanceNorm>(c_out);
    trunk_.add<nn::ReLU>();
  };
  block(3, 32);
  block(32, 64);
  block(64, feature_dim);
  block(feature_dim, feature_dim);
  trunk_.add<nn::GlobalAvgPool>();
}

void FeatureNet::init(Rng& rng) {
  trunk_.init(rng);
  head_.init(rng);
}

void FeatureNet::collect_params(const std::string& prefix, std::vector<nn::Param*>& out) {
  trunk_.collect_params(prefix + ".trunk", out);
  head_.collect_params(prefix + ".head", out);
}

Tensor FeatureNet::features(const Tensor& img) { return trunk_.forward(img); }

Tensor FeatureNet::backward_features(const Tensor& dfeat) { return trunk_.backward(dfeat); }

Tensor FeatureNet::logits(const Tensor& img) { return head_.forward(trunk_.forward(img)); }

Tensor FeatureNet::backward_logits(const Tensor& dlogits) {
  return trunk_.backward(head_.backward(dlogits));
}

// ---------------------------------------------------------------------------
// Bundle

std::vector<nn::Param*> ModelBundle::encoder_params() {
  std::vector<nn::Param*> out;
  encoder.collect_params("encoder", out);
  return out;
}

std::vector<nn::Param*> ModelBundle::decoder_params() {
  std::vector<nn::Param*> out;
  decoder.collect_params("decoder", out);
  return out;
}

std::vector<nn::Param*> ModelBundle::discriminator_params() {
  std::vector<nn::Param*> out;
  discriminator.collect_params("discriminator", out);
  return out;
}

std::vector<nn::Param*> ModelBundle::all_params() {
  std::vector<nn::Param*> out;
  encoder.collect_params("encoder", out);
  decoder.collect_params("decoder", out);
  discriminator.collect_params("discriminator", out);
  if (extractor) extractor->collect_params("extractor", out);
  return out;
}

ModelBundle init_bundle(const Hyperparams& hp, Rng& rng) {
  hp.validate();
  if (hp.L != hp.msg_h * hp.msg_w)
    throw std::invalid_argument("L must equal msg_h * msg_w");
  ArchConfig arch;
  arch.message_bits = hp.L;
  arch.msg_h = hp.msg_h;
  arch.msg_w = hp.msg_w;
  arch.image_h = hp.image_h;
  arch.image_w = hp.image_w;
  arch.msg_channels = hp.msg_channels;
  arch.img_channels = hp.img_channels;
  ModelBundle b(arch);
  b.encoder.init(rng);
  b.decoder.init(rng);
  b.discriminator.init(rng);
  return b;
}

Tensor message_to_tensor(const Message& msg) {
  Tensor t({1, static_cast<int>(msg.bits.size())});
  for (std::size_t i = 0; i < msg.bits.size(); ++i) t.data[i] = msg.bits[i] ? 1.0 : 0.0;
  return t;
}

Tensor messages_to_tensor(const std::vector<Message>& msgs) {
  if (msgs.empty()) throw std::invalid_argument("no messages");
  const int l = static_cast<int>(msgs[0].bits.size());
  Tensor t({static_cast<int>(msgs.size()), l});
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    if (static_cast<int>(msgs[i].bits.size()) != l)
      throw std::invalid_argument("ragged message batch");
    for (int j = 0; j < l; ++j) t.data[i * l + j] = msgs[i].bits[j] ? 1.0 : 0.0;
  }
  return t;
}

ImageTensor encode(ModelBundle& b, const ImageTensor& img, const Message& msg) {
  validate_image(img);
  if (static_cast<int>(msg.bits.size()) != b.arch.message_bits)
    throw std::invalid_argument("message length does not match bundle");
  if (img.height != b.arch.image_h || img.width != b.arch.image_w)
    throw std::invalid_argument("image size does not match bundle");
  Tensor y = b.encoder.forward(image_to_batch(img), message_to_tensor(msg));
  return batch_image(y, 0);
}

SoftMessage decode(ModelBundle& b, const ImageTensor& img) {
  validate_image(img);
  if (img.height != b.arch.image_h || img.width != b.arch.image_w)
    throw std::invalid_argument("image size does not match bundle");
  Tensor y = b.decoder.forward(image_to_batch(img));
  SoftMessage m;
  m.values.assign(y.data.begin(), y.data.end());
  return m;
}

double discriminate(ModelBundle& b, const ImageTensor& img) {
  validate_image(img);
  Tensor y = b.discriminator.forward(image_to_batch(img));
  return y.data[0];
}

void load_named_params(const std::vector<nn::Param*>& params,
                       const std::vector<std::pair<std::string, Tensor>>& arrays) {
  for (const auto& [name, t] : arrays) {
    bool found = false;
    for (nn::Param* p : params) {
      if (p->name != name) continue;
      if (!p->value.same_shape(t))
        throw IncompatibilityError("parameter shape mismatch for " + name);
      p->value = t;
      found = true;
      break;
    }
    if (!found) throw IncompatibilityError("no parameter slot named " + name);
  }
}

void save_bundle(ModelBundle& b, const std::string& path) {
  nlohmann::json meta;
  meta["kind"] = "model_bundle";
  meta["arch"] = {{"message_bits", b.arch.message_bits}, {"msg_h", b.arch.msg_h},
                  {"msg_w", b.arch.msg_w},               {"image_h", b.arch.image_h},
                  {"image_w", b.arch.image_w},           {"msg_channels", b.arch.msg_channels},
                  {"img_channels", b.arch.img_channels}};
  meta["trained_steps"] = b.trained_steps;
  meta["has_extractor"] = b.extractor.has_value();
  if (b.extractor) {
    meta["extractor"] = {{"attributes", b.extractor->attribute_count()},
                         {"feature_dim", b.extractor->feature_dim()}};
  }
  std::vector<std::pair<std::string, const Tensor*>> arrays;
  for (nn::Param* p : b.all_params()) arrays.emplace_back(p->name, &p->value);
  write_archive(path, meta, arrays);
}

ModelBundle load_bundle(const std::string& path) {
  Archive a = read_archive(path);
  if (!a.meta.contains("arch")) throw FormatError("bundle metadata lacks architecture block");
  const auto& j = a.meta["arch"];
  ArchConfig arch;
  arch.message_bits = j.at("message_bits").get<int>();
  arch.msg_h = j.at("msg_h").get<int>();
  arch.msg_w = j.at("msg_w").get<int>();
  arch.image_h = j.at("image_h").get<int>();
  arch.image_w = j.at("image_w").get<int>();
  arch.msg_channels = j.at("msg_channels").get<int>();
  arch.img_channels = j.at("img_channels").get<int>();
  ModelBundle b(arch);
  b.trained_steps = a.meta.value("trained_steps", std::int64_t{0});
  if (a.meta.value("has_extractor", false)) {
    const auto& je = a.meta.at("extractor");
    b.extractor.emplace(je.at("attributes").get<int>(), je.at("feature_dim").get<int>());
  }
  load_named_params(b.all_params(), a.arrays);
  return b;
}

}  // namespace advmark
