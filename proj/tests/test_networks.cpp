#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "advmark/archive.hpp"
#include "advmark/errors.hpp"
#include "advmark/networks.hpp"
#include "helpers.hpp"

using namespace advmark;

namespace {

Hyperparams toy_hp() {
  Hyperparams hp;
  hp.image_h = hp.image_w = 16;
  hp.msg_channels = 8;
  hp.img_channels = 8;
  hp.L = 16;
  hp.msg_h = hp.msg_w = 4;
  return hp;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("init_bundle validates the message grid against the image size") {
  Hyperparams hp;  // 64x64, L=64, 8x8 grid: three doubling stages
  Rng rng(1);
  ModelBundle b = init_bundle(hp, rng);
  CHECK(b.trained_steps == 0);

  Hyperparams bad = hp;
  bad.image_h = bad.image_w = 60;
  Rng r2(1);
  CHECK_THROWS_AS(init_bundle(bad, r2), std::invalid_argument);

  bad = hp;
  bad.image_h = 24;  // 24/8 = 3, not a power of two
  Rng r3(1);
  CHECK_THROWS_AS(init_bundle(bad, r3), std::invalid_argument);

  bad = hp;
  bad.L = 60;
  bad.msg_h = 6;
  bad.msg_w = 10;
  Rng r4(1);
  CHECK_THROWS_AS(init_bundle(bad, r4), std::invalid_argument);
}

TEST_CASE("same seed gives bitwise-identical parameters") {
  const Hyperparams hp = toy_hp();
  Rng r1(42), r2(42);
  ModelBundle a = init_bundle(hp, r1);
  ModelBundle b = init_bundle(hp, r2);
  auto pa = a.all_params(), pb = b.all_params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value.data == pb[i]->value.data);
  }
}

TEST_CASE("encode shape, range and message sensitivity") {
  const Hyperparams hp = toy_hp();
  Rng rng(7);
  ModelBundle b = init_bundle(hp, rng);
  const ImageTensor img = testing::random_image(16, 16, rng);
  const Message m1 = sample_message(16, rng);
  const Message m2 = complement(m1);

  const ImageTensor y1 = encode(b, img, m1);
  CHECK(y1.height == 16);
  CHECK(y1.width == 16);
  validate_image(y1);  // tanh bound holds for arbitrary parameters

  const ImageTensor y2 = encode(b, img, m2);
  CHECK(max_abs_diff(y1, y2) > 0.0);

  Message wrong;
  wrong.bits.assign(8, 1);
  CHECK_THROWS_AS(encode(b, img, wrong), std::invalid_argument);

  const ImageTensor small = testing::random_image(8, 8, rng);
  CHECK_THROWS_AS(encode(b, small, m1), std::invalid_argument);
}

TEST_CASE("decode shape and discriminator range") {
  const Hyperparams hp = toy_hp();
  Rng rng(8);
  ModelBundle b = init_bundle(hp, rng);
  const ImageTensor img = testing::random_image(16, 16, rng);

  const SoftMessage soft = decode(b, img);
  CHECK(soft.length() == 16);
  for (double v : soft.values) CHECK(std::isfinite(v));

  const double score = discriminate(b, img);
  CHECK(score > 0.0);
  CHECK(score < 1.0);
  // Untrained head has near-zero logits.
  CHECK(std::abs(score - 0.5) < 0.45);
}

TEST_CASE("forward passes are deterministic") {
  const Hyperparams hp = toy_hp();
  Rng rng(9);
  ModelBundle b = init_bundle(hp, rng);
  const ImageTensor img = testing::random_image(16, 16, rng);
  const Message m = sample_message(16, rng);
  const ImageTensor y1 = encode(b, img, m);
  const ImageTensor y2 = encode(b, img, m);
  CHECK(y1.data == y2.data);
}

TEST_CASE("encoder gradient reaches the message input") {
  const Hyperparams hp = toy_hp();
  Rng rng(10);
  ModelBundle b = init_bundle(hp, rng);
  Tensor img = testing::random_tensor({1, 3, 16, 16}, rng, 0.8);
  Tensor msg = testing::random_tensor({1, 16}, rng, 0.0);
  for (double& v : msg.data) v = rng.bernoulli() ? 1.0 : 0.0;

  Tensor y = b.encoder.forward(img, msg);
  Tensor dy(y.shape);
  dy.fill(1.0 / static_cast<double>(y.count()));  // d(mean)/dy
  nn::zero_grads(b.encoder_params());
  auto [dimg, dmsg] = b.encoder.backward(dy);

  auto mean_of = [&](const Tensor& im, const Tensor& ms) {
    Tensor out = b.encoder.forward(im, ms);
    double acc = 0.0;
    for (double v : out.data) acc += v;
    return acc / static_cast<double>(out.count());
  };

  const double h = 1e-6;
  int nonzero = 0;
  for (int bit = 0; bit < 16; ++bit) {
    Tensor mp = msg, mm = msg;
    mp.data[static_cast<std::size_t>(bit)] += h;
    mm.data[static_cast<std::size_t>(bit)] -= h;
    const double fd = (mean_of(img, mp) - mean_of(img, mm)) / (2 * h);
    const double an = dmsg.data[static_cast<std::size_t>(bit)];
    if (std::abs(fd) > 1e-9) {
      ++nonzero;
      CHECK(testing::rel_err(an, fd) < 1e-3);
    }
  }
  CHECK(nonzero >= 12);  // generic parameters: nearly all bits influence the output

  // Image-side gradient agrees too (spot check).
  for (int rep = 0; rep < 8; ++rep) {
    const std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(img.count()) - 1));
    Tensor ip = img, im2 = img;
    ip.data[i] += h;
    im2.data[i] -= h;
    const double fd = (mean_of(ip, msg) - mean_of(im2, msg)) / (2 * h);
    if (std::abs(fd) < 1e-10 && std::abs(dimg.data[i]) < 1e-10) continue;
    CHECK(testing::rel_err(dimg.data[i], fd) < 1e-3);
  }
}

TEST_CASE("decode-of-encode gradient path reaches encoder parameters") {
  const Hyperparams hp = toy_hp();
  Rng rng(11);
  ModelBundle b = init_bundle(hp, rng);
  Tensor img = testing::random_tensor({2, 3, 16, 16}, rng, 0.8);
  Tensor msg = testing::random_tensor({2, 16}, rng, 0.0);
  for (double& v : msg.data) v = rng.bernoulli() ? 1.0 : 0.0;

  auto enc_params = b.encoder_params();
  nn::zero_grads(enc_params);
  nn::zero_grads(b.decoder_params());

  Tensor adv = b.encoder.forward(img, msg);
  Tensor soft = b.decoder.forward(adv);
  Tensor dsoft(soft.shape);
  dsoft.fill(1.0);
  Tensor dadv = b.decoder.backward(dsoft);
  b.encoder.backward(dadv);

  double total_abs = 0.0;
  for (nn::Param* p : enc_params)
    for (double g : p->grad.data) total_abs += std::abs(g);
  CHECK(total_abs > 1e-8);
}

TEST_CASE("bundle save/load roundtrips bitwise") {
  const Hyperparams hp = toy_hp();
  Rng rng(12);
  ModelBundle b = init_bundle(hp, rng);
  b.trained_steps = 321;
  b.extractor.emplace(3, 32);
  Rng fr(5);
  b.extractor->init(fr);

  const std::string path = testing::temp_path("bundle.bin");
  save_bundle(b, path);
  ModelBundle c = load_bundle(path);

  CHECK(c.trained_steps == 321);
  CHECK(c.arch.message_bits == b.arch.message_bits);
  REQUIRE(c.extractor.has_value());

  const ImageTensor img = testing::random_image(16, 16, rng);
  const Message m = sample_message(16, rng);
  const ImageTensor y1 = encode(b, img, m);
  const ImageTensor y2 = encode(c, img, m);
  CHECK(y1.data == y2.data);
  CHECK(decode(b, img).values == decode(c, img).values);
  CHECK(discriminate(b, img) == discriminate(c, img));

  const Tensor f1 = b.extractor->features(image_to_batch(img));
  const Tensor f2 = c.extractor->features(image_to_batch(img));
  CHECK(f1.data == f2.data);
  std::remove(path.c_str());
}

TEST_CASE("truncated bundle file raises a format error") {
  const Hyperparams hp = toy_hp();
  Rng rng(13);
  ModelBundle b = init_bundle(hp, rng);
  const std::string path = testing::temp_path("bundle_trunc.bin");
  save_bundle(b, path);
  const std::string bytes = read_file(path);
  write_file(path, bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_bundle(path), FormatError);
  write_file(path, bytes.substr(0, 10));
  CHECK_THROWS_AS(load_bundle(path), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("corrupted payload raises an integrity error") {
  const Hyperparams hp = toy_hp();
  Rng rng(14);
  ModelBundle b = init_bundle(hp, rng);
  const std::string path = testing::temp_path("bundle_corrupt.bin");
  save_bundle(b, path);
  std::string bytes = read_file(path);
  bytes[bytes.size() / 2] ^= 0x5a;
  write_file(path, bytes);
  CHECK_THROWS_AS(load_bundle(path), IntegrityError);
  std::remove(path.c_str());
}

TEST_CASE("unsupported archive version raises an incompatibility error") {
  const Hyperparams hp = toy_hp();
  Rng rng(15);
  ModelBundle b = init_bundle(hp, rng);
  const std::string path = testing::temp_path("bundle_version.bin");
  save_bundle(b, path);
  std::string bytes = read_file(path);
  // Version lives right after the 8-byte magic; bump it and refresh the CRC.
  bytes[8] = 9;
  const uLong crc = crc32(0, reinterpret_cast<const Bytef*>(bytes.data()),
                          static_cast<uInt>(bytes.size() - 4));
  for (int i = 0; i < 4; ++i) bytes[bytes.size() - 4 + static_cast<std::size_t>(i)] =
      static_cast<char>((crc >> (8 * i)) & 0xff);
  write_file(path, bytes);
  CHECK_THROWS_AS(load_bundle(path), IncompatibilityError);
  std::remove(path.c_str());
}

TEST_CASE("parameter name or shape drift is rejected") {
  const Hyperparams hp = toy_hp();
  Rng rng(16);
  ModelBundle b = init_bundle(hp, rng);
  const std::string path = testing::temp_path("bundle_drift.bin");
  save_bundle(b, path);
  Archive a = read_archive(path);

  Hyperparams other = toy_hp();
  other.img_channels = 4;  // narrower nets: stored arrays no longer fit
  Rng r2(16);
  ModelBundle c = init_bundle(other, r2);
  CHECK_THROWS_AS(load_named_params(c.all_params(), a.arrays), IncompatibilityError);
  std::remove(path.c_str());
}
